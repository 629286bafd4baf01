#include "ggwpd/wave_packet.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ggwpd {

using namespace std::complex_literals;

void WavePacketParams::validate() const {
    if (!(width.real() > 0.0)) {
        throw std::invalid_argument("wave packet width must have a positive real part");
    }
    if (!(hbar > 0.0)) {
        throw std::invalid_argument("hbar must be positive");
    }
}

ComplexPhasePoint manifold_lift(ManifoldCoordinate u, const WavePacketParams& wp) {
    return {u.u, wp.p_center + 1i * wp.width * (u.u - wp.q_center)};
}

cplx ket_residual(const ComplexPhasePoint& pt, const WavePacketParams& wp) {
    return wp.width * (pt.q - wp.q_center) + 1i * (pt.p - wp.p_center);
}

cplx dual_residual(const ComplexPhasePoint& pt, const WavePacketParams& wp_bra) {
    return std::conj(wp_bra.width) * (pt.q - wp_bra.q_center) - 1i * (pt.p - wp_bra.p_center);
}

double log_normalization(const WavePacketParams& wp) {
    // (b + b*) is real and positive for Re b > 0.
    return 0.25 * std::log(2.0 * wp.width.real() / (2.0 * std::numbers::pi * wp.hbar));
}

cplx initial_exponent(ManifoldCoordinate u, const WavePacketParams& wp) {
    const cplx dq = u.u - wp.q_center;
    const double h = wp.hbar;
    return -wp.width / (2.0 * h) * dq * dq + 1i * wp.p_center / h * dq
           + 0.5i * wp.p_center * wp.q_center / h + log_normalization(wp);
}

cplx bra_exponent(cplx x, const WavePacketParams& wp_bra) {
    const cplx dq = x - wp_bra.q_center;
    const double h = wp_bra.hbar;
    return -std::conj(wp_bra.width) / (2.0 * h) * dq * dq - 1i * wp_bra.p_center / h * dq
           - 0.5i * wp_bra.p_center * wp_bra.q_center / h + log_normalization(wp_bra);
}

cplx wavepacket_eval(double x, const WavePacketParams& wp) {
    return std::exp(initial_exponent({cplx{x, 0.0}}, wp));
}

cplx gaussian_overlap(const WavePacketParams& bra, const WavePacketParams& ket) {
    if (bra.hbar != ket.hbar) {
        throw std::invalid_argument("overlap requires a common hbar");
    }
    const double h = ket.hbar;
    const cplx bk = ket.width;
    const cplx bb = std::conj(bra.width);
    // exponent = -(a/2) x^2 + lin x + c
    const cplx a = (bk + bb) / h;
    const cplx lin = (bk * ket.q_center + 1i * ket.p_center) / h
                     + (bb * bra.q_center - 1i * bra.p_center) / h;
    const cplx c = -bk * ket.q_center * ket.q_center / (2.0 * h)
                   - 0.5i * ket.p_center * ket.q_center / h
                   - bb * bra.q_center * bra.q_center / (2.0 * h)
                   + 0.5i * bra.p_center * bra.q_center / h
                   + log_normalization(ket) + log_normalization(bra);
    return std::sqrt(2.0 * std::numbers::pi / a) * std::exp(lin * lin / (2.0 * a) + c);
}

}  // namespace ggwpd
