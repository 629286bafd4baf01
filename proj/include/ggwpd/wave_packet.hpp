#pragma once

#include <complex>

namespace ggwpd {

using cplx = std::complex<double>;

/// Gaussian wave packet
///
///   phi(x) = exp[-(b/2h)(x-q)^2 + (i p/h)(x-q) + (i/2h) p q] * [(b+b*)/(2 pi h)]^(1/4)
///
/// A coherent state in quadrature form maps onto this with width = 1 and
/// hbar = 1/n (inverse boson number).
struct WavePacketParams {
    double q_center = 0.0;
    double p_center = 0.0;
    cplx width{1.0, 0.0};
    double hbar = 1.0;

    /// Throws std::invalid_argument unless Re(width) > 0 and hbar > 0.
    void validate() const;

    static WavePacketParams coherent_state(double q, double p, double hbar_eff) {
        return {q, p, cplx{1.0, 0.0}, hbar_eff};
    }
};

/// Point in complexified phase space.
struct ComplexPhasePoint {
    cplx q;
    cplx p;
};

/// Complex position on the ket manifold; the momentum is always slaved to it.
struct ManifoldCoordinate {
    cplx u;
};

/// Point on the ket manifold  b(q - q_c) + i(p - p_c) = 0  with q = u.
ComplexPhasePoint manifold_lift(ManifoldCoordinate u, const WavePacketParams& wp);

/// Ket manifold residual b(q - q_c) + i(p - p_c).
cplx ket_residual(const ComplexPhasePoint& pt, const WavePacketParams& wp);

/// Bra (dual) manifold residual b*(q - q_c) - i(p - p_c); zero on the manifold.
cplx dual_residual(const ComplexPhasePoint& pt, const WavePacketParams& wp_bra);

/// Quarter-power normalization exponent (1/4) log[(b+b*)/(2 pi h)].
double log_normalization(const WavePacketParams& wp);

/// log phi(u), analytically continued to complex u.
cplx initial_exponent(ManifoldCoordinate u, const WavePacketParams& wp);

/// log phi*(x) continued to complex x (the bra wave packet exponent).
cplx bra_exponent(cplx x, const WavePacketParams& wp_bra);

cplx wavepacket_eval(double x, const WavePacketParams& wp);

/// Closed-form <phi_beta|phi_alpha>.
cplx gaussian_overlap(const WavePacketParams& bra, const WavePacketParams& ket);

}  // namespace ggwpd
