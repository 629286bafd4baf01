#include "ggwpd/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ggwpd/parallel.hpp"

namespace ggwpd {

using namespace std::complex_literals;

TrackedLog saddle_log_jacobian(const Saddle& s, const WavePacketParams& wp, const SystemParams& sys,
                               const ContributionOptions& opts) {
    const Target target = s.target;
    const cplx b = wp.width;
    auto g = [&target, b](const StabilityMatrix& m) { return target.derivative(m, b); };
    if (s.log_jacobian && !opts.time_branch) {
        const cplx gt = g(s.traj.stability);
        return {*s.log_jacobian, std::abs(gt) / std::abs(g(StabilityMatrix::identity()))};
    }
    return track_log(s.start, s.t, sys, opts.integrator, g);
}

Contribution saddle_contribution_wavefunction(const Saddle& s, const WavePacketParams& wp,
                                              const SystemParams& sys, const ContributionOptions& opts) {
    const auto lg = saddle_log_jacobian(s, wp, sys, opts);
    Contribution c;
    c.branch_from_time = !s.log_jacobian;
    c.exponent = initial_exponent({s.u0}, wp) + 1i * s.traj.action / wp.hbar;
    c.prefactor = std::exp(-0.5 * lg.value);
    c.value = c.prefactor * std::exp(c.exponent);
    c.caustic_on_path = lg.min_modulus < opts.caustic_tol;
    return c;
}

Contribution saddle_contribution_overlap(const Saddle& s, const WavePacketParams& wp,
                                         const SystemParams& sys, const ContributionOptions& opts) {
    const Target& target = s.target;
    const auto lg = saddle_log_jacobian(s, wp, sys, opts);
    Contribution c;
    c.branch_from_time = !s.log_jacobian;
    c.exponent = initial_exponent({s.u0}, wp) + 1i * s.traj.action / wp.hbar +
                 bra_exponent(s.traj.final.q, target.bra);
    c.prefactor = std::sqrt(2.0 * std::numbers::pi * wp.hbar) * std::exp(-0.5 * lg.value);
    c.value = c.prefactor * std::exp(c.exponent);
    c.caustic_on_path = lg.min_modulus < opts.caustic_tol;
    return c;
}

std::vector<AssembledPoint> assemble_wavefunction(const std::vector<double>& x,
                                                  const std::vector<std::vector<Contribution>>& contributions,
                                                  const std::vector<std::vector<bool>>& excluded,
                                                  double relevance) {
    if (contributions.size() != x.size() || excluded.size() != x.size()) {
        throw std::invalid_argument("per-x tables must match the x grid");
    }
    std::vector<AssembledPoint> out(x.size());
    double running = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& cs = contributions[i];
        if (excluded[i].size() != cs.size()) throw std::invalid_argument("exclusion flags do not match saddles");
        out[i].x = x[i];
        out[i].parts.assign(cs.size(), 0.0);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            if (excluded[i][k]) continue;
            running = std::max(running, std::abs(cs[k].value));
        }
        for (std::size_t k = 0; k < cs.size(); ++k) {
            if (excluded[i][k] || std::abs(cs[k].value) < relevance * running) continue;
            out[i].parts[k] = cs[k].value;
            out[i].psi += cs[k].value;
        }
    }
    return out;
}

cplx EvolvedGaussian::eval(double x) const {
    const double dq = x - q_c;
    return std::exp(phase_norm - width_t * dq * dq / (2.0 * hbar) + 1i * p_c * dq / hbar);
}

WavePacketParams EvolvedGaussian::as_packet() const { return {q_c, p_c, width_t, hbar}; }

EvolvedGaussian lwpd_propagate(const WavePacketParams& wp, double t, const SystemParams& sys,
                               const IntegratorOptions& opts) {
    wp.validate();
    const cplx b = wp.width;
    const ComplexPhasePoint start{wp.q_center, wp.p_center};
    const auto traj = propagate(start, t, sys, opts);
    if (!traj.ok()) throw BranchError("central trajectory is singular");
    const auto lg = track_log(start, t, sys, opts, [b](const StabilityMatrix& m) { return m.m22 + 1i * b * m.m21; });
    const auto& m = traj.stability;
    EvolvedGaussian g;
    g.q_c = traj.final.q.real();
    g.p_c = traj.final.p.real();
    g.width_t = (b * m.m11 - 1i * m.m12) / (m.m22 + 1i * b * m.m21);
    g.phase_norm = log_normalization(wp) + 1i * traj.action / wp.hbar +
                   1i * wp.p_center * wp.q_center / (2.0 * wp.hbar) - 0.5 * lg.value;
    g.hbar = wp.hbar;
    return g;
}

double lwpd_validity_overlap(const WavePacketParams& wp, double t, const SystemParams& sys,
                             std::size_t n_samples, std::uint64_t seed, const IntegratorOptions& opts,
                             unsigned threads) {
    if (n_samples == 0) throw std::invalid_argument("need at least one sample");
    const double c = wp.width.real();
    const double d = wp.width.imag();
    const double h = wp.hbar;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<std::pair<double, double>> z0(n_samples);
    for (auto& z : z0) {
        const double dq = normal(rng) * std::sqrt(h / (2.0 * c));
        const double dp = normal(rng) * std::sqrt(c * h / 2.0) - d * dq;
        z = {wp.q_center + dq, wp.p_center + dp};
    }
    const auto w0 = wigner_matrix(wp);
    const auto wt = wigner_matrix(lwpd_propagate(wp, t, sys, opts).as_packet());
    std::vector<double> at_t(n_samples);
    std::vector<double> at_0(n_samples);
    parallel_for(n_samples, threads, [&](std::size_t i) {
        const auto [q, p] = z0[i];
        at_0[i] = wigner_eval(p, q, w0);
        const auto tr = propagate({q, p}, t, sys, opts);
        at_t[i] = tr.ok() ? wigner_eval(tr.final.p.real(), tr.final.q.real(), wt) : 0.0;
    });
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        num += at_t[i];
        den += at_0[i];
    }
    return num / den;
}

OffCenterPoint offcenter_point(const std::vector<Foliation>& foliations, const EvolvedContour& contour,
                               double x, const WavePacketParams& wp, double merge_radius) {
    OffCenterPoint out;
    out.x = x;
    const cplx b = wp.width;
    const double h = wp.hbar;
    const auto target = Target::wavefunction(x);
    for (const auto& fol : foliations) {
        const auto ref = select_reference(fol, contour, x);
        if (!ref) continue;
        const auto& tr = ref->traj;
        const cplx seed = linear_seed(tr, target, wp);
        const bool dup = std::any_of(out.terms.begin(), out.terms.end(),
                                     [&](const OffCenterTerm& o) { return std::abs(o.seed_u - seed) < merge_radius; });
        if (dup) continue;
        const auto& m = tr.stability;
        const cplx dmat = m.m22 + 1i * b * m.m21;
        if (m.m21 != 0.0 && (1i * dmat / (h * m.m21)).real() >= 0.0) {
            out.skipped.push_back(fol.label);
            continue;
        }
        const cplx q_r = tr.start.q;
        const cplx p_r = tr.start.p;
        const auto lg = track_log(tr.start, contour.t, contour.sys, contour.opts,
                                  [b](const StabilityMatrix& mm) { return mm.m22 + 1i * b * mm.m21; });
        const cplx f0 = 1i * tr.action / h + initial_exponent({q_r}, wp);
        const cplx f1 = -(b * (q_r - wp.q_center) + 1i * (p_r - wp.p_center)) / h;
        const cplx value = std::exp(-0.5 * lg.value + f0 + 1i * f1 * f1 * h * m.m21 / (2.0 * dmat));
        out.terms.push_back({fol.label, value, seed});
        out.psi += value;
    }
    return out;
}

std::vector<OffCenterPoint> offcenter_sum(const std::vector<Foliation>& foliations,
                                          const EvolvedContour& contour, const std::vector<double>& x,
                                          const WavePacketParams& wp, double merge_radius, unsigned threads) {
    std::vector<OffCenterPoint> out(x.size());
    parallel_for(x.size(), threads,
                 [&](std::size_t i) { out[i] = offcenter_point(foliations, contour, x[i], wp, merge_radius); });
    return out;
}

OverlapResult overlap_semiclassical(const WavePacketParams& bra, const std::vector<Foliation>& foliations,
                                    const EvolvedContour& contour, const WavePacketParams& wp,
                                    const NewtonOptions& nopts, const ContributionOptions& copts,
                                    unsigned threads) {
    bra.validate();
    const auto target = Target::overlap(bra);
    auto search = find_exposed_saddles(foliations, contour, target, wp, contour.opts, nopts, threads);
    OverlapResult out;
    out.failures = std::move(search.failures);
    out.saddles = std::move(search.saddles);
    out.contributions.resize(out.saddles.size());
    parallel_for(out.saddles.size(), threads, [&](std::size_t i) {
        out.contributions[i] = saddle_contribution_overlap(out.saddles[i], wp, contour.sys, copts);
    });
    for (const auto& c : out.contributions) out.amplitude += c.value;
    return out;
}

}  // namespace ggwpd

