#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ggwpd/branch.hpp"
#include "ggwpd/dynamics.hpp"
#include "ggwpd/saddle.hpp"
#include "ggwpd/wave_packet.hpp"
#include "ggwpd/wigner.hpp"

namespace ggwpd {

struct Contribution {
    /// Total exponent: initial-state exponent at the complex start + i S / h
    /// (+ bra exponent for overlaps).
    cplx exponent;
    /// Branch-tracked prefactor.
    cplx prefactor;
    cplx value;
    /// The prefactor denominator came within caustic_tol of zero along the path.
    bool caustic_on_path = false;
    /// The prefactor branch came from time tracking along the saddle
    /// trajectory rather than from the saddle's continued log-Jacobian.
    bool branch_from_time = false;

    /// Complex action W with exponent = i W / h up to the constant normalization.
    cplx action(double hbar) const { return cplx{0.0, -hbar} * exponent; }
};

struct ContributionOptions {
    IntegratorOptions integrator{};
    double caustic_tol = 1e-6;
    /// Ignore stored log-Jacobians and track the branch in time along the
    /// saddle trajectory.
    bool time_branch = false;
};

/// Continuous log of the target derivative for a saddle: its stored
/// continuation when present, else time tracking.
TrackedLog saddle_log_jacobian(const Saddle& s, const WavePacketParams& wp, const SystemParams& sys,
                               const ContributionOptions& opts = {});

/// psi contribution D^(-1/2) exp[log phi(u0) + i S / h], D = M22 + i b M21.
Contribution saddle_contribution_wavefunction(const Saddle& s, const WavePacketParams& wp,
                                              const SystemParams& sys,
                                              const ContributionOptions& opts = {});

/// Overlap contribution exp(Phi) sqrt(2 pi h / F'), F' the overlap-target derivative.
Contribution saddle_contribution_overlap(const Saddle& s, const WavePacketParams& wp,
                                         const SystemParams& sys, const ContributionOptions& opts = {});

struct AssembledPoint {
    double x = 0.0;
    cplx psi{0.0};
    /// Per-saddle values in input order (zero for dropped or excluded saddles).
    std::vector<cplx> parts;
};

/// Sums non-excluded contributions per x. Contributions below
/// relevance * (running maximum of |contribution|) are dropped.
std::vector<AssembledPoint> assemble_wavefunction(const std::vector<double>& x,
                                                  const std::vector<std::vector<Contribution>>& contributions,
                                                  const std::vector<std::vector<bool>>& excluded,
                                                  double relevance = 1e-12);

/// Linearized (thawed Gaussian) propagation about the central trajectory.
struct EvolvedGaussian {
    double q_c = 0.0;
    double p_c = 0.0;
    cplx width_t;
    /// Exponent constant: normalization + i S_c / h + i p_a q_a / 2h - log(D) / 2.
    cplx phase_norm;
    double hbar = 1.0;

    cplx eval(double x) const;
    /// Packet with the same center and width (phase ignored).
    WavePacketParams as_packet() const;
};

EvolvedGaussian lwpd_propagate(const WavePacketParams& wp, double t, const SystemParams& sys,
                               const IntegratorOptions& opts = {});

/// Overlap of the classically transported initial Wigner density with the LWPD
/// Wigner density, normalized by the same estimator at t = 0. Monte Carlo with
/// n_samples draws from the initial density.
double lwpd_validity_overlap(const WavePacketParams& wp, double t, const SystemParams& sys,
                             std::size_t n_samples, std::uint64_t seed,
                             const IntegratorOptions& opts = {}, unsigned threads = 0);

struct OffCenterTerm {
    int foliation_label = 0;
    cplx value;
    cplx seed_u;
};

struct OffCenterPoint {
    double x = 0.0;
    cplx psi{0.0};
    std::vector<OffCenterTerm> terms;
    /// Labels skipped because the local quadratic form was not decaying.
    std::vector<int> skipped;
};

/// Real-trajectory off-center sum at x: per covering foliation, the second
/// order expansion of the exponent about the reference integrated in closed
/// form. References predicting the same saddle (within merge_radius of their
/// linear seeds) are counted once.
OffCenterPoint offcenter_point(const std::vector<Foliation>& foliations, const EvolvedContour& contour,
                               double x, const WavePacketParams& wp, double merge_radius = 1e-4);

std::vector<OffCenterPoint> offcenter_sum(const std::vector<Foliation>& foliations,
                                          const EvolvedContour& contour, const std::vector<double>& x,
                                          const WavePacketParams& wp, double merge_radius = 1e-4,
                                          unsigned threads = 0);

struct OverlapResult {
    cplx amplitude{0.0};
    std::vector<Saddle> saddles;
    std::vector<Contribution> contributions;
    std::vector<SeedFailure> failures;
};

/// <phi_bra | phi_ket(t)> summed over the exposed overlap saddles.
OverlapResult overlap_semiclassical(const WavePacketParams& bra, const std::vector<Foliation>& foliations,
                                    const EvolvedContour& contour, const WavePacketParams& wp,
                                    const NewtonOptions& nopts = {}, const ContributionOptions& copts = {},
                                    unsigned threads = 0);

}  // namespace ggwpd

