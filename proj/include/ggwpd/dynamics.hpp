#pragma once

#include <vector>

#include "ggwpd/wave_packet.hpp"

namespace ggwpd {

enum class Potential { quartic, harmonic };

/// H = p^2/2m + lambda q^4, or p^2/2m + m omega^2 q^2/2 for the harmonic oracle.
struct SystemParams {
    Potential potential = Potential::quartic;
    double lambda = 0.05;
    double mass = 1.0;
    double hbar = 1.0;
    double omega = 1.0;

    void validate() const;

    static SystemParams harmonic(double omega = 1.0, double mass = 1.0, double hbar = 1.0) {
        return {Potential::harmonic, 0.0, mass, hbar, omega};
    }
};

cplx potential(cplx q, const SystemParams& sys);
cplx potential_gradient(cplx q, const SystemParams& sys);
cplx potential_curvature(cplx q, const SystemParams& sys);

cplx hamiltonian(const ComplexPhasePoint& pt, const SystemParams& sys);

/// Tangent map acting on (dp, dq):
///   dp_t = m11 dp_0 + m12 dq_0
///   dq_t = m21 dp_0 + m22 dq_0
struct StabilityMatrix {
    cplx m11{1.0}, m12{0.0}, m21{0.0}, m22{1.0};

    cplx det() const { return m11 * m22 - m12 * m21; }
    static StabilityMatrix identity() { return {}; }
};

struct IntegratorOptions {
    double rel_tol = 1e-12;
    double abs_tol = 1e-12;
    /// 0 means unbounded.
    double max_step = 0.0;
    double blowup_threshold = 1e8;
    /// Near a pole of the quartic flow (|q| above this many turning-point
    /// scales (|E|/lambda)^(1/4)) the integration leaves the real time axis
    /// and passes the pole on the far side; the final state is unchanged
    /// (the flow is meromorphic in t) but roundoff stays bounded. Trajectories
    /// whose predicted peak |q| exceeds blowup_threshold are marked singular
    /// instead. 0 disables, otherwise at least 2. Never used when recording
    /// samples.
    double detour_factor = 4.0;
    /// Keep the state at every accepted step.
    bool record_samples = false;

    void validate() const;
};

enum class TrajectoryStatus { ok, singular };

struct TrajectorySample {
    double t = 0.0;
    ComplexPhasePoint point;
    StabilityMatrix stability;
    cplx action;
};

struct TrajectoryResult {
    ComplexPhasePoint start;
    ComplexPhasePoint final;
    StabilityMatrix stability;
    /// Hamilton principal function  S = int (p qdot - H) dt.
    cplx action;
    TrajectoryStatus status = TrajectoryStatus::ok;
    /// Time of threshold crossing or step collapse, for singular trajectories.
    double blowup_time = 0.0;
    double t_final = 0.0;
    std::vector<TrajectorySample> samples;

    bool ok() const { return status == TrajectoryStatus::ok; }
};

/// Integrates the complexified Hamilton equations with the tangent map and the
/// action. Throws std::invalid_argument for t < 0.
TrajectoryResult propagate(const ComplexPhasePoint& start, double t, const SystemParams& sys,
                           const IntegratorOptions& opts = {});

/// Restarts from a recorded sample and integrates to t_end, again recording.
TrajectoryResult propagate_from_sample(const TrajectorySample& from, double t_end,
                                       const SystemParams& sys, const IntegratorOptions& opts);

/// Period of the real orbit through (q, p). Closed form for both potentials.
double orbit_period(double q, double p, const SystemParams& sys);

/// Period of the centroid orbit of a wave packet.
double central_period(const WavePacketParams& wp, const SystemParams& sys);

struct ScaledSample {
    double t;
    cplx q;
    cplx p;
    cplx action;
};

/// Homogeneity replica of a recorded quartic trajectory on the energy surface
/// E = gamma^4 E0:  q(t/gamma) = gamma q0(t),  p(t/gamma) = gamma^2 p0(t),
/// S -> gamma^3 S. The reference must carry samples.
std::vector<ScaledSample> scale_trajectory(const TrajectoryResult& ref, double gamma);

}  // namespace ggwpd
