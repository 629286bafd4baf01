#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ggwpd/dynamics.hpp"
#include "ggwpd/wave_packet.hpp"
#include "ggwpd/wigner.hpp"

namespace ggwpd {

/// Final-time boundary condition, linear in the final phase point:
///   F = a_p p_t + a_q q_t + c.
struct Target {
    enum class Kind { wavefunction, overlap };

    Kind kind = Kind::wavefunction;
    cplx a_p{0.0};
    cplx a_q{1.0};
    cplx c{0.0};
    /// Position for wavefunction targets.
    double x = 0.0;
    /// Bra packet for overlap targets.
    WavePacketParams bra;

    /// q_t - x = 0
    static Target wavefunction(double x);
    /// b*(q_t - q_b) - i(p_t - p_b) = 0
    static Target overlap(const WavePacketParams& bra);

    cplx operator()(const ComplexPhasePoint& final) const { return a_p * final.p + a_q * final.q + c; }
    /// dF/du along the ket manifold, from the tangent map.
    cplx derivative(const StabilityMatrix& m, cplx width) const;
};

struct BvpResidual {
    cplx f{0.0};
    cplx df{1.0};
    TrajectoryResult traj;

    bool ok() const { return traj.ok(); }
};

/// Residual at the trajectory launched from manifold_lift(u).
BvpResidual bvp_residual(cplx u, const Target& target, double t, const WavePacketParams& wp,
                         const SystemParams& sys, const IntegratorOptions& opts);

BvpResidual bvp_residual_wavefunction(cplx u, double x, double t, const WavePacketParams& wp,
                                      const SystemParams& sys, const IntegratorOptions& opts);

BvpResidual bvp_residual_overlap(cplx u, const WavePacketParams& bra, double t,
                                 const WavePacketParams& wp, const SystemParams& sys,
                                 const IntegratorOptions& opts);

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 60;
    /// Largest |du| per iteration; 0 selects half the packet position width.
    double step_clip = 0.0;
    double dedup_radius = 1e-6;
    int max_backtracks = 8;

    void validate() const;
    double clip_for(const WavePacketParams& wp) const;
};

enum class Exposure { exposed, hidden };

struct Saddle {
    cplx u0;
    ComplexPhasePoint start;
    TrajectoryResult traj;
    Target target;
    double t = 0.0;
    cplx df{1.0};
    Exposure exposure = Exposure::exposed;
    std::optional<int> foliation_label;
    bool stokes_excluded = false;
    /// Continuous log of the target derivative at time t, continued through
    /// initial-condition space from a real reference trajectory. Empty when
    /// no continuation path was found.
    std::optional<cplx> log_jacobian;
};

struct NewtonReport {
    bool converged = false;
    cplx u;
    int iterations = 0;
    std::vector<cplx> trace;
    BvpResidual last;
    std::string reason;
};

/// Newton iteration u <- u - F/F' with clipped steps and halving backtracks
/// when a trial step lands on a singular trajectory.
NewtonReport newton_search(cplx seed, const Target& target, double t, const WavePacketParams& wp,
                           const SystemParams& sys, const IntegratorOptions& iopts,
                           const NewtonOptions& nopts);

Saddle make_saddle(const NewtonReport& rep, const Target& target, double t, const WavePacketParams& wp);

/// Manifold coordinate predicted by the tangent map of a real reference
/// trajectory: the first step of a Newton search in (q0, p0) started from the
/// real initial condition, projected onto the ket manifold.
cplx linear_seed(const TrajectoryResult& reference, const Target& target, const WavePacketParams& wp);

struct SeedFailure {
    int foliation_label = 0;
    std::string reason;
};

struct ExposedSearch {
    std::vector<Saddle> saddles;
    std::vector<SeedFailure> failures;
};

/// Seeds a Newton search from each covering foliation's reference at the
/// target position and keeps the distinct converged saddles (first label
/// wins on duplicates). Divergent seeds are retried from the other branch of
/// the foliation, then from a reference a quarter interval away.
ExposedSearch find_exposed_saddles(const std::vector<Foliation>& foliations,
                                   const EvolvedContour& contour, const Target& target,
                                   const WavePacketParams& wp, const IntegratorOptions& iopts,
                                   const NewtonOptions& nopts, unsigned threads = 0);

/// Whether a Newton search seeded from the given real reference converges to u0.
bool reaches(const ContourState& reference, cplx u0, const Target& target, double t,
             const WavePacketParams& wp, const SystemParams& sys, const IntegratorOptions& iopts,
             const NewtonOptions& nopts);

/// Relative error of the tangent-map prediction of the saddle's final point
/// from a real reference: |M dz0 - dz_t| / |dz_t| with dz the complex
/// deviation (p, q) from the reference.
double shadowing_check(const Saddle& s, const TrajectoryResult& reference);

/// log of target.derivative continued from the real reference (time-tracked
/// along its real trajectory) to the saddle's initial condition: first along
/// the straight path, else through the Newton iterates. Empty on failure.
std::optional<cplx> reference_log_jacobian(const ContourState& reference, const Saddle& s,
                                           const std::vector<cplx>& newton_trace, const WavePacketParams& wp,
                                           const SystemParams& sys, const IntegratorOptions& iopts);

/// Removes duplicates (|du| < radius), keeping first occurrences.
std::vector<Saddle> dedup_saddles(std::vector<Saddle> saddles, double radius);

}  // namespace ggwpd
