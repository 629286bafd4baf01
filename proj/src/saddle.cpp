#include "ggwpd/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ggwpd/branch.hpp"
#include "ggwpd/parallel.hpp"

namespace ggwpd {

using namespace std::complex_literals;

Target Target::wavefunction(double x) {
    Target t;
    t.kind = Kind::wavefunction;
    t.a_p = 0.0;
    t.a_q = 1.0;
    t.c = -x;
    t.x = x;
    return t;
}

Target Target::overlap(const WavePacketParams& bra) {
    Target t;
    t.kind = Kind::overlap;
    t.a_p = -1i;
    t.a_q = std::conj(bra.width);
    t.c = -std::conj(bra.width) * bra.q_center + 1i * bra.p_center;
    t.bra = bra;
    return t;
}

cplx Target::derivative(const StabilityMatrix& m, cplx width) const {
    const cplx dq = m.m22 + 1i * width * m.m21;
    const cplx dp = m.m12 + 1i * width * m.m11;
    return a_p * dp + a_q * dq;
}

BvpResidual bvp_residual(cplx u, const Target& target, double t, const WavePacketParams& wp,
                         const SystemParams& sys, const IntegratorOptions& opts) {
    BvpResidual r;
    r.traj = propagate(manifold_lift({u}, wp), t, sys, opts);
    if (r.ok()) {
        r.f = target(r.traj.final);
        r.df = target.derivative(r.traj.stability, wp.width);
    }
    return r;
}

BvpResidual bvp_residual_wavefunction(cplx u, double x, double t, const WavePacketParams& wp,
                                      const SystemParams& sys, const IntegratorOptions& opts) {
    return bvp_residual(u, Target::wavefunction(x), t, wp, sys, opts);
}

BvpResidual bvp_residual_overlap(cplx u, const WavePacketParams& bra, double t,
                                 const WavePacketParams& wp, const SystemParams& sys,
                                 const IntegratorOptions& opts) {
    return bvp_residual(u, Target::overlap(bra), t, wp, sys, opts);
}

void NewtonOptions::validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("newton tolerance must be positive");
    if (max_iter < 1) throw std::invalid_argument("newton needs at least one iteration");
    if (step_clip < 0.0) throw std::invalid_argument("step clip must be non-negative");
    if (!(dedup_radius > 0.0)) throw std::invalid_argument("dedup radius must be positive");
}

double NewtonOptions::clip_for(const WavePacketParams& wp) const {
    return step_clip > 0.0 ? step_clip : 0.5 * std::sqrt(wp.hbar / (2.0 * wp.width.real()));
}

NewtonReport newton_search(cplx seed, const Target& target, double t, const WavePacketParams& wp,
                           const SystemParams& sys, const IntegratorOptions& iopts,
                           const NewtonOptions& nopts) {
    NewtonReport rep;
    rep.u = seed;
    rep.trace.push_back(seed);
    rep.last = bvp_residual(seed, target, t, wp, sys, iopts);
    if (!rep.last.ok()) {
        rep.reason = "seed trajectory is singular";
        return rep;
    }
    const double clip = nopts.clip_for(wp);
    // Integration error puts a floor under |F|; accept a stalled iterate
    // sitting within a small multiple of the tolerance.
    const double stall_tol = 100.0 * nopts.tol;
    for (int it = 0; it <= nopts.max_iter; ++it) {
        const double res = std::abs(rep.last.f);
        if (res < nopts.tol) {
            rep.converged = true;
            return rep;
        }
        if (it == nopts.max_iter) break;
        if (rep.last.df == 0.0) {
            rep.reason = "vanishing Jacobian";
            return rep;
        }
        cplx du = -rep.last.f / rep.last.df;
        if (std::abs(du) > clip) du *= clip / std::abs(du);
        if (std::abs(du) < 1e-14 * std::max(1.0, std::abs(rep.u)) && res < stall_tol) {
            rep.converged = true;
            return rep;
        }
        BvpResidual trial;
        bool accepted = false;
        for (int bt = 0; bt <= nopts.max_backtracks; ++bt) {
            trial = bvp_residual(rep.u + du, target, t, wp, sys, iopts);
            if (trial.ok()) {
                accepted = true;
                break;
            }
            du *= 0.5;
        }
        if (!accepted) {
            rep.reason = "singular trajectories block every backtracked step";
            return rep;
        }
        if (std::abs(trial.f) >= res && res < stall_tol) {
            rep.converged = true;
            return rep;
        }
        rep.u += du;
        rep.last = std::move(trial);
        rep.iterations = it + 1;
        rep.trace.push_back(rep.u);
    }
    rep.reason = "maximum iterations exceeded";
    return rep;
}

Saddle make_saddle(const NewtonReport& rep, const Target& target, double t, const WavePacketParams& wp) {
    Saddle s;
    s.u0 = rep.u;
    s.start = manifold_lift({rep.u}, wp);
    s.traj = rep.last.traj;
    s.target = target;
    s.t = t;
    s.df = rep.last.df;
    return s;
}

cplx linear_seed(const TrajectoryResult& reference, const Target& target, const WavePacketParams& wp) {
    const auto& m = reference.stability;
    const cplx q_r = reference.start.q;
    const cplx p_r = reference.start.p;
    const cplx b = wp.width;
    const cplx f_r = target(reference.final);
    const cplx c_p = target.a_p * m.m11 + target.a_q * m.m21;
    const cplx c_q = target.a_p * m.m12 + target.a_q * m.m22;
    // momentum offset of the manifold point above q_r from the reference momentum
    const cplx kappa = 1i * b * (q_r - wp.q_center) - (p_r - wp.p_center);
    return q_r - (f_r + c_p * kappa) / (1i * b * c_p + c_q);
}

namespace {

double sq(double v) { return v * v; }

// Candidate real references of a foliation for a target, best first.
std::vector<ContourState> candidate_references(const Foliation& fol, const EvolvedContour& contour,
                                               const Target& target) {
    std::vector<ContourState> out;
    if (target.kind == Target::Kind::wavefunction) {
        for (const auto& br : fol.branches) {
            if (auto r = select_reference(br, contour, target.x)) out.push_back(*r);
        }
        if (out.empty()) return out;
        // quarter-interval retry seeds on each covering branch
        std::vector<ContourState> shifted;
        for (const auto& br : fol.branches) {
            if (!br.covers(target.x)) continue;
            for (const auto& r : out) {
                const double th = r.initial.theta;
                if (th < br.theta_begin || th > br.theta_end) continue;
                const double mid = 0.5 * (br.theta_begin + br.theta_end);
                const double step = 0.25 * br.theta_extent();
                shifted.push_back(contour.evaluate(th < mid ? th + step : th - step));
            }
        }
        out.insert(out.end(), shifted.begin(), shifted.end());
        return out;
    }
    // Overlap targets: the contour point of each branch whose real final
    // point has the smallest bra-manifold residual.
    for (const auto& br : fol.branches) {
        const int n = 64;
        double best = std::numeric_limits<double>::infinity();
        double best_s = 0.5;
        for (int k = 0; k <= n; ++k) {
            const double s = static_cast<double>(k) / n;
            const auto st = branch_point(br, contour, s);
            const double r = std::abs(target(st.traj.final));
            if (r < best) {
                best = r;
                best_s = s;
            }
        }
        // golden-section polish on the bracketing cells
        double lo = std::max(0.0, best_s - 1.0 / n);
        double hi = std::min(1.0, best_s + 1.0 / n);
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        auto cost = [&](double s) { return std::abs(target(branch_point(br, contour, s).traj.final)); };
        double x1 = hi - g * (hi - lo);
        double x2 = lo + g * (hi - lo);
        double f1 = cost(x1);
        double f2 = cost(x2);
        for (int it = 0; it < 40; ++it) {
            if (f1 < f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = cost(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = cost(x2);
            }
        }
        out.push_back(branch_point(br, contour, 0.5 * (lo + hi)));
    }
    std::sort(out.begin(), out.end(), [&](const ContourState& a, const ContourState& b) {
        return sq(std::abs(target(a.traj.final))) < sq(std::abs(target(b.traj.final)));
    });
    return out;
}

}  // namespace

ExposedSearch find_exposed_saddles(const std::vector<Foliation>& foliations,
                                   const EvolvedContour& contour, const Target& target,
                                   const WavePacketParams& wp, const IntegratorOptions& iopts,
                                   const NewtonOptions& nopts, unsigned threads) {
    struct Slot {
        std::optional<Saddle> saddle;
        std::optional<SeedFailure> failure;
    };
    std::vector<Slot> slots(foliations.size());
    parallel_for(foliations.size(), threads, [&](std::size_t i) {
        const auto& fol = foliations[i];
        const auto refs = candidate_references(fol, contour, target);
        if (refs.empty()) return;
        std::string last_reason;
        for (const auto& ref : refs) {
            const cplx seed = linear_seed(ref.traj, target, wp);
            auto rep = newton_search(seed, target, contour.t, wp, contour.sys, iopts, nopts);
            if (rep.converged) {
                Saddle s = make_saddle(rep, target, contour.t, wp);
                s.exposure = Exposure::exposed;
                s.foliation_label = fol.label;
                s.log_jacobian = reference_log_jacobian(ref, s, rep.trace, wp, contour.sys, iopts);
                slots[i].saddle = std::move(s);
                return;
            }
            last_reason = rep.reason;
        }
        slots[i].failure = SeedFailure{fol.label, last_reason};
    });

    ExposedSearch out;
    std::vector<Saddle> found;
    for (auto& s : slots) {
        if (s.saddle) found.push_back(std::move(*s.saddle));
        if (s.failure) out.failures.push_back(*s.failure);
    }
    out.saddles = dedup_saddles(std::move(found), nopts.dedup_radius);
    return out;
}

bool reaches(const ContourState& reference, cplx u0, const Target& target, double t,
             const WavePacketParams& wp, const SystemParams& sys, const IntegratorOptions& iopts,
             const NewtonOptions& nopts) {
    const cplx seed = linear_seed(reference.traj, target, wp);
    const auto rep = newton_search(seed, target, t, wp, sys, iopts, nopts);
    return rep.converged && std::abs(rep.u - u0) < nopts.dedup_radius;
}

double shadowing_check(const Saddle& s, const TrajectoryResult& reference) {
    const auto& m = reference.stability;
    const cplx dp0 = s.start.p - reference.start.p;
    const cplx dq0 = s.start.q - reference.start.q;
    const cplx pred_p = m.m11 * dp0 + m.m12 * dq0;
    const cplx pred_q = m.m21 * dp0 + m.m22 * dq0;
    const cplx act_p = s.traj.final.p - reference.final.p;
    const cplx act_q = s.traj.final.q - reference.final.q;
    const double denom = std::sqrt(std::norm(act_p) + std::norm(act_q));
    if (denom == 0.0) return 0.0;
    return std::sqrt(std::norm(pred_p - act_p) + std::norm(pred_q - act_q)) / denom;
}

std::optional<cplx> reference_log_jacobian(const ContourState& reference, const Saddle& s,
                                           const std::vector<cplx>& newton_trace, const WavePacketParams& wp,
                                           const SystemParams& sys, const IntegratorOptions& iopts) {
    const Target target = s.target;
    const cplx b = wp.width;
    auto g = [&target, b](const StabilityMatrix& m) { return target.derivative(m, b); };
    try {
        const cplx anchor = track_log(reference.traj.start, s.t, sys, iopts, g).value;
        try {
            return track_log_homotopy(reference.traj.start, anchor, s.start, s.t, sys, iopts, g).value;
        } catch (const BranchError&) {
            std::vector<ComplexPhasePoint> path{reference.traj.start};
            for (const cplx& u : newton_trace) path.push_back(manifold_lift({u}, wp));
            path.push_back(s.start);
            return track_log_path(path, anchor, s.t, sys, iopts, g).value;
        }
    } catch (const BranchError&) {
        return std::nullopt;
    }
}

std::vector<Saddle> dedup_saddles(std::vector<Saddle> saddles, double radius) {
    std::vector<Saddle> out;
    for (auto& s : saddles) {
        const bool dup = std::any_of(out.begin(), out.end(),
                                     [&](const Saddle& o) { return std::abs(o.u0 - s.u0) < radius; });
        if (!dup) out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ggwpd
