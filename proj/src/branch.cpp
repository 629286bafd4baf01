#include "ggwpd/branch.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ggwpd {

namespace {

constexpr int max_refine_depth = 30;

struct LogAccumulator {
    const std::function<cplx(const StabilityMatrix&)>& g;
    double max_jump;
    cplx g_prev;
    double arg = 0.0;
    double g0_abs = 0.0;
    double min_mod = 1.0;

    void step(cplx g_next) {
        arg += std::arg(g_next / g_prev);
        g_prev = g_next;
        min_mod = std::min(min_mod, std::abs(g_next) / g0_abs);
    }
};

void walk(const std::vector<TrajectorySample>& samples, const SystemParams& sys,
          const IntegratorOptions& opts, LogAccumulator& acc, int depth) {
    for (std::size_t k = 1; k < samples.size(); ++k) {
        const cplx g_next = acc.g(samples[k].stability);
        if (std::abs(std::arg(g_next / acc.g_prev)) <= acc.max_jump) {
            acc.step(g_next);
            continue;
        }
        const double t0 = samples[k - 1].t;
        const double t1 = samples[k].t;
        if (depth >= max_refine_depth || t1 - t0 < 1e-14 * std::max(1.0, t1)) {
            std::ostringstream msg;
            msg << "prefactor branch unresolved near t = " << t0 << " (|g| = " << std::abs(g_next) << ")";
            throw BranchError(msg.str());
        }
        IntegratorOptions fine = opts;
        fine.record_samples = true;
        fine.max_step = (t1 - t0) / 8.0;
        const auto sub = propagate_from_sample(samples[k - 1], t1, sys, fine);
        if (!sub.ok()) throw BranchError("trajectory became singular while refining the prefactor branch");
        walk(sub.samples, sys, opts, acc, depth + 1);
    }
}

}  // namespace

TrackedLog track_log(const ComplexPhasePoint& start, double t, const SystemParams& sys,
                     const IntegratorOptions& opts,
                     const std::function<cplx(const StabilityMatrix&)>& g, double max_jump) {
    IntegratorOptions rec = opts;
    rec.record_samples = true;
    const auto traj = propagate(start, t, sys, rec);
    if (!traj.ok()) throw BranchError("trajectory is singular");
    const cplx g0 = g(StabilityMatrix::identity());
    if (g0 == 0.0) throw BranchError("tracked quantity vanishes at t = 0");
    LogAccumulator acc{g, max_jump, g0, std::arg(g0), std::abs(g0), 1.0};
    walk(traj.samples, sys, opts, acc, 0);
    TrackedLog out;
    out.value = cplx{std::log(std::abs(acc.g_prev)), acc.arg};
    out.min_modulus = acc.min_mod;
    return out;
}

TrackedLog track_log_homotopy(const ComplexPhasePoint& from, cplx from_log, const ComplexPhasePoint& to,
                              double t, const SystemParams& sys, const IntegratorOptions& opts,
                              const std::function<cplx(const StabilityMatrix&)>& g, double max_jump) {
    IntegratorOptions plain = opts;
    plain.record_samples = false;
    cplx g_prev = std::exp(from_log);
    double arg = from_log.imag();
    double s = 0.0;
    double h = 0.125;
    const double g0 = std::abs(g_prev);
    double min_mod = 1.0;
    while (s < 1.0) {
        const double s_next = std::min(1.0, s + h);
        const ComplexPhasePoint z{from.q + s_next * (to.q - from.q), from.p + s_next * (to.p - from.p)};
        const auto tr = propagate(z, t, sys, plain);
        cplx g_next = 0.0;
        const bool ok = tr.ok() && (g_next = g(tr.stability)) != 0.0;
        if (!ok || std::abs(std::arg(g_next / g_prev)) > max_jump) {
            h *= 0.5;
            if (h < 1e-12) throw BranchError(ok ? "branch unresolved along the initial-condition path"
                                                 : "singular trajectory on the initial-condition path");
            continue;
        }
        arg += std::arg(g_next / g_prev);
        g_prev = g_next;
        min_mod = std::min(min_mod, std::abs(g_next) / g0);
        s = s_next;
        h = std::min(0.25, 2.0 * h);
    }
    return {cplx{std::log(std::abs(g_prev)), arg}, min_mod};
}

TrackedLog track_log_path(const std::vector<ComplexPhasePoint>& path, cplx from_log, double t,
                          const SystemParams& sys, const IntegratorOptions& opts,
                          const std::function<cplx(const StabilityMatrix&)>& g, double max_jump) {
    if (path.size() < 2) throw std::invalid_argument("a branch path needs two points");
    TrackedLog acc{from_log, 1.0};
    for (std::size_t k = 1; k < path.size(); ++k) {
        const auto seg = track_log_homotopy(path[k - 1], acc.value, path[k], t, sys, opts, g, max_jump);
        acc.value = seg.value;
        acc.min_modulus = std::min(acc.min_modulus, seg.min_modulus);
    }
    return acc;
}

}  // namespace ggwpd
