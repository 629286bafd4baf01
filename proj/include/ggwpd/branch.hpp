#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "ggwpd/dynamics.hpp"

namespace ggwpd {

/// Continuous logarithm of a quantity g evaluated along a trajectory, starting
/// from the principal log at t = 0. Sample intervals over which arg g moves by
/// more than max_jump are refined by re-integration.
struct TrackedLog {
    cplx value;
    /// min |g| seen along the path relative to |g(0)|.
    double min_modulus = 0.0;
};

class BranchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

TrackedLog track_log(const ComplexPhasePoint& start, double t, const SystemParams& sys,
                     const IntegratorOptions& opts,
                     const std::function<cplx(const StabilityMatrix&)>& g, double max_jump = 0.5);

/// Continues log g at fixed final time t along the straight path of initial
/// conditions from `from` (where the log equals from_log) to `to`.
TrackedLog track_log_homotopy(const ComplexPhasePoint& from, cplx from_log, const ComplexPhasePoint& to,
                              double t, const SystemParams& sys, const IntegratorOptions& opts,
                              const std::function<cplx(const StabilityMatrix&)>& g, double max_jump = 0.5);

/// Piecewise homotopy through the given initial conditions (at least two).
TrackedLog track_log_path(const std::vector<ComplexPhasePoint>& path, cplx from_log, double t,
                          const SystemParams& sys, const IntegratorOptions& opts,
                          const std::function<cplx(const StabilityMatrix&)>& g, double max_jump = 0.5);

}  // namespace ggwpd
