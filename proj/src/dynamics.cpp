#include "ggwpd/dynamics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

namespace ggwpd {

namespace odeint = boost::numeric::odeint;

void SystemParams::validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
    if (!(hbar > 0.0)) throw std::invalid_argument("hbar must be positive");
    if (potential == Potential::quartic && !(lambda > 0.0)) {
        throw std::invalid_argument("quartic coefficient must be positive");
    }
    if (potential == Potential::harmonic && !(omega > 0.0)) {
        throw std::invalid_argument("harmonic frequency must be positive");
    }
}

void IntegratorOptions::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
        throw std::invalid_argument("integrator tolerances must be positive");
    }
    if (max_step < 0.0) throw std::invalid_argument("max_step must be non-negative");
    if (!(blowup_threshold > 0.0)) throw std::invalid_argument("blowup_threshold must be positive");
    // Below ~2 turning-point scales the pole estimate is meaningless.
    if (detour_factor != 0.0 && !(detour_factor >= 2.0)) {
        throw std::invalid_argument("detour_factor must be 0 or at least 2");
    }
}

cplx potential(cplx q, const SystemParams& sys) {
    if (sys.potential == Potential::harmonic) {
        return 0.5 * sys.mass * sys.omega * sys.omega * q * q;
    }
    const cplx q2 = q * q;
    return sys.lambda * q2 * q2;
}

cplx potential_gradient(cplx q, const SystemParams& sys) {
    if (sys.potential == Potential::harmonic) {
        return sys.mass * sys.omega * sys.omega * q;
    }
    return 4.0 * sys.lambda * q * q * q;
}

cplx potential_curvature(cplx q, const SystemParams& sys) {
    if (sys.potential == Potential::harmonic) {
        return cplx{sys.mass * sys.omega * sys.omega};
    }
    return 12.0 * sys.lambda * q * q;
}

cplx hamiltonian(const ComplexPhasePoint& pt, const SystemParams& sys) {
    return pt.p * pt.p / (2.0 * sys.mass) + potential(pt.q, sys);
}

namespace {

// q, p, m11, m12, m21, m22, S as interleaved (re, im) pairs.
using State = std::array<double, 14>;

cplx get(const State& x, int k) { return {x[2 * k], x[2 * k + 1]}; }
void put(State& x, int k, cplx v) {
    x[2 * k] = v.real();
    x[2 * k + 1] = v.imag();
}

State pack(const ComplexPhasePoint& pt, const StabilityMatrix& m, cplx action) {
    State x{};
    put(x, 0, pt.q);
    put(x, 1, pt.p);
    put(x, 2, m.m11);
    put(x, 3, m.m12);
    put(x, 4, m.m21);
    put(x, 5, m.m22);
    put(x, 6, action);
    return x;
}

TrajectorySample unpack(const State& x, double t) {
    return {t, {get(x, 0), get(x, 1)}, {get(x, 2), get(x, 3), get(x, 4), get(x, 5)}, get(x, 6)};
}

// Derivative along a straight path in complex time, t = t0 + dir * s.
struct Flow {
    const SystemParams& sys;
    cplx dir{1.0};

    void operator()(const State& x, State& dxdt, double /*s*/) const {
        const cplx q = get(x, 0);
        const cplx p = get(x, 1);
        const double m = sys.mass;
        const cplx curv = potential_curvature(q, sys);
        put(dxdt, 0, p / m);
        put(dxdt, 1, -potential_gradient(q, sys));
        put(dxdt, 2, -curv * get(x, 4));
        put(dxdt, 3, -curv * get(x, 5));
        put(dxdt, 4, get(x, 2) / m);
        put(dxdt, 5, get(x, 3) / m);
        put(dxdt, 6, p * p / (2.0 * m) - potential(q, sys));
        if (dir != 1.0) {
            for (int k = 0; k < 7; ++k) put(dxdt, k, dir * get(dxdt, k));
        }
    }
};

bool finite_state(const State& x) {
    for (double v : x) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

using Stepper = decltype(odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(1.0, 1.0));

Stepper make_stepper(const IntegratorOptions& opts) {
    return odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(opts.abs_tol, opts.rel_tol);
}

// Adaptive walk of length `length` along direction `dir` in complex time.
// Returns false when the state blows up or the step size collapses.
bool walk(State& x, cplx dir, double length, const SystemParams& sys, const IntegratorOptions& opts) {
    auto stepper = make_stepper(opts);
    Flow flow{sys, dir};
    double s = 0.0;
    double ds = std::min(1e-3, length);
    while (s < length) {
        const double remaining = length - s;
        ds = std::min(ds, remaining);
        if (ds < 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, length)) return false;
        const State backup = x;
        const double s_before = s;
        if (stepper.try_step(flow, x, s, ds) == odeint::fail) {
            if (!finite_state(x)) x = backup;
            continue;
        }
        if (!finite_state(x)) {
            x = backup;
            s = s_before;
            ds *= 0.25;
            continue;
        }
        if (length - s < 1e-15 * std::max(1.0, length)) s = length;
        if (std::abs(get(x, 0)) > opts.blowup_threshold || std::abs(get(x, 1)) > opts.blowup_threshold) return false;
    }
    return true;
}

TrajectoryResult integrate(State x, double t0, double t_end, const SystemParams& sys,
                           const IntegratorOptions& opts) {
    TrajectoryResult res;
    const auto first = unpack(x, t0);
    res.start = first.point;
    if (opts.record_samples) res.samples.push_back(first);

    auto stepper = make_stepper(opts);
    Flow flow{sys};
    double t = t0;
    double dt = std::min(1e-3, t_end - t0);
    if (opts.max_step > 0.0) dt = std::min(dt, opts.max_step);

    auto mark_singular = [&](double when) {
        res.status = TrajectoryStatus::singular;
        res.blowup_time = when;
    };

    // |q| beyond which a pole is passed in complex time.
    double detour_radius = std::numeric_limits<double>::infinity();
    if (!opts.record_samples && opts.detour_factor > 0.0 && sys.potential == Potential::quartic) {
        const double e = std::abs(hamiltonian(first.point, sys));
        detour_radius = opts.detour_factor * std::max(std::pow(e / sys.lambda, 0.25), std::abs(first.point.q));
    }

    while (t < t_end && res.ok()) {
        const double remaining = t_end - t;
        if (dt > remaining) dt = remaining;
        if (opts.max_step > 0.0 && dt > opts.max_step) dt = opts.max_step;
        const double min_dt = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
        if (dt < min_dt && remaining > min_dt) {
            mark_singular(t);
            break;
        }
        const State backup = x;
        const double t_before = t;
        const auto r = stepper.try_step(flow, x, t, dt);
        if (r == odeint::fail) {
            if (!finite_state(x)) x = backup;
            continue;
        }
        if (!finite_state(x)) {
            x = backup;
            t = t_before;
            dt *= 0.25;
            continue;
        }
        // try_step may return exactly at the end time modulo rounding
        if (t_end - t < 1e-15 * std::max(1.0, t_end)) t = t_end;
        const cplx q = get(x, 0);
        const cplx p = get(x, 1);
        if (std::abs(q) > opts.blowup_threshold || std::abs(p) > opts.blowup_threshold) {
            mark_singular(t);
        } else if (std::abs(q) > detour_radius && t < t_end && p != 0.0) {
            // Near a pole q ~ a / (t - t*) with a = -m q^2 / p, so t* - t ~ m q / p.
            const cplx to_pole = sys.mass * q / p;
            const double peak = std::abs(sys.mass * q * q / p) / std::max(std::abs(to_pole.imag()), 1e-300);
            if (peak > opts.blowup_threshold) {
                mark_singular(t + to_pole.real());
            } else if (to_pole.real() > 0.25 * std::abs(to_pole)) {
                // Rectangle on the far side of the pole, at least |Re(t* - t)| from it.
                const double rho = to_pole.real();
                const double t_back = std::min(t + 2.0 * rho, t_end);
                const cplx down{0.0, to_pole.imag() > 0.0 ? -1.0 : 1.0};
                if (!walk(x, down, rho, sys, opts) || !walk(x, 1.0, t_back - t, sys, opts) ||
                    !walk(x, -down, rho, sys, opts)) {
                    mark_singular(t + rho);
                } else {
                    t = t_back;
                    dt = std::min(dt, rho);
                }
            }
        }
        if (opts.record_samples) res.samples.push_back(unpack(x, t));
    }

    const auto last = unpack(x, t);
    res.final = last.point;
    res.stability = last.stability;
    res.action = last.action;
    res.t_final = t;
    return res;
}

}  // namespace

TrajectoryResult propagate(const ComplexPhasePoint& start, double t, const SystemParams& sys,
                           const IntegratorOptions& opts) {
    if (t < 0.0) throw std::invalid_argument("propagation time must be non-negative");
    return integrate(pack(start, StabilityMatrix::identity(), 0.0), 0.0, t, sys, opts);
}

TrajectoryResult propagate_from_sample(const TrajectorySample& from, double t_end,
                                       const SystemParams& sys, const IntegratorOptions& opts) {
    if (t_end < from.t) throw std::invalid_argument("cannot integrate backwards from a sample");
    return integrate(pack(from.point, from.stability, from.action), from.t, t_end, sys, opts);
}

namespace {
// int_0^1 ds / sqrt(1 - s^4) = Gamma(1/4)^2 / (4 sqrt(2 pi))
double quartic_period_integral() {
    const double g = std::tgamma(0.25);
    return g * g / (4.0 * std::sqrt(2.0 * std::numbers::pi));
}
}  // namespace

double orbit_period(double q, double p, const SystemParams& sys) {
    if (sys.potential == Potential::harmonic) return 2.0 * std::numbers::pi / sys.omega;
    const double energy = hamiltonian({q, p}, sys).real();
    if (!(energy > 0.0)) throw std::invalid_argument("orbit period undefined at zero energy");
    const double q_max = std::pow(energy / sys.lambda, 0.25);
    const double v_max = std::sqrt(2.0 * energy / sys.mass);
    return 4.0 * q_max / v_max * quartic_period_integral();
}

double central_period(const WavePacketParams& wp, const SystemParams& sys) {
    return orbit_period(wp.q_center, wp.p_center, sys);
}

std::vector<ScaledSample> scale_trajectory(const TrajectoryResult& ref, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("scale factor must be positive");
    if (ref.samples.empty()) throw std::invalid_argument("reference trajectory carries no samples");
    std::vector<ScaledSample> out;
    out.reserve(ref.samples.size());
    const double g3 = gamma * gamma * gamma;
    for (const auto& s : ref.samples) {
        out.push_back({s.t / gamma, gamma * s.point.q, gamma * gamma * s.point.p, g3 * s.action});
    }
    return out;
}

}  // namespace ggwpd
