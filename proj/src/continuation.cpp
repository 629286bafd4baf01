#include "ggwpd/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ggwpd/branch.hpp"
#include "ggwpd/parallel.hpp"

namespace ggwpd {

using namespace std::complex_literals;

namespace {

constexpr double grid_eps = 1e-12;

cplx total_action(const Saddle& s, const WavePacketParams& wp) {
    return s.traj.action - 1i * wp.hbar * initial_exponent({s.u0}, wp);
}

double energy(const Saddle& s, const SystemParams& sys) { return hamiltonian(s.start, sys).real(); }

const Foliation* find_foliation(const FoliationSet& set, int label) {
    for (const auto& f : set.foliations) {
        if (f.label == label) return &f;
    }
    return nullptr;
}

std::function<cplx(const StabilityMatrix&)> jacobian_fn(const Target& target, cplx b) {
    return [target, b](const StabilityMatrix& m) { return target.derivative(m, b); };
}

cplx anchor_log(const Saddle& s, const WavePacketParams& wp, const SystemParams& sys,
                const IntegratorOptions& iopts) {
    if (s.log_jacobian) return *s.log_jacobian;
    return track_log(s.start, s.t, sys, iopts, jacobian_fn(s.target, wp.width)).value;
}

// Key for "this foliation is accounted for by a family".
using OwnerKey = std::pair<std::size_t, int>;

// Continues one family from grid index `first` to the end of the grid.
SaddleFamily continue_family(const FamilyAnchor& anchor, std::size_t first, const std::vector<double>& grid,
                             const std::vector<FoliationSet>& sets, const WavePacketParams& wp,
                             const SweepOptions& opts) {
    const auto& sys = sets.front().contour.sys;
    const double t = anchor.saddle.t;
    SaddleFamily fam;
    fam.label = anchor.label;
    fam.foliation = anchor.foliation;

    Saddle cur = anchor.saddle;
    cur.log_jacobian = anchor_log(cur, wp, sys, opts.integrator);
    cur.foliation_label = anchor.label;
    auto record = [&](double x, const Saddle& s) {
        FamilySample smp;
        smp.x = x;
        smp.saddle = s;
        smp.action = total_action(s, wp);
        smp.exposure = opts.retest_exposure
                           ? (is_exposed(sets[fam.foliation.set], fam.foliation.label, s, wp, opts) ? Exposure::exposed
                                                                                                   : Exposure::hidden)
                           : s.exposure;
        smp.saddle.exposure = smp.exposure;
        fam.samples.push_back(std::move(smp));
    };
    record(grid[first], cur);

    const auto dfun = jacobian_fn(cur.target, wp.width);
    for (std::size_t k = first + 1; k < grid.size(); ++k) {
        double x_cur = grid[k - 1];
        const double x_end = grid[k];
        double h = x_end - x_cur;
        while (x_cur != x_end) {
            if (std::abs(h) < opts.min_dx) {
                fam.terminated = true;
                fam.termination_reason = "continuation step underflow after x = " + std::to_string(x_cur);
                return fam;
            }
            const bool last = std::abs(x_end - x_cur) <= std::abs(h) * (1.0 + 1e-12);
            const double x_try = last ? x_end : x_cur + h;
            const auto target = Target::wavefunction(x_try);
            const cplx du_pred = (x_try - x_cur) / cur.df;
            const cplx pred = cur.u0 + du_pred;
            const auto rep = newton_search(pred, target, t, wp, sys, opts.integrator, opts.newton);
            bool ok = rep.converged && std::abs(rep.u - pred) <= 0.3 * std::abs(du_pred) + 1e-9;
            Saddle next;
            if (ok) {
                next = make_saddle(rep, target, t, wp);
                next.foliation_label = anchor.label;
                try {
                    next.log_jacobian =
                        track_log_homotopy(cur.start, *cur.log_jacobian, next.start, t, sys, opts.integrator, dfun)
                            .value;
                } catch (const BranchError&) {
                    ok = false;
                }
            }
            if (!ok) {
                h *= 0.5;
                continue;
            }
            cur = std::move(next);
            x_cur = x_try;
            h = std::copysign(std::min(2.0 * std::abs(h), std::abs(x_end - x_cur)), x_end - grid[k - 1]);
            if (x_cur == x_end) break;
        }
        record(x_end, cur);
    }
    return fam;
}

}  // namespace

const FamilySample* SaddleFamily::at(double x) const {
    for (const auto& s : samples) {
        if (std::abs(s.x - x) <= grid_eps * std::max(1.0, std::abs(x))) return &s;
    }
    return nullptr;
}

std::vector<FamilyAnchor> anchor_families(const std::vector<FoliationSet>& sets, double x0,
                                          const WavePacketParams& wp, const SweepOptions& opts,
                                          unsigned threads) {
    if (sets.empty()) throw std::invalid_argument("need at least one foliation set");
    std::vector<FamilyAnchor> out;
    const auto target = Target::wavefunction(x0);
    int max_label = 0;
    for (std::size_t k = 0; k < sets.size(); ++k) {
        auto found = find_exposed_saddles(sets[k].foliations, sets[k].contour, target, wp, opts.integrator,
                                          opts.newton, threads);
        std::vector<Saddle> fresh;
        for (auto& s : found.saddles) {
            const bool dup = std::any_of(out.begin(), out.end(), [&](const FamilyAnchor& a) {
                return std::abs(a.saddle.u0 - s.u0) < opts.newton.dedup_radius;
            });
            if (!dup) fresh.push_back(std::move(s));
        }
        if (k == 0) {
            for (auto& s : fresh) {
                const int label = *s.foliation_label;
                max_label = std::max(max_label, label);
                out.push_back({label, {0, label}, std::move(s)});
            }
            continue;
        }
        const auto& sys = sets[k].contour.sys;
        std::stable_sort(fresh.begin(), fresh.end(),
                         [&](const Saddle& a, const Saddle& b) { return energy(a, sys) < energy(b, sys); });
        for (auto& s : fresh) {
            const int fol = *s.foliation_label;
            out.push_back({++max_label, {k, fol}, std::move(s)});
        }
    }
    return out;
}

bool is_exposed(const FoliationSet& set, int foliation_label, const Saddle& s, const WavePacketParams& wp,
                const SweepOptions& opts) {
    const auto* fol = find_foliation(set, foliation_label);
    if (fol == nullptr) return false;
    for (const auto& br : fol->branches) {
        const auto ref = select_reference(br, set.contour, s.target.x);
        if (!ref) continue;
        if (reaches(*ref, s.u0, s.target, s.t, wp, set.contour.sys, opts.integrator, opts.newton)) return true;
    }
    return false;
}

std::vector<SaddleFamily> sweep_saddles(const std::vector<FamilyAnchor>& anchors,
                                        const std::vector<double>& x_grid,
                                        const std::vector<FoliationSet>& sets, const WavePacketParams& wp,
                                        const SweepOptions& opts, unsigned threads) {
    if (x_grid.empty()) throw std::invalid_argument("empty sweep grid");
    if (sets.empty()) throw std::invalid_argument("need at least one foliation set");
    const bool up = x_grid.size() < 2 || x_grid.back() > x_grid.front();
    for (std::size_t k = 1; k < x_grid.size(); ++k) {
        if ((x_grid[k] > x_grid[k - 1]) != up || x_grid[k] == x_grid[k - 1]) {
            throw std::invalid_argument("sweep grid must be strictly monotone");
        }
    }
    for (const auto& a : anchors) {
        if (std::abs(a.saddle.target.x - x_grid.front()) > 1e-12 * std::max(1.0, std::abs(x_grid.front()))) {
            throw std::invalid_argument("anchor saddles must solve the first grid point");
        }
    }

    std::vector<SaddleFamily> families(anchors.size());
    parallel_for(anchors.size(), threads, [&](std::size_t i) {
        families[i] = continue_family(anchors[i], 0, x_grid, sets, wp, opts);
    });
    if (!opts.discover) return families;

    std::map<OwnerKey, int> owner;
    for (const auto& f : families) owner[{f.foliation.set, f.foliation.label}] = f.label;
    // Foliations whose exposed saddle at x0 was deduplicated into another family.
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const auto found = find_exposed_saddles(sets[k].foliations, sets[k].contour,
                                                Target::wavefunction(x_grid.front()), wp, opts.integrator,
                                                opts.newton, threads);
        for (const auto& s : found.saddles) owner.emplace(OwnerKey{k, *s.foliation_label}, 0);
    }
    int next_label = 0;
    for (const auto& f : families) next_label = std::max(next_label, f.label);

    const auto& sys = sets.front().contour.sys;
    const double t = anchors.empty() ? sets.front().contour.t : anchors.front().saddle.t;
    for (std::size_t k = 1; k < x_grid.size(); ++k) {
        const double x = x_grid[k];
        const auto target = Target::wavefunction(x);
        for (std::size_t si = 0; si < sets.size(); ++si) {
            for (const auto& fol : sets[si].foliations) {
                if (owner.count({si, fol.label}) || !fol.covers(x)) continue;
                std::optional<Saddle> hit;
                for (const auto& br : fol.branches) {
                    const auto ref = select_reference(br, sets[si].contour, x);
                    if (!ref) continue;
                    const auto rep = newton_search(linear_seed(ref->traj, target, wp), target, t, wp, sys,
                                                   opts.integrator, opts.newton);
                    if (!rep.converged) continue;
                    Saddle s = make_saddle(rep, target, t, wp);
                    s.foliation_label = fol.label;
                    s.log_jacobian = reference_log_jacobian(*ref, s, rep.trace, wp, sys, opts.integrator);
                    hit = std::move(s);
                    break;
                }
                if (!hit) continue;
                int match = 0;
                for (const auto& f : families) {
                    const auto* smp = f.at(x);
                    if (smp && std::abs(smp->saddle.u0 - hit->u0) < opts.newton.dedup_radius) match = f.label;
                }
                if (match != 0) {
                    owner[{si, fol.label}] = match;
                    continue;
                }
                const int label = ++next_label;
                owner[{si, fol.label}] = label;
                FamilyAnchor a{label, {si, fol.label}, std::move(*hit)};
                families.push_back(continue_family(a, k, x_grid, sets, wp, opts));
            }
        }
    }
    return families;
}

std::optional<Caustic> detect_caustic(const SaddleFamily& f1, const SaddleFamily& f2, double window) {
    std::vector<double> xs;
    std::vector<double> dist;
    std::vector<const FamilySample*> a;
    std::vector<const FamilySample*> b;
    for (const auto& s : f1.samples) {
        const auto* o = f2.at(s.x);
        if (!o) continue;
        xs.push_back(s.x);
        dist.push_back(std::abs(s.saddle.u0 - o->saddle.u0));
        a.push_back(&s);
        b.push_back(o);
    }
    auto flips_near = [&](const std::vector<const FamilySample*>& f, double xc) {
        for (std::size_t i = 1; i < f.size(); ++i) {
            if (f[i]->exposure != f[i - 1]->exposure &&
                std::min(std::abs(f[i]->x - xc), std::abs(f[i - 1]->x - xc)) <= window) {
                return true;
            }
        }
        return false;
    };
    std::optional<Caustic> best;
    for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
        if (!(dist[i] < dist[i - 1] && dist[i] <= dist[i + 1])) continue;
        if (!flips_near(a, xs[i]) || !flips_near(b, xs[i])) continue;
        if (!best || dist[i] < best->gap) best = Caustic{xs[i], dist[i]};
    }
    return best;
}

StokesResult stokes_filter(SaddleFamily& f1, SaddleFamily& f2, const Caustic& caustic, double window) {
    StokesResult res;
    struct Pt {
        double x;
        FamilySample* a;
        FamilySample* b;
    };
    std::vector<Pt> pts;
    for (auto& s : f1.samples) {
        auto* o = const_cast<FamilySample*>(f2.at(s.x));
        if (o && std::abs(s.x - caustic.x) <= window) pts.push_back({s.x, &s, o});
    }
    std::sort(pts.begin(), pts.end(), [](const Pt& p, const Pt& q) { return p.x < q.x; });
    if (pts.size() < 3) return res;

    // Forbidden side: where both members are hidden.
    int hidden_lo = 0;
    int hidden_hi = 0;
    for (const auto& p : pts) {
        const int both = p.a->exposure == Exposure::hidden && p.b->exposure == Exposure::hidden;
        (p.x < caustic.x ? hidden_lo : hidden_hi) += both;
    }
    if (hidden_lo == hidden_hi) return res;
    const int side = hidden_hi > hidden_lo ? 1 : -1;

    std::optional<double> cross;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double d0 = pts[i - 1].a->action.real() - pts[i - 1].b->action.real();
        const double d1 = pts[i].a->action.real() - pts[i].b->action.real();
        if (d0 == 0.0 || (d0 < 0.0) != (d1 < 0.0)) {
            const double xc = d1 == d0 ? pts[i - 1].x : pts[i - 1].x + (pts[i].x - pts[i - 1].x) * d0 / (d0 - d1);
            if (!cross || std::abs(xc - caustic.x) < std::abs(*cross - caustic.x)) cross = xc;
        }
    }
    if (!cross) return res;

    // Im W trend moving away from the caustic on the forbidden side.
    const Pt* near = nullptr;
    const Pt* far = nullptr;
    for (const auto& p : pts) {
        const double d = (p.x - *cross) * side;
        if (d <= 0.0) continue;
        if (!near || d < (near->x - *cross) * side) near = &p;
        if (!far || d > (far->x - *cross) * side) far = &p;
    }
    if (!near || near == far) return res;
    const double da = far->a->action.imag() - near->a->action.imag();
    const double db = far->b->action.imag() - near->b->action.imag();
    if ((da < 0.0) == (db < 0.0)) return res;

    SaddleFamily& excl = da < 0.0 ? f1 : f2;
    SaddleFamily& kept = da < 0.0 ? f2 : f1;
    for (auto& s : excl.samples) {
        if ((s.x - *cross) * side > 0.0) s.stokes_excluded = true;
    }
    excl.stokes_x = *cross;
    excl.caustic_x = caustic.x;
    kept.caustic_x = caustic.x;
    res.resolved = true;
    res.kept = kept.label;
    res.excluded = excl.label;
    res.x_cross = *cross;
    res.forbidden_side = side;
    return res;
}

std::vector<StokesPair> apply_stokes(std::vector<SaddleFamily>& families, double window) {
    std::vector<StokesPair> out;
    for (std::size_t i = 0; i < families.size(); ++i) {
        for (std::size_t j = i + 1; j < families.size(); ++j) {
            const auto c = detect_caustic(families[i], families[j], window);
            if (!c) continue;
            StokesPair p{families[i].label, families[j].label, *c, {}};
            p.result = stokes_filter(families[i], families[j], *c, window);
            out.push_back(p);
        }
    }
    return out;
}

cplx SingularityMap::center(std::size_t i_re, std::size_t i_im) const {
    return {re_min + (static_cast<double>(i_re) + 0.5) * d_re(), im_min + (static_cast<double>(i_im) + 0.5) * d_im()};
}

std::optional<std::pair<std::size_t, std::size_t>> SingularityMap::cell_of(cplx u) const {
    if (u.real() < re_min || u.real() > re_max || u.imag() < im_min || u.imag() > im_max) return std::nullopt;
    const auto i = std::min(n_re - 1, static_cast<std::size_t>((u.real() - re_min) / d_re()));
    const auto j = std::min(n_im - 1, static_cast<std::size_t>((u.imag() - im_min) / d_im()));
    return std::make_pair(i, j);
}

std::size_t SingularityMap::singular_count() const {
    return static_cast<std::size_t>(std::count(singular.begin(), singular.end(), std::uint8_t{1}));
}

void MapWindow::validate() const {
    if (!(re_max > re_min) || !(im_max > im_min)) throw std::invalid_argument("empty singularity-map window");
    if (n_re == 0 || n_im == 0) throw std::invalid_argument("singularity-map resolution must be positive");
}

SingularityMap grid_singularity_map(const MapWindow& window, double t, const WavePacketParams& wp,
                                    const SystemParams& sys, const IntegratorOptions& opts, unsigned threads) {
    window.validate();
    SingularityMap map;
    map.re_min = window.re_min;
    map.re_max = window.re_max;
    map.im_min = window.im_min;
    map.im_max = window.im_max;
    map.n_re = window.n_re;
    map.n_im = window.n_im;
    map.t = t;
    const std::size_t n = map.n_re * map.n_im;
    map.singular.assign(n, 0);
    map.re_x.assign(n, 0.0);
    // The map shows where real-time integration breaks down, so no detours.
    IntegratorOptions plain = opts;
    plain.record_samples = false;
    plain.detour_factor = 0.0;
    parallel_for(n, threads, [&](std::size_t idx) {
        const cplx u = map.center(idx % map.n_re, idx / map.n_re);
        const auto tr = propagate(manifold_lift({u}, wp), t, sys, plain);
        if (tr.ok()) {
            map.re_x[idx] = tr.final.q.real();
        } else {
            map.singular[idx] = 1;
            map.re_x[idx] = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return map;
}

std::vector<std::optional<bool>> classical_zone_check(const std::vector<cplx>& u0, const SingularityMap& map) {
    std::vector<std::optional<bool>> out;
    out.reserve(u0.size());
    const double step = 0.25 * map.d_im();
    for (const auto& u : u0) {
        if (!map.cell_of(u) || !map.cell_of(cplx{u.real(), 0.0})) {
            out.emplace_back(std::nullopt);
            continue;
        }
        const auto n = static_cast<std::size_t>(std::ceil(std::abs(u.imag()) / step)) + 1;
        bool clear = true;
        for (std::size_t k = 0; k <= n && clear; ++k) {
            const cplx v{u.real(), u.imag() * static_cast<double>(k) / static_cast<double>(n)};
            const auto cell = map.cell_of(v);
            clear = !map.is_singular(cell->first, cell->second);
        }
        out.emplace_back(clear);
    }
    return out;
}

}  // namespace ggwpd
