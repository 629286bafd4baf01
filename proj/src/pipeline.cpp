#include "ggwpd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ggwpd/parallel.hpp"

namespace ggwpd {

void PipelineConfig::validate() const {
    wp.validate();
    sys.validate();
    sweep.integrator.validate();
    sweep.newton.validate();
    if (!(t_over_tau >= 0.0)) throw std::invalid_argument("t_over_tau must be >= 0");
    if (!(n_sigma > 0.0)) throw std::invalid_argument("n_sigma must be > 0");
    for (double ns : outer_n_sigma) {
        if (!(ns > 0.0)) throw std::invalid_argument("outer n_sigma values must be > 0");
    }
    if (contour_points < 16) throw std::invalid_argument("contour needs at least 16 points");
    if (!(caustic_window > 0.0)) throw std::invalid_argument("caustic window must be > 0");
    if (!(relevance >= 0.0)) throw std::invalid_argument("relevance must be >= 0");
}

double PipelineConfig::time() const { return t_over_tau * central_period(wp, sys); }

std::vector<FoliationSet> build_foliation_sets(const PipelineConfig& cfg, double t) {
    std::vector<double> sigmas{cfg.n_sigma};
    sigmas.insert(sigmas.end(), cfg.outer_n_sigma.begin(), cfg.outer_n_sigma.end());
    std::vector<FoliationSet> sets;
    const auto form = wigner_matrix(cfg.wp);
    for (double ns : sigmas) {
        auto contour = propagate_contour(form, ns, cfg.contour_points, t, cfg.sys, cfg.sweep.integrator, cfg.threads);
        auto fol = segment_foliations(contour);
        sets.push_back({std::move(contour), std::move(fol)});
    }
    return sets;
}

std::vector<double> sweep_grid(double from, double to, double dx) {
    if (!(dx > 0.0)) throw std::invalid_argument("grid step must be > 0");
    const double span = std::abs(to - from);
    const double dir = to >= from ? 1.0 : -1.0;
    const auto n = static_cast<std::size_t>(std::ceil(span / dx - 1e-9));
    std::vector<double> grid;
    grid.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) grid.push_back(from + dir * dx * static_cast<double>(i));
    grid.push_back(to);
    return grid;
}

WavefunctionRun run_wavefunction(const PipelineConfig& cfg, double x_min, double x_max, double dx) {
    cfg.validate();
    const double t = cfg.time();
    return run_wavefunction(cfg, build_foliation_sets(cfg, t), t, x_min, x_max, dx);
}

WavefunctionRun run_wavefunction(const PipelineConfig& cfg, std::vector<FoliationSet> sets, double t,
                                 double x_min, double x_max, double dx) {
    cfg.validate();
    if (!(x_min <= x_max)) throw std::invalid_argument("x_min must not exceed x_max");
    WavefunctionRun run;
    run.t = t;
    run.sets = std::move(sets);
    run.anchors = anchor_families(run.sets, cfg.x0, cfg.wp, cfg.sweep, cfg.threads);

    std::vector<std::pair<int, double>> legs;
    if (x_min < cfg.x0) legs.emplace_back(-1, x_min);
    if (x_max > cfg.x0 || legs.empty()) legs.emplace_back(1, std::max(x_max, cfg.x0));
    for (const auto& [dir, end] : legs) {
        DirectionalSweep sw;
        sw.direction = dir;
        sw.grid = end == cfg.x0 ? std::vector<double>{cfg.x0} : sweep_grid(cfg.x0, end, dx);
        sw.families = sweep_saddles(run.anchors, sw.grid, run.sets, cfg.wp, cfg.sweep, cfg.threads);
        sw.pairs = apply_stokes(sw.families, cfg.caustic_window);
        for (const auto& p : sw.pairs) run.caustics.push_back(p.caustic.x);
        run.sweeps.push_back(std::move(sw));
    }

    // Flatten every kept sample, compute contributions in parallel.
    struct Item {
        double x;
        int label;
        const FamilySample* sample;
    };
    std::vector<Item> items;
    std::map<int, std::size_t> label_index;
    for (std::size_t k = 0; k < run.sweeps.size(); ++k) {
        const auto& sw = run.sweeps[k];
        for (const auto& f : sw.families) {
            label_index.emplace(f.label, 0);
            for (const auto& s : f.samples) {
                if (k > 0 && s.x == cfg.x0) continue;
                if (s.x < x_min || s.x > x_max) continue;
                items.push_back({s.x, f.label, &s});
            }
        }
    }
    std::size_t next = 0;
    for (auto& [label, idx] : label_index) {
        idx = next++;
        run.labels.push_back(label);
    }
    std::vector<Contribution> values(items.size());
    ContributionOptions copts;
    copts.integrator = cfg.sweep.integrator;
    parallel_for(items.size(), cfg.threads, [&](std::size_t i) {
        values[i] = saddle_contribution_wavefunction(items[i].sample->saddle, cfg.wp, cfg.sys, copts);
    });

    std::map<double, std::vector<std::size_t>> by_x;
    for (std::size_t i = 0; i < items.size(); ++i) by_x[items[i].x].push_back(i);
    // Grid points where no family is present still appear in the table.
    for (const auto& sw : run.sweeps) {
        for (double x : sw.grid) {
            if (x >= x_min && x <= x_max) by_x.try_emplace(x);
        }
    }
    std::vector<std::vector<Contribution>> contrib;
    std::vector<std::vector<bool>> excluded;
    std::vector<std::vector<std::size_t>> owners;
    for (const auto& [x, ids] : by_x) {
        run.x.push_back(x);
        auto& c = contrib.emplace_back();
        auto& e = excluded.emplace_back();
        auto& o = owners.emplace_back();
        for (std::size_t i : ids) {
            c.push_back(values[i]);
            e.push_back(items[i].sample->stokes_excluded);
            o.push_back(label_index.at(items[i].label));
        }
    }
    const auto table = assemble_wavefunction(run.x, contrib, excluded, cfg.relevance);
    run.psi.resize(table.size());
    run.parts.assign(table.size(), std::vector<cplx>(run.labels.size(), 0.0));
    for (std::size_t i = 0; i < table.size(); ++i) {
        run.psi[i] = table[i].psi;
        for (std::size_t k = 0; k < owners[i].size(); ++k) run.parts[i][owners[i][k]] = table[i].parts[k];
    }
    return run;
}

std::optional<StokesPair> find_pair(const WavefunctionRun& run, int a, int b) {
    for (const auto& sw : run.sweeps) {
        for (const auto& p : sw.pairs) {
            if ((p.label_a == a && p.label_b == b) || (p.label_a == b && p.label_b == a)) return p;
        }
    }
    return std::nullopt;
}

const SaddleFamily* find_family(const DirectionalSweep& sweep, int label) {
    for (const auto& f : sweep.families) {
        if (f.label == label) return &f;
    }
    return nullptr;
}

ProfileShape detect_plateau_shoulder_plateau(const std::vector<double>& x, const std::vector<cplx>& psi,
                                             int direction, const ProfileOptions& opts) {
    if (x.size() != psi.size()) throw std::invalid_argument("x and psi sizes differ");
    if (direction != 1 && direction != -1) throw std::invalid_argument("direction must be +1 or -1");
    ProfileShape shape;
    const std::size_t n = x.size();
    if (n < 8) return shape;
    const double h = (x.back() - x.front()) / static_cast<double>(n - 1);
    if (!(h > 0.0)) throw std::invalid_argument("x must be increasing");

    // Samples in walking order.
    std::vector<double> xs(n);
    std::vector<double> lg(n);
    for (std::size_t m = 0; m < n; ++m) {
        const std::size_t i = direction > 0 ? m : n - 1 - m;
        xs[m] = x[i];
        lg[m] = std::log10(std::max(std::abs(psi[i]), 1e-300));
    }
    const auto kw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(opts.envelope_halfwidth / h)));
    std::vector<double> env(n);
    for (std::size_t m = 0; m < n; ++m) {
        const std::size_t lo = m >= kw ? m - kw : 0;
        const std::size_t hi = std::min(n - 1, m + kw);
        env[m] = *std::max_element(lg.begin() + static_cast<std::ptrdiff_t>(lo),
                                   lg.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    }
    using Kind = ProfileSegment::Kind;
    std::vector<Kind> kind(n);
    for (std::size_t m = 0; m < n; ++m) {
        const std::size_t lo = m >= kw ? m - kw : 0;
        const std::size_t hi = std::min(n - 1, m + kw);
        const double rate = (env[lo] - env[hi]) / (static_cast<double>(hi - lo) * h);
        if (std::abs(rate) < opts.plateau_slope) {
            kind[m] = Kind::plateau;
        } else if (rate > opts.shoulder_slope) {
            kind[m] = Kind::shoulder;
        } else {
            kind[m] = Kind::other;
        }
    }

    auto ripples = [&](std::size_t a, std::size_t b) {
        int count = 0;
        for (std::size_t m = a + 1; m < b; ++m) {
            if (!(lg[m] < lg[m - 1] && lg[m] <= lg[m + 1])) continue;
            const std::size_t lo = m >= kw ? m - kw : 0;
            const std::size_t hi = std::min(n - 1, m + kw);
            const double left = *std::max_element(lg.begin() + static_cast<std::ptrdiff_t>(lo),
                                                  lg.begin() + static_cast<std::ptrdiff_t>(m) + 1);
            const double right = *std::max_element(lg.begin() + static_cast<std::ptrdiff_t>(m),
                                                   lg.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
            if (std::min(left, right) - lg[m] >= opts.min_ripple) ++count;
        }
        return count;
    };
    auto monotone = [&](std::size_t a, std::size_t b) {
        for (std::size_t m = a; m < b; ++m) {
            if (env[m + 1] > env[m] + 1e-12) return false;
        }
        return true;
    };

    // Runs of equal class, with sample index bounds.
    std::vector<std::pair<std::size_t, std::size_t>> bounds;
    for (std::size_t m = 0; m < n;) {
        std::size_t e = m;
        while (e + 1 < n && kind[e + 1] == kind[m]) ++e;
        ProfileSegment seg;
        seg.kind = kind[m];
        seg.x_begin = xs[m];
        seg.x_end = xs[e];
        seg.drop = env[m] - env[e];
        seg.ripples = ripples(m, e);
        seg.monotone = monotone(m, e);
        shape.segments.push_back(seg);
        bounds.emplace_back(m, e);
        m = e + 1;
    }

    auto good_plateau = [&](std::size_t s) {
        const auto& seg = shape.segments[s];
        return seg.kind == Kind::plateau && seg.length() >= opts.min_plateau_length &&
               seg.ripples >= opts.min_ripples;
    };
    // Next segment of the wanted kind, skipping short transitional stretches.
    auto next_of = [&](std::size_t s, Kind want) -> std::optional<std::size_t> {
        double gap = 0.0;
        for (std::size_t j = s + 1; j < shape.segments.size(); ++j) {
            if (shape.segments[j].kind == want) return j;
            gap += shape.segments[j].length() + h;
            if (gap > opts.max_gap) return std::nullopt;
        }
        return std::nullopt;
    };
    for (std::size_t i = 0; i < shape.segments.size(); ++i) {
        if (!good_plateau(i)) continue;
        const auto s = next_of(i, Kind::shoulder);
        if (!s) continue;
        // Short flat or steep pieces inside the decay belong to the shoulder.
        std::size_t last = *s;
        std::optional<std::size_t> p;
        for (std::size_t j = *s; j < shape.segments.size(); ++j) {
            if (shape.segments[j].kind == Kind::shoulder) last = j;
            if (good_plateau(j) && j > *s) {
                p = j;
                break;
            }
        }
        if (!p) continue;
        const std::size_t a = bounds[i].second;
        const std::size_t b = bounds[*p].first;
        if (!monotone(bounds[*s].first, bounds[last].second)) continue;
        if (env[a] - env[b] < opts.min_shoulder_drop) continue;
        shape.found = true;
        shape.first = i;
        shape.shoulder = *s;
        shape.second = *p;
        return shape;
    }
    return shape;
}

}  // namespace ggwpd
