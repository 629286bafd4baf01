#include "ggwpd/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <variant>

#include "ggwpd/assembly.hpp"
#include "ggwpd/parallel.hpp"

namespace ggwpd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Cell = std::variant<double, long long, std::string>;

std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        if (std::isnan(*d)) return "nan";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", *d);
        return buf;
    }
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

json cell_json(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return std::isnan(*d) ? json(nullptr) : json(*d);
    if (const auto* i = std::get_if<long long>(&c)) return *i;
    return std::get<std::string>(c);
}

class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<Cell> row) {
        if (row.size() != header_.size()) throw std::logic_error("row width does not match header");
        rows_.push_back(std::move(row));
    }
    std::size_t size() const { return rows_.size(); }

    void write(const fs::path& dir, const std::string& stem, bool mirror) const {
        std::ofstream out(dir / (stem + ".csv"));
        if (!out) throw std::runtime_error("cannot write " + (dir / (stem + ".csv")).string());
        for (std::size_t k = 0; k < header_.size(); ++k) out << (k ? "," : "") << header_[k];
        out << '\n';
        for (const auto& r : rows_) {
            for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << format_cell(r[k]);
            out << '\n';
        }
        if (!mirror) return;
        json arr = json::array();
        for (const auto& r : rows_) {
            json o = json::object();
            for (std::size_t k = 0; k < r.size(); ++k) o[header_[k]] = cell_json(r[k]);
            arr.push_back(std::move(o));
        }
        std::ofstream js(dir / (stem + ".json"));
        js << arr.dump(1) << '\n';
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<Cell>> rows_;
};

fs::path prepare(const RunConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    std::ofstream(cfg.out_dir / "config.json") << dump_config(cfg);
    return cfg.out_dir;
}

void write_summary(const fs::path& path, const json& j) { std::ofstream(path) << j.dump(2) << '\n'; }

json complex_json(cplx c) { return {{"re", c.real()}, {"im", c.imag()}, {"abs", std::abs(c)}}; }

// JSON has no infinity; null would read as "missing".
json number_json(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0.0 ? "inf" : "-inf";
}

json metrics_json(const CompareReport& r) {
    return {{"global_l2", number_json(r.global_l2)},   {"central_l2", number_json(r.central_l2)},
            {"tail_log_error", number_json(r.tail_log_error)}, {"tail_worst_x", r.tail_worst_x}, {"n_central", r.n_central}, {"n_tail", r.n_tail},
            {"n_excluded", r.n_excluded}};
}

json time_json(const RunConfig& cfg, double t) {
    return {{"t", t}, {"tau", central_period(cfg.pipeline.wp, cfg.pipeline.sys)}, {"t_over_tau", cfg.pipeline.t_over_tau}};
}

FoliationSet main_set(const RunConfig& cfg, double t) {
    auto pc = cfg.pipeline;
    pc.outer_n_sigma.clear();
    return std::move(build_foliation_sets(pc, t).front());
}

int label_of_theta(const std::vector<Foliation>& fols, double theta) {
    for (const auto& f : fols) {
        for (const auto& b : f.branches) {
            for (double th : {theta, theta + 2.0 * std::numbers::pi}) {
                if (th >= b.theta_begin && th <= b.theta_end) return f.label;
            }
        }
    }
    return 0;
}

const char* exposure_name(Exposure e) { return e == Exposure::exposed ? "exposed" : "hidden"; }

void write_family_tables(const WavefunctionRun& run, const RunConfig& cfg, const fs::path& dir) {
    Table fam({"x", "family", "set_n_sigma", "foliation", "re_u0", "im_u0", "re_action", "im_action", "exposure",
               "stokes_excluded"});
    std::map<int, std::vector<const FamilySample*>> rows;
    std::map<int, const SaddleFamily*> meta;
    for (std::size_t k = 0; k < run.sweeps.size(); ++k) {
        const auto& sw = run.sweeps[k];
        for (const auto& f : sw.families) {
            meta.emplace(f.label, &f);
            auto& v = rows[f.label];
            std::vector<const FamilySample*> part;
            for (const auto& s : f.samples) {
                if (k > 0 && s.x == cfg.pipeline.x0) continue;
                if (s.x < cfg.x_min || s.x > cfg.x_max) continue;
                part.push_back(&s);
            }
            v.insert(v.end(), part.begin(), part.end());
        }
    }
    for (auto& [label, v] : rows) {
        std::sort(v.begin(), v.end(), [](const FamilySample* a, const FamilySample* b) { return a->x < b->x; });
        const auto* f = meta.at(label);
        const double ns = run.sets.at(f->foliation.set).contour.n_sigma;
        for (const auto* s : v) {
            fam.add({s->x, static_cast<long long>(label), ns, static_cast<long long>(f->foliation.label),
                     s->saddle.u0.real(), s->saddle.u0.imag(), s->action.real(), s->action.imag(),
                     std::string(exposure_name(s->exposure)), static_cast<long long>(s->stokes_excluded)});
        }
    }
    fam.write(dir, "families", cfg.json);

    Table caus({"family_a", "family_b", "caustic_x", "gap", "resolved", "kept", "excluded", "x_cross"});
    for (const auto& sw : run.sweeps) {
        for (const auto& p : sw.pairs) {
            caus.add({static_cast<long long>(p.label_a), static_cast<long long>(p.label_b), p.caustic.x, p.caustic.gap,
                      static_cast<long long>(p.result.resolved), static_cast<long long>(p.result.kept),
                      static_cast<long long>(p.result.excluded),
                      p.result.resolved ? p.result.x_cross : std::nan("")});
        }
    }
    caus.write(dir, "caustics", cfg.json);
}

json sweep_json(const WavefunctionRun& run) {
    json j;
    json terminated = json::array();
    std::map<int, int> seen;
    for (const auto& sw : run.sweeps) {
        for (const auto& f : sw.families) {
            seen[f.label] = f.foliation.label;
            if (f.terminated) {
                terminated.push_back({{"family", f.label}, {"direction", sw.direction}, {"reason", f.termination_reason}});
            }
        }
    }
    json pairs = json::array();
    for (const auto& sw : run.sweeps) {
        for (const auto& p : sw.pairs) {
            json e = {{"families", {p.label_a, p.label_b}}, {"caustic_x", p.caustic.x}, {"resolved", p.result.resolved}};
            if (p.result.resolved) {
                e["kept"] = p.result.kept;
                e["excluded"] = p.result.excluded;
                e["x_cross"] = p.result.x_cross;
            }
            pairs.push_back(std::move(e));
        }
    }
    j["families"] = seen.size();
    j["terminated"] = terminated;
    j["stokes_pairs"] = pairs;
    return j;
}

}  // namespace

json cmd_singmap(const RunConfig& cfg) {
    const auto dir = prepare(cfg);
    const auto& pc = cfg.pipeline;
    const double t = pc.time();
    const auto map = grid_singularity_map(cfg.singmap, t, pc.wp, pc.sys, pc.sweep.integrator, pc.threads);
    Table tab({"re_u0", "im_u0", "singular", "re_x"});
    for (std::size_t j = 0; j < map.n_im; ++j) {
        for (std::size_t i = 0; i < map.n_re; ++i) {
            const cplx u = map.center(i, j);
            const bool sing = map.is_singular(i, j);
            tab.add({u.real(), u.imag(), static_cast<long long>(sing), sing ? std::nan("") : map.re_x[j * map.n_re + i]});
        }
    }
    tab.write(dir, "singmap", cfg.json);
    // Grey map: singular cells black, regular cells banded by unit steps of Re x.
    std::ofstream pgm(dir / "singmap.pgm");
    pgm << "P2\n" << map.n_re << ' ' << map.n_im << "\n255\n";
    for (std::size_t jj = map.n_im; jj-- > 0;) {
        for (std::size_t i = 0; i < map.n_re; ++i) {
            int g = 0;
            if (!map.is_singular(i, jj)) {
                const auto band = static_cast<long long>(std::floor(map.re_x[jj * map.n_re + i]));
                g = band % 2 == 0 ? 96 : 192;
            }
            pgm << g << (i + 1 == map.n_re ? '\n' : ' ');
        }
    }
    json s = time_json(cfg, t);
    s["cells"] = map.n_re * map.n_im;
    s["singular_cells"] = map.singular_count();
    write_summary(dir / "singmap_summary.json", s);
    return s;
}

json cmd_foliate(const RunConfig& cfg) {
    const auto dir = prepare(cfg);
    const auto& pc = cfg.pipeline;
    const double t = pc.time();
    const auto set = main_set(cfg, t);
    const auto& contour = set.contour;

    Table pts({"theta", "q0", "p0", "q_t", "p_t", "foliation"});
    std::vector<double> q0, p0, qt, pt;
    for (const auto& c : contour.points) {
        pts.add({c.initial.theta, c.initial.q, c.initial.p, c.q_t, c.p_t,
                 static_cast<long long>(label_of_theta(set.foliations, c.initial.theta))});
        q0.push_back(c.initial.q);
        p0.push_back(c.initial.p);
        qt.push_back(c.q_t);
        pt.push_back(c.p_t);
    }
    pts.write(dir, "contour", cfg.json);

    Table fol({"foliation", "branches", "theta_extent", "q_t_min", "q_t_max", "ref_q0", "ref_p0", "ref_q_t",
               "ref_p_t", "ref_energy"});
    for (const auto& f : set.foliations) {
        const auto& r = f.branches.front().reference;
        const double e = hamiltonian({r.initial.q, r.initial.p}, pc.sys).real();
        fol.add({static_cast<long long>(f.label), static_cast<long long>(f.branches.size()), f.theta_extent(),
                 f.q_t_min(), f.q_t_max(), r.initial.q, r.initial.p, r.q_t, r.p_t, e});
    }
    fol.write(dir, "foliations", cfg.json);

    const auto lw = lwpd_propagate(pc.wp, t, pc.sys, pc.sweep.integrator);
    const auto ellipse = sigma_contour(pc.n_sigma, pc.contour_points, wigner_matrix(lw.as_packet()));
    Table el({"theta", "q", "p"});
    for (const auto& e : ellipse) el.add({e.theta, e.q, e.p});
    el.write(dir, "lwpd_ellipse", cfg.json);

    json s = time_json(cfg, t);
    s["n_sigma"] = pc.n_sigma;
    s["foliations"] = set.foliations.size();
    std::size_t nb = 0;
    for (const auto& f : set.foliations) nb += f.branches.size();
    s["branches"] = nb;
    const double a0 = polygon_area(q0, p0);
    s["area_initial"] = a0;
    s["area_final"] = polygon_area(qt, pt);
    write_summary(dir / "foliate_summary.json", s);
    return s;
}

json cmd_saddles(const RunConfig& cfg) {
    const auto dir = prepare(cfg);
    const auto& pc = cfg.pipeline;
    const double t = pc.time();
    const auto set = main_set(cfg, t);
    const auto xs = cfg.x ? std::vector<double>{*cfg.x} : sweep_grid(cfg.x_min, cfg.x_max, cfg.dx);
    Table tab({"x", "foliation", "re_u0", "im_u0", "re_p0", "im_p0", "re_S", "im_S", "exposure", "stokes_excluded"});
    Table fail({"x", "foliation", "reason"});
    std::vector<ExposedSearch> found(xs.size());
    // Parallel over x; each search is sequential so the order is fixed.
    parallel_for(xs.size(), pc.threads, [&](std::size_t i) {
        found[i] = find_exposed_saddles(set.foliations, set.contour, Target::wavefunction(xs[i]), pc.wp,
                                        pc.sweep.integrator, pc.sweep.newton, 1);
    });
    json counts = json::array();
    std::size_t total = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (const auto& s : found[i].saddles) {
            tab.add({xs[i], static_cast<long long>(s.foliation_label.value_or(0)), s.u0.real(), s.u0.imag(),
                     s.start.p.real(), s.start.p.imag(), s.traj.action.real(), s.traj.action.imag(),
                     std::string(exposure_name(s.exposure)), static_cast<long long>(s.stokes_excluded)});
        }
        for (const auto& f : found[i].failures) fail.add({xs[i], static_cast<long long>(f.foliation_label), f.reason});
        total += found[i].saddles.size();
        counts.push_back(found[i].saddles.size());
    }
    tab.write(dir, "saddles", cfg.json);
    fail.write(dir, "saddle_failures", cfg.json);
    json s = time_json(cfg, t);
    s["n_sigma"] = pc.n_sigma;
    s["foliations"] = set.foliations.size();
    s["x_points"] = xs.size();
    s["saddles"] = total;
    s["failures"] = fail.size();
    if (xs.size() == 1) {
        s["x"] = xs.front();
    } else {
        s["saddles_per_x"] = counts;
    }
    write_summary(dir / "saddles_summary.json", s);
    return s;
}

json cmd_sweep(const RunConfig& cfg) {
    const auto dir = prepare(cfg);
    const auto run = run_wavefunction(cfg.pipeline, cfg.x_min, cfg.x_max, cfg.dx);
    write_family_tables(run, cfg, dir);
    json s = time_json(cfg, run.t);
    s.update(sweep_json(run));
    write_summary(dir / "sweep_summary.json", s);
    return s;
}

json cmd_wavefn(const RunConfig& cfg) {
    const auto dir = prepare(cfg);
    const auto run = run_wavefunction(cfg.pipeline, cfg.x_min, cfg.x_max, cfg.dx);
    write_family_tables(run, cfg, dir);
    std::vector<std::string> header{"x", "re_psi", "im_psi", "abs_psi", "log10_abs_psi"};
    for (int l : run.labels) header.push_back("abs_f" + std::to_string(l));
    Table wf(header);
    for (std::size_t i = 0; i < run.x.size(); ++i) {
        const double a = std::abs(run.psi[i]);
        std::vector<Cell> row{run.x[i], run.psi[i].real(), run.psi[i].imag(), a, a > 0.0 ? std::log10(a) : std::nan("")};
        for (const auto& p : run.parts[i]) row.emplace_back(std::abs(p));
        wf.add(std::move(row));
    }
    wf.write(dir, "wavefn", cfg.json);

    Table prof({"side", "kind", "x_begin", "x_end", "drop", "ripples", "monotone"});
    json detected = json::object();
    for (int side : {-1, 1}) {
        std::vector<double> x;
        std::vector<cplx> psi;
        for (std::size_t i = 0; i < run.x.size(); ++i) {
            if ((side < 0 && run.x[i] <= cfg.pipeline.x0) || (side > 0 && run.x[i] >= cfg.pipeline.x0)) {
                x.push_back(run.x[i]);
                psi.push_back(run.psi[i]);
            }
        }
        const auto shape = detect_plateau_shoulder_plateau(x, psi, side);
        const std::string name = side < 0 ? "left" : "right";
        for (const auto& seg : shape.segments) {
            const char* kind = seg.kind == ProfileSegment::Kind::plateau    ? "plateau"
                               : seg.kind == ProfileSegment::Kind::shoulder ? "shoulder"
                                                                            : "other";
            prof.add({name, std::string(kind), seg.x_begin, seg.x_end, seg.drop, static_cast<long long>(seg.ripples),
                      static_cast<long long>(seg.monotone)});
        }
        json d = {{"found", shape.found}};
        if (shape.found) {
            d["plateau_end"] = shape.segments[shape.first].x_end;
            d["shoulder"] = {shape.segments[shape.shoulder].x_begin, shape.segments[shape.shoulder].x_end};
            d["second_plateau"] = {shape.segments[shape.second].x_begin, shape.segments[shape.second].x_end};
        }
        detected[name] = d;
    }
    prof.write(dir, "profile", cfg.json);
    json s = time_json(cfg, run.t);
    s.update(sweep_json(run));
    s["x_points"] = run.x.size();
    s["plateau_shoulder_plateau"] = detected;
    write_summary(dir / "wavefn_summary.json", s);
    return s;
}

json cmd_compare(const RunConfig& cfg) {
    const auto dir = prepare(cfg);
    const auto& pc = cfg.pipeline;
    const double t = pc.time();
    auto sets = build_foliation_sets(pc, t);
    const auto main = sets.front();
    const auto run = run_wavefunction(pc, std::move(sets), t, cfg.x_min, cfg.x_max, cfg.dx);

    const auto& qg = cfg.quantum;
    const auto psi0 = GridWavefunction::from_packet(pc.wp, qg.x_min, qg.x_max, qg.points);
    const auto psi_q = split_operator_propagate(psi0, t, pc.sys, qg.split);
    write_grid_csv(psi_q, dir / "psi_q.csv");
    write_grid_binary(psi_q, dir / "psi_q.bin");

    const auto lw = lwpd_propagate(pc.wp, t, pc.sys, pc.sweep.integrator);
    std::vector<cplx> psi_lw(run.x.size());
    for (std::size_t i = 0; i < run.x.size(); ++i) psi_lw[i] = lw.eval(run.x[i]);
    const auto oc = offcenter_sum(main.foliations, main.contour, run.x, pc.wp, 1e-4, pc.threads);
    std::vector<cplx> psi_oc(oc.size());
    for (std::size_t i = 0; i < oc.size(); ++i) psi_oc[i] = oc[i].psi;

    Table tab({"x", "re_q", "im_q", "re_sc", "im_sc", "re_lwpd", "im_lwpd", "re_oc", "im_oc"});
    for (std::size_t i = 0; i < run.x.size(); ++i) {
        const cplx q = psi_q.interpolate(run.x[i]);
        tab.add({run.x[i], q.real(), q.imag(), run.psi[i].real(), run.psi[i].imag(), psi_lw[i].real(), psi_lw[i].imag(),
                 psi_oc[i].real(), psi_oc[i].imag()});
    }
    tab.write(dir, "compare", cfg.json);

    auto no_windows = cfg.compare;
    no_windows.caustic_halfwidth = 0.0;
    const auto rep = compare_metrics(run.x, run.psi, psi_q, run.caustics, cfg.compare);
    const double validity =
        lwpd_validity_overlap(pc.wp, t, pc.sys, cfg.lwpd_samples, cfg.seed, pc.sweep.integrator, pc.threads);
    const auto e0 = expectation_values(psi0, pc.sys);
    const auto et = expectation_values(psi_q, pc.sys);
    const auto centroid = propagate({pc.wp.q_center, pc.wp.p_center}, t, pc.sys, pc.sweep.integrator);

    json s = time_json(cfg, t);
    s["ggwpd"] = metrics_json(rep);
    s["ggwpd_without_caustic_windows"] = metrics_json(compare_metrics(run.x, run.psi, psi_q, run.caustics, no_windows));
    s["lwpd"] = metrics_json(compare_metrics(run.x, psi_lw, psi_q, run.caustics, cfg.compare));
    s["offcenter"] = metrics_json(compare_metrics(run.x, psi_oc, psi_q, run.caustics, cfg.compare));
    s["thresholds"] = {{"central_l2", 0.05}, {"tail_log_error", 0.5}};
    s["pass"] = {{"central_l2", rep.central_l2 < 0.05}, {"tail_log_error", rep.tail_log_error < 0.5}};
    s["caustics"] = run.caustics;
    s["caustic_halfwidth"] = cfg.compare.caustic_halfwidth;
    s["lwpd_validity_overlap"] = validity;
    s["quantum"] = {{"norm", psi_q.norm()},
                    {"energy_initial", e0.energy},
                    {"energy_final", et.energy},
                    {"position", et.position},
                    {"momentum", et.momentum},
                    {"centroid_q", centroid.final.q.real()},
                    {"centroid_p", centroid.final.p.real()}};
    s.update(sweep_json(run));
    write_summary(dir / "report.json", s);
    return s;
}

json cmd_overlap(const RunConfig& cfg) {
    const auto dir = prepare(cfg);
    const auto& pc = cfg.pipeline;
    const double t = pc.time();
    const auto set = main_set(cfg, t);
    const auto bra = cfg.bra_packet();
    ContributionOptions copts;
    copts.integrator = pc.sweep.integrator;
    const auto res = overlap_semiclassical(bra, set.foliations, set.contour, pc.wp, pc.sweep.newton, copts, pc.threads);
    Table tab({"foliation", "re_u0", "im_u0", "re_value", "im_value", "abs_value"});
    for (std::size_t i = 0; i < res.saddles.size(); ++i) {
        const auto v = res.contributions[i].value;
        tab.add({static_cast<long long>(res.saddles[i].foliation_label.value_or(0)), res.saddles[i].u0.real(),
                 res.saddles[i].u0.imag(), v.real(), v.imag(), std::abs(v)});
    }
    tab.write(dir, "overlap_saddles", cfg.json);
    json s = time_json(cfg, t);
    s["bra"] = {{"q", bra.q_center}, {"p", bra.p_center}, {"b_re", bra.width.real()}, {"b_im", bra.width.imag()}};
    s["semiclassical"] = complex_json(res.amplitude);
    s["saddles"] = res.saddles.size();
    s["failures"] = res.failures.size();
    if (cfg.overlap_quantum) {
        const auto& qg = cfg.quantum;
        const auto psi0 = GridWavefunction::from_packet(pc.wp, qg.x_min, qg.x_max, qg.points);
        const auto psi_q = split_operator_propagate(psi0, t, pc.sys, qg.split);
        const auto a = overlap_numeric(GridWavefunction::from_packet(bra, qg.x_min, qg.x_max, qg.points), psi_q);
        s["quantum"] = complex_json(a);
        s["relative_modulus_error"] = std::abs(std::abs(res.amplitude) - std::abs(a)) / std::abs(a);
    }
    write_summary(dir / "overlap_summary.json", s);
    return s;
}

json run_command(const std::string& name, const RunConfig& cfg) {
    if (name == "singmap") return cmd_singmap(cfg);
    if (name == "foliate") return cmd_foliate(cfg);
    if (name == "saddles") return cmd_saddles(cfg);
    if (name == "sweep") return cmd_sweep(cfg);
    if (name == "wavefn") return cmd_wavefn(cfg);
    if (name == "compare") return cmd_compare(cfg);
    if (name == "overlap") return cmd_overlap(cfg);
    throw ConfigError("unknown command '" + name + "'");
}

}  // namespace ggwpd
