#include "ggwpd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ggwpd {

using nlohmann::json;

namespace {

/// Reads known keys from one JSON object and rejects the rest.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError("'" + name() + "' must be an object");
    }

    const json* find(const char* key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void number(const char* key, double& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_number()) throw ConfigError("'" + name(key) + "' must be a number");
            dst = v->get<double>();
        }
    }

    template <typename Int>
    void count(const char* key, Int& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_number_integer() || v->get<long long>() < 0) {
                throw ConfigError("'" + name(key) + "' must be a non-negative integer");
            }
            dst = static_cast<Int>(v->get<unsigned long long>());
        }
    }

    void flag(const char* key, bool& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError("'" + name(key) + "' must be true or false");
            dst = v->get<bool>();
        }
    }

    void text(const char* key, std::string& dst) {
        if (const auto* v = find(key)) {
            if (!v->is_string()) throw ConfigError("'" + name(key) + "' must be a string");
            dst = v->get<std::string>();
        }
    }

    std::optional<Section> sub(const char* key) {
        if (const auto* v = find(key)) return Section(*v, name(key));
        return std::nullopt;
    }

    void finish() const {
        for (const auto& item : obj_.items()) {
            if (!seen_.count(item.key())) throw ConfigError("unknown key '" + name(item.key()) + "'");
        }
    }

    std::string name(const std::string& key = {}) const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_packet(Section& s, WavePacketParams& wp, bool with_hbar) {
    double b_re = wp.width.real();
    double b_im = wp.width.imag();
    s.number("q", wp.q_center);
    s.number("p", wp.p_center);
    s.number("b_re", b_re);
    s.number("b_im", b_im);
    if (with_hbar) s.number("hbar", wp.hbar);
    wp.width = {b_re, b_im};
    s.finish();
}

json packet_json(const WavePacketParams& wp, bool with_hbar) {
    json j = {{"q", wp.q_center}, {"p", wp.p_center}, {"b_re", wp.width.real()}, {"b_im", wp.width.imag()}};
    if (with_hbar) j["hbar"] = wp.hbar;
    return j;
}

template <typename Fn>
void check(Fn&& fn) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    check([&] { pipeline.validate(); });
    check([&] { singmap.validate(); });
    if (bra) check([&] { bra->validate(); });
    if (!(dx > 0.0)) throw ConfigError("grid.dx must be > 0");
    if (!(x_min < x_max)) throw ConfigError("grid.x_min must be below grid.x_max");
    if (!(quantum.x_min < quantum.x_max)) throw ConfigError("quantum.x_min must be below quantum.x_max");
    if (quantum.points < 16) throw ConfigError("quantum.points must be at least 16");
    if (!(quantum.split.dt > 0.0)) throw ConfigError("quantum.dt must be > 0");
    if (quantum.split.order != 2 && quantum.split.order != 4) throw ConfigError("quantum.order must be 2 or 4");
    if (!(quantum.split.edge_tol > 0.0)) throw ConfigError("quantum.edge_tol must be > 0");
    if (!(compare.central_fraction > 0.0 && compare.central_fraction < 1.0)) {
        throw ConfigError("compare.central_fraction must lie in (0, 1)");
    }
    if (!(compare.tail_floor > 0.0 && compare.tail_floor < 1.0)) {
        throw ConfigError("compare.tail_floor must lie in (0, 1)");
    }
    if (!(compare.caustic_halfwidth >= 0.0)) throw ConfigError("compare.caustic_halfwidth must be >= 0");
    if (!(compare.envelope_halfwidth >= 0.0)) throw ConfigError("compare.envelope_halfwidth must be >= 0");
    if (lwpd_samples == 0) throw ConfigError("lwpd.samples must be positive");
    if (out_dir.empty()) throw ConfigError("output.dir must not be empty");
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    RunConfig cfg;
    auto& pc = cfg.pipeline;
    Section top(root, "");
    if (auto s = top.sub("wave_packet")) read_packet(*s, pc.wp, true);
    if (auto s = top.sub("system")) {
        std::string pot = pc.sys.potential == Potential::quartic ? "quartic" : "harmonic";
        s->text("potential", pot);
        if (pot == "quartic") {
            pc.sys.potential = Potential::quartic;
        } else if (pot == "harmonic") {
            pc.sys.potential = Potential::harmonic;
        } else {
            throw ConfigError("system.potential must be \"quartic\" or \"harmonic\"");
        }
        s->number("lambda", pc.sys.lambda);
        s->number("mass", pc.sys.mass);
        s->number("omega", pc.sys.omega);
        s->finish();
    }
    pc.sys.hbar = pc.wp.hbar;
    if (auto s = top.sub("time")) {
        s->number("t_over_tau", pc.t_over_tau);
        s->finish();
    }
    if (auto s = top.sub("contour")) {
        s->number("n_sigma", pc.n_sigma);
        s->count("points", pc.contour_points);
        if (const auto* v = s->find("outer_n_sigma")) {
            if (!v->is_array()) throw ConfigError("'contour.outer_n_sigma' must be an array of numbers");
            pc.outer_n_sigma.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) throw ConfigError("'contour.outer_n_sigma' must be an array of numbers");
                pc.outer_n_sigma.push_back(e.get<double>());
            }
        }
        s->finish();
    }
    if (auto s = top.sub("grid")) {
        if (const auto* v = s->find("x")) {
            if (v->is_null()) {
                cfg.x.reset();
            } else if (v->is_number()) {
                cfg.x = v->get<double>();
            } else {
                throw ConfigError("'grid.x' must be a number or null");
            }
        }
        s->number("x_min", cfg.x_min);
        s->number("x_max", cfg.x_max);
        s->number("dx", cfg.dx);
        s->number("x0", pc.x0);
        s->finish();
    }
    if (auto s = top.sub("newton")) {
        auto& n = pc.sweep.newton;
        s->number("tol", n.tol);
        s->count("max_iter", n.max_iter);
        s->number("step_clip", n.step_clip);
        s->number("dedup_radius", n.dedup_radius);
        s->count("max_backtracks", n.max_backtracks);
        s->finish();
    }
    if (auto s = top.sub("integrator")) {
        auto& io = pc.sweep.integrator;
        s->number("rel_tol", io.rel_tol);
        s->number("abs_tol", io.abs_tol);
        s->number("max_step", io.max_step);
        s->number("blowup_threshold", io.blowup_threshold);
        s->number("detour_factor", io.detour_factor);
        s->finish();
    }
    if (auto s = top.sub("sweep")) {
        s->number("min_dx", pc.sweep.min_dx);
        s->flag("retest_exposure", pc.sweep.retest_exposure);
        s->flag("discover", pc.sweep.discover);
        s->number("caustic_window", pc.caustic_window);
        s->number("relevance", pc.relevance);
        s->finish();
    }
    if (auto s = top.sub("singmap")) {
        auto& w = cfg.singmap;
        s->number("re_min", w.re_min);
        s->number("re_max", w.re_max);
        s->number("im_min", w.im_min);
        s->number("im_max", w.im_max);
        s->count("n_re", w.n_re);
        s->count("n_im", w.n_im);
        s->finish();
    }
    if (auto s = top.sub("quantum")) {
        auto& q = cfg.quantum;
        s->number("x_min", q.x_min);
        s->number("x_max", q.x_max);
        s->count("points", q.points);
        s->number("dt", q.split.dt);
        s->count("order", q.split.order);
        s->number("edge_tol", q.split.edge_tol);
        s->finish();
    }
    if (auto s = top.sub("compare")) {
        auto& c = cfg.compare;
        s->number("central_fraction", c.central_fraction);
        s->number("tail_floor", c.tail_floor);
        s->number("caustic_halfwidth", c.caustic_halfwidth);
        s->number("envelope_halfwidth", c.envelope_halfwidth);
        s->finish();
    }
    if (auto s = top.sub("bra")) {
        WavePacketParams bra = pc.wp;
        read_packet(*s, bra, false);
        cfg.bra = bra;
    }
    if (auto s = top.sub("overlap")) {
        s->flag("quantum", cfg.overlap_quantum);
        s->finish();
    }
    if (auto s = top.sub("lwpd")) {
        s->count("samples", cfg.lwpd_samples);
        s->count("seed", cfg.seed);
        s->finish();
    }
    if (auto s = top.sub("output")) {
        std::string dir = cfg.out_dir.string();
        s->text("dir", dir);
        cfg.out_dir = dir;
        s->flag("json", cfg.json);
        s->finish();
    }
    top.count("threads", pc.threads);
    top.finish();
    if (cfg.bra) cfg.bra->hbar = pc.wp.hbar;
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
    const auto& pc = cfg.pipeline;
    const auto& n = pc.sweep.newton;
    const auto& io = pc.sweep.integrator;
    json j;
    j["wave_packet"] = packet_json(pc.wp, true);
    j["system"] = {{"potential", pc.sys.potential == Potential::quartic ? "quartic" : "harmonic"},
                   {"lambda", pc.sys.lambda},
                   {"mass", pc.sys.mass},
                   {"omega", pc.sys.omega}};
    j["time"] = {{"t_over_tau", pc.t_over_tau}};
    j["contour"] = {{"n_sigma", pc.n_sigma}, {"points", pc.contour_points}, {"outer_n_sigma", pc.outer_n_sigma}};
    j["grid"] = {{"x", cfg.x ? json(*cfg.x) : json(nullptr)},
                 {"x_min", cfg.x_min},
                 {"x_max", cfg.x_max},
                 {"dx", cfg.dx},
                 {"x0", pc.x0}};
    j["newton"] = {{"tol", n.tol},
                   {"max_iter", n.max_iter},
                   {"step_clip", n.step_clip},
                   {"dedup_radius", n.dedup_radius},
                   {"max_backtracks", n.max_backtracks}};
    j["integrator"] = {{"rel_tol", io.rel_tol},
                       {"abs_tol", io.abs_tol},
                       {"max_step", io.max_step},
                       {"blowup_threshold", io.blowup_threshold},
                       {"detour_factor", io.detour_factor}};
    j["sweep"] = {{"min_dx", pc.sweep.min_dx},
                  {"retest_exposure", pc.sweep.retest_exposure},
                  {"discover", pc.sweep.discover},
                  {"caustic_window", pc.caustic_window},
                  {"relevance", pc.relevance}};
    const auto& w = cfg.singmap;
    j["singmap"] = {{"re_min", w.re_min}, {"re_max", w.re_max}, {"im_min", w.im_min},
                    {"im_max", w.im_max}, {"n_re", w.n_re},     {"n_im", w.n_im}};
    const auto& q = cfg.quantum;
    j["quantum"] = {{"x_min", q.x_min},       {"x_max", q.x_max},       {"points", q.points},
                    {"dt", q.split.dt}, {"order", q.split.order}, {"edge_tol", q.split.edge_tol}};
    const auto& c = cfg.compare;
    j["compare"] = {{"central_fraction", c.central_fraction},
                    {"tail_floor", c.tail_floor},
                    {"caustic_halfwidth", c.caustic_halfwidth},
                    {"envelope_halfwidth", c.envelope_halfwidth}};
    j["bra"] = packet_json(cfg.bra_packet(), false);
    j["overlap"] = {{"quantum", cfg.overlap_quantum}};
    j["lwpd"] = {{"samples", cfg.lwpd_samples}, {"seed", cfg.seed}};
    j["output"] = {{"dir", cfg.out_dir.string()}, {"json", cfg.json}};
    j["threads"] = pc.threads;
    return j.dump(2) + "\n";
}

void apply_x_range(RunConfig& cfg, const std::string& spec) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--x-range expects A:B or A:B:DX, got '" + spec + "'");
        }
    }
    if (parts.size() != 2 && parts.size() != 3) throw ConfigError("--x-range expects A:B or A:B:DX, got '" + spec + "'");
    cfg.x_min = parts[0];
    cfg.x_max = parts[1];
    if (parts.size() == 3) cfg.dx = parts[2];
    cfg.x.reset();
    if (!(cfg.x_min < cfg.x_max)) throw ConfigError("--x-range needs A < B");
    if (!(cfg.dx > 0.0)) throw ConfigError("--x-range step must be > 0");
}

}  // namespace ggwpd
