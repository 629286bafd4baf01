#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ggwpd/commands.hpp"

namespace {

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiclassical wave packet propagation with complex saddle trajectories"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string x_range;
    std::optional<unsigned> threads;
    std::optional<double> t_over_tau;
    std::optional<double> n_sigma;
    std::optional<double> x;
    std::optional<std::uint64_t> seed;
    bool json_mirror = false;

    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--threads", threads, "Worker threads (0: all cores)");
    app.add_option("--t-over-tau", t_over_tau, "Propagation time in centroid periods");
    app.add_option("--nsigma", n_sigma, "Wigner contour size in standard deviations");
    auto* x_opt = app.add_option("--x", x, "Single evaluation position");
    app.add_option("--x-range", x_range, "Position range A:B or A:B:DX")->excludes(x_opt);
    app.add_option("--seed", seed, "Seed for sampling estimators");
    app.add_flag("--json", json_mirror, "Also write JSON mirrors of the tables");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"singmap", "Singular-trajectory map over the manifold coordinate"},
        {"foliate", "Propagate and segment the Wigner contour"},
        {"saddles", "Exposed saddles at one position or over a range"},
        {"sweep", "Continue saddle families through caustics and apply the Stokes filter"},
        {"wavefn", "Assemble the semiclassical wavefunction"},
        {"compare", "Compare against the split-operator solution, LWPD and the off-center sum"},
        {"overlap", "Semiclassical and quantum overlap with the bra packet"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    ggwpd::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = ggwpd::load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (threads) cfg.pipeline.threads = *threads;
        if (t_over_tau) cfg.pipeline.t_over_tau = *t_over_tau;
        if (n_sigma) cfg.pipeline.n_sigma = *n_sigma;
        if (x) cfg.x = *x;
        if (!x_range.empty()) ggwpd::apply_x_range(cfg, x_range);
        if (seed) cfg.seed = *seed;
        if (json_mirror) cfg.json = true;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        const auto summary = ggwpd::run_command(command, cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ofstream(cfg.out_dir / "run.log", std::ios::app)
            << timestamp() << ' ' << command << ' ' << secs << "s\n";
        std::cout << summary.dump(2) << '\n';
    } catch (const ggwpd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure in " << command << ": " << e.what() << '\n';
        return 3;
    }
    return 0;
}
