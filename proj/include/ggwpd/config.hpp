#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "ggwpd/pipeline.hpp"
#include "ggwpd/quantum.hpp"

namespace ggwpd {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QuantumGrid {
    double x_min = -30.0;
    double x_max = 30.0;
    std::size_t points = 16384;
    SplitOperatorOptions split{};
};

/// Complete run configuration. JSON layout (all keys optional, unknown keys
/// rejected):
///
///   wave_packet: q, p, b_re, b_im, hbar
///   system:      potential ("quartic" | "harmonic"), lambda, mass, omega
///   time:        t_over_tau
///   contour:     n_sigma, points, outer_n_sigma (array)
///   grid:        x (number or null), x_min, x_max, dx, x0
///   newton:      tol, max_iter, step_clip, dedup_radius, max_backtracks
///   integrator:  rel_tol, abs_tol, max_step, blowup_threshold, detour_factor
///   sweep:       min_dx, retest_exposure, discover, caustic_window, relevance
///   singmap:     re_min, re_max, im_min, im_max, n_re, n_im
///   quantum:     x_min, x_max, points, dt, order, edge_tol
///   compare:     central_fraction, tail_floor, caustic_halfwidth, envelope_halfwidth
///   bra:         q, p, b_re, b_im          (defaults to the wave packet)
///   overlap:     quantum (bool)
///   lwpd:        samples, seed
///   output:      dir, json (bool)
///   threads
///
/// hbar is shared by the packet, bra and system.
struct RunConfig {
    PipelineConfig pipeline{};
    /// Single evaluation point for `saddles`; empty means use the range.
    std::optional<double> x = 0.0;
    double x_min = -16.0;
    double x_max = 16.0;
    double dx = 0.02;
    MapWindow singmap{};
    QuantumGrid quantum{};
    CompareOptions compare{};
    std::optional<WavePacketParams> bra;
    bool overlap_quantum = true;
    std::size_t lwpd_samples = 200000;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "out";
    bool json = false;

    /// Throws ConfigError naming the offending option.
    void validate() const;
    WavePacketParams bra_packet() const { return bra.value_or(pipeline.wp); }
};

/// Parses JSON text on top of the defaults. Throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Resolved configuration as JSON (keys in the documented layout).
std::string dump_config(const RunConfig& cfg);

/// Parses "A:B" or "A:B:DX" into cfg's range. Throws ConfigError.
void apply_x_range(RunConfig& cfg, const std::string& spec);

}  // namespace ggwpd
