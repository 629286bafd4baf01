#pragma once

#include <optional>
#include <vector>

#include "ggwpd/assembly.hpp"
#include "ggwpd/continuation.hpp"

namespace ggwpd {

/// Everything needed to go from a wave packet to a swept, filtered and
/// assembled semiclassical wavefunction.
struct PipelineConfig {
    WavePacketParams wp{0.0, 20.0, cplx{32.0, 0.0}, 1.0};
    SystemParams sys{};
    /// Time in units of the centroid period.
    double t_over_tau = 3.0;
    double n_sigma = 5.0;
    /// Larger contours whose foliations contribute additional families.
    std::vector<double> outer_n_sigma{8.0};
    std::size_t contour_points = 4096;
    SweepOptions sweep{};
    /// Sweep anchor.
    double x0 = 0.0;
    /// Half-width of the window searched for the exposure flips of a pair.
    double caustic_window = 1.0;
    double relevance = 1e-12;
    unsigned threads = 0;

    void validate() const;
    double time() const;
};

/// Foliation sets at time t: the n_sigma contour first, then each outer one.
std::vector<FoliationSet> build_foliation_sets(const PipelineConfig& cfg, double t);

/// Monotone grid from `from` towards `to` in steps of dx; the last point is `to`.
std::vector<double> sweep_grid(double from, double to, double dx);

struct DirectionalSweep {
    int direction = 0;
    std::vector<double> grid;
    std::vector<SaddleFamily> families;
    std::vector<StokesPair> pairs;
};

struct WavefunctionRun {
    double t = 0.0;
    std::vector<FoliationSet> sets;
    std::vector<FamilyAnchor> anchors;
    /// Sweeps leaving x0, left first.
    std::vector<DirectionalSweep> sweeps;
    /// Increasing x.
    std::vector<double> x;
    std::vector<cplx> psi;
    /// Sorted labels of all families met by any sweep.
    std::vector<int> labels;
    /// parts[i][k]: contribution of family labels[k] at x[i] (zero when
    /// absent, Stokes-excluded or below the relevance cutoff).
    std::vector<std::vector<cplx>> parts;
    /// Caustic positions of all detected pairs.
    std::vector<double> caustics;
};

/// Anchors at cfg.x0, sweeps to x_min and x_max, applies the Stokes filter on
/// each side and sums the surviving contributions.
WavefunctionRun run_wavefunction(const PipelineConfig& cfg, double x_min, double x_max, double dx);

/// Same, on precomputed foliation sets at time t.
WavefunctionRun run_wavefunction(const PipelineConfig& cfg, std::vector<FoliationSet> sets, double t,
                                 double x_min, double x_max, double dx);

/// Pairs from all sweeps whose members are the given labels (either order).
std::optional<StokesPair> find_pair(const WavefunctionRun& run, int a, int b);

const SaddleFamily* find_family(const DirectionalSweep& sweep, int label);

struct ProfileOptions {
    /// Half-width of the running-maximum envelope of log10|psi|.
    double envelope_halfwidth = 0.25;
    /// Envelope slopes (decades per unit x) below this are flat.
    double plateau_slope = 1.0;
    /// Envelope decay rates above this are steep.
    double shoulder_slope = 3.0;
    double min_plateau_length = 1.0;
    /// Total envelope drop across the shoulder, in decades.
    double min_shoulder_drop = 2.0;
    /// Transitional stretch allowed between segments.
    double max_gap = 0.6;
    /// Depth (decades) of a local minimum of log10|psi| counted as a ripple.
    double min_ripple = 0.05;
    int min_ripples = 2;
};

struct ProfileSegment {
    enum class Kind { plateau, shoulder, other };
    Kind kind = Kind::other;
    double x_begin = 0.0;
    double x_end = 0.0;
    /// Envelope drop from begin to end, decades.
    double drop = 0.0;
    int ripples = 0;
    bool monotone = false;

    double length() const { return std::abs(x_end - x_begin); }
};

struct ProfileShape {
    bool found = false;
    std::vector<ProfileSegment> segments;
    /// Indices into segments of the detected plateau, shoulder, plateau.
    std::size_t first = 0;
    std::size_t shoulder = 0;
    std::size_t second = 0;
};

/// Looks for an oscillatory plateau, a monotone steep decay and a second
/// oscillatory plateau, in that order when moving along `direction` (+1 or -1)
/// from the first sample. x must be strictly increasing and uniformly spaced.
ProfileShape detect_plateau_shoulder_plateau(const std::vector<double>& x, const std::vector<cplx>& psi,
                                             int direction, const ProfileOptions& opts = {});

}  // namespace ggwpd
