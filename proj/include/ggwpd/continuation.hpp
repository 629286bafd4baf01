#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ggwpd/saddle.hpp"

namespace ggwpd {

/// A foliation set used for exposure tests and discovery: contour plus its
/// segmentation.
struct FoliationSet {
    EvolvedContour contour;
    std::vector<Foliation> foliations;
};

/// Which foliation a family belongs to.
struct FoliationRef {
    std::size_t set = 0;
    int label = 0;
};

struct FamilySample {
    double x = 0.0;
    Saddle saddle;
    /// Complex action W (contribution ~ exp(i W / h)), including the
    /// initial-state exponent of the complex start.
    cplx action;
    Exposure exposure = Exposure::exposed;
    bool stokes_excluded = false;
};

struct SaddleFamily {
    int label = 0;
    FoliationRef foliation;
    /// Ordered along the sweep direction.
    std::vector<FamilySample> samples;
    std::optional<double> caustic_x;
    std::optional<double> stokes_x;
    bool terminated = false;
    std::string termination_reason;

    /// Sample at grid position x, if the family reached it.
    const FamilySample* at(double x) const;
};

struct SweepOptions {
    NewtonOptions newton{};
    IntegratorOptions integrator{};
    /// Smallest continuation substep before a family is terminated.
    double min_dx = 1e-7;
    /// Re-test exposure from the foliation references at every sample.
    bool retest_exposure = true;
    /// Start new families from exposed saddles of the foliation sets that no
    /// existing family accounts for.
    bool discover = true;
};

/// Seed for a family: a converged saddle at the first grid point.
struct FamilyAnchor {
    int label = 0;
    FoliationRef foliation;
    Saddle saddle;
};

/// Exposed saddles at x0 from every foliation set; the first set's saddles keep
/// their foliation labels, saddles new in later sets are labelled
/// consecutively after the first set's largest label by increasing energy.
std::vector<FamilyAnchor> anchor_families(const std::vector<FoliationSet>& sets, double x0,
                                          const WavePacketParams& wp, const SweepOptions& opts,
                                          unsigned threads = 0);

/// Whether a real-seeded search from any covering branch of the foliation
/// reaches u0.
bool is_exposed(const FoliationSet& set, int foliation_label, const Saddle& s, const WavePacketParams& wp,
                const SweepOptions& opts);

/// Continues each anchor along x_grid (monotone, starting at the anchors' x)
/// with a first-order predictor u + dx / F' and Newton correction, halving
/// substeps on failure. The log-Jacobian branch is continued between samples.
std::vector<SaddleFamily> sweep_saddles(const std::vector<FamilyAnchor>& anchors,
                                        const std::vector<double>& x_grid,
                                        const std::vector<FoliationSet>& sets, const WavePacketParams& wp,
                                        const SweepOptions& opts, unsigned threads = 0);

struct Caustic {
    double x = 0.0;
    double gap = 0.0;
};

/// Interior local minimum of |u1 - u2| over the common grid where both
/// families flip exposure within `window` of it.
std::optional<Caustic> detect_caustic(const SaddleFamily& f1, const SaddleFamily& f2, double window = 1.0);

struct StokesResult {
    bool resolved = false;
    int kept = 0;
    int excluded = 0;
    double x_cross = 0.0;
    /// +1 if the forbidden side is x > x_cross, -1 otherwise.
    int forbidden_side = 0;
};

/// Finds the Re W crossing near the caustic, and on the forbidden side marks
/// excluded the member whose Im W decreases away from the caustic.
StokesResult stokes_filter(SaddleFamily& f1, SaddleFamily& f2, const Caustic& caustic, double window = 1.0);

struct StokesPair {
    int label_a = 0;
    int label_b = 0;
    Caustic caustic;
    StokesResult result;
};

/// detect_caustic + stokes_filter on every pair; returns the resolved and
/// unresolved pairs found.
std::vector<StokesPair> apply_stokes(std::vector<SaddleFamily>& families, double window = 1.0);

/// Raster of Re q_t over a rectangle of manifold coordinates.
struct SingularityMap {
    double re_min = -8.0;
    double re_max = 8.0;
    double im_min = -1.0;
    double im_max = 1.0;
    std::size_t n_re = 0;
    std::size_t n_im = 0;
    double t = 0.0;
    /// Row-major over (im, re); 1 = singular.
    std::vector<std::uint8_t> singular;
    std::vector<double> re_x;

    double d_re() const { return (re_max - re_min) / static_cast<double>(n_re); }
    double d_im() const { return (im_max - im_min) / static_cast<double>(n_im); }
    cplx center(std::size_t i_re, std::size_t i_im) const;
    std::optional<std::pair<std::size_t, std::size_t>> cell_of(cplx u) const;
    bool is_singular(std::size_t i_re, std::size_t i_im) const { return singular[i_im * n_re + i_re] != 0; }
    std::size_t singular_count() const;
};

struct MapWindow {
    double re_min = -8.0;
    double re_max = 8.0;
    double im_min = -1.0;
    double im_max = 1.0;
    std::size_t n_re = 1000;
    std::size_t n_im = 1000;

    void validate() const;
};

/// Integrates on the real time axis only (detour_factor is ignored).
SingularityMap grid_singularity_map(const MapWindow& window, double t, const WavePacketParams& wp,
                                    const SystemParams& sys, const IntegratorOptions& opts,
                                    unsigned threads = 0);

/// True iff the vertical segment from u0 to the real axis meets no singular
/// cell; empty when the segment leaves the map window.
std::vector<std::optional<bool>> classical_zone_check(const std::vector<cplx>& u0, const SingularityMap& map);

}  // namespace ggwpd
