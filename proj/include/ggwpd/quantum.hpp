#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "ggwpd/dynamics.hpp"
#include "ggwpd/wave_packet.hpp"

namespace ggwpd {

/// Wavefunction sampled on the uniform periodic grid x_k = x_min + k dx.
struct GridWavefunction {
    double x_min = 0.0;
    double dx = 1.0;
    std::vector<cplx> values;
    double hbar = 1.0;

    std::size_t size() const { return values.size(); }
    double x(std::size_t k) const { return x_min + static_cast<double>(k) * dx; }
    double x_max() const { return x(size() - 1); }
    double norm() const;
    /// Four-point Lagrange interpolation; zero outside the grid.
    cplx interpolate(double x) const;

    static GridWavefunction from_packet(const WavePacketParams& wp, double x_min, double x_max,
                                        std::size_t n);
};

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SplitOperatorOptions {
    double dt = 5e-4;
    /// 2: Strang splitting. 4: fourth-order triple-jump composition of Strang steps.
    int order = 4;
    /// Largest |psi| tolerated at either grid edge.
    double edge_tol = 1e-10;
};

/// Spectral split-operator propagation of i h d/dt psi = (p^2/2m + V) psi.
/// dt is shrunk so that an integer number of steps reaches t.
GridWavefunction split_operator_propagate(const GridWavefunction& psi0, double t,
                                          const SystemParams& sys,
                                          const SplitOperatorOptions& opts = {});

struct Expectations {
    double position = 0.0;
    double momentum = 0.0;
    double energy = 0.0;
};

/// <x>, <p>, <H> with spectral derivatives.
Expectations expectation_values(const GridWavefunction& psi, const SystemParams& sys);

/// Trapezoid inner product <a|b> on a common grid.
cplx overlap_numeric(const GridWavefunction& a, const GridWavefunction& b);

/// L2 distance on a common grid.
double l2_distance(const GridWavefunction& a, const GridWavefunction& b);

struct CompareOptions {
    double central_fraction = 0.1;
    double tail_floor = 1e-6;
    double caustic_halfwidth = 0.5;
    /// Half-width of the running-maximum envelope used for the tail metric.
    double envelope_halfwidth = 0.25;
};

struct CompareReport {
    double global_l2 = 0.0;
    double central_l2 = 0.0;
    /// Largest |log10 env(psi_sc) - log10 env(psi_q)| over the tail samples.
    double tail_log_error = 0.0;
    /// x where the tail error is attained.
    double tail_worst_x = 0.0;
    std::size_t n_central = 0;
    std::size_t n_tail = 0;
    std::size_t n_excluded = 0;
};

/// Compares a semiclassical table (uniform or not, increasing x) against the
/// quantum grid. Central samples have |psi_q| > central_fraction * max; tail
/// samples are the rest whose quantum envelope is at least tail_floor * max.
/// Samples within caustic_halfwidth of any caustic are excluded from both.
CompareReport compare_metrics(const std::vector<double>& x, const std::vector<cplx>& psi_sc,
                              const GridWavefunction& psi_q, const std::vector<double>& caustics,
                              const CompareOptions& opts = {});

void write_grid_csv(const GridWavefunction& psi, const std::filesystem::path& path);
GridWavefunction read_grid_csv(const std::filesystem::path& path, double hbar = 1.0);

/// Binary layout, little-endian: f64 x_min, f64 dx, u64 n, then n pairs of f64 (re, im).
void write_grid_binary(const GridWavefunction& psi, const std::filesystem::path& path);
GridWavefunction read_grid_binary(const std::filesystem::path& path, double hbar = 1.0);

}  // namespace ggwpd
