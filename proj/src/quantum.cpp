#include "ggwpd/quantum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>

namespace ggwpd {

namespace {

static_assert(std::endian::native == std::endian::little, "binary grid I/O assumes a little-endian host");

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// In-place forward/backward transforms on one buffer. FFTW planning is not
// thread-safe, execution is.
class FftPair {
public:
    explicit FftPair(std::vector<cplx>& buf) : buf_(buf) {
        auto* data = reinterpret_cast<fftw_complex*>(buf.data());
        const int n = static_cast<int>(buf.size());
        std::lock_guard lock(planner_mutex());
        fwd_ = fftw_plan_dft_1d(n, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(n, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~FftPair() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    FftPair(const FftPair&) = delete;
    FftPair& operator=(const FftPair&) = delete;

    void forward() { fftw_execute(fwd_); }
    /// Unnormalized; callers fold 1/n into their multipliers.
    void backward() { fftw_execute(bwd_); }

private:
    std::vector<cplx>& buf_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

std::vector<double> wavenumbers(std::size_t n, double dx) {
    std::vector<double> k(n);
    const double dk = 2.0 * std::numbers::pi / (static_cast<double>(n) * dx);
    for (std::size_t j = 0; j < n; ++j) {
        const auto js = static_cast<double>(j);
        k[j] = (j < n / 2 ? js : js - static_cast<double>(n)) * dk;
    }
    return k;
}

double real_potential(double x, const SystemParams& sys) { return potential(cplx{x, 0.0}, sys).real(); }

void check_edges(const GridWavefunction& psi, double tol) {
    const std::size_t m = std::min<std::size_t>(4, psi.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        worst = std::max({worst, std::abs(psi.values[k]), std::abs(psi.values[psi.size() - 1 - k])});
    }
    if (worst > tol) {
        std::ostringstream msg;
        msg << "wavefunction reaches the grid edge (|psi| = " << worst << " > " << tol
            << "); enlarge the domain";
        throw DomainError(msg.str());
    }
}

void check_same_grid(const GridWavefunction& a, const GridWavefunction& b) {
    if (a.size() != b.size() || std::abs(a.x_min - b.x_min) > 1e-12 * std::max(1.0, std::abs(a.x_min)) ||
        std::abs(a.dx - b.dx) > 1e-12 * a.dx) {
        throw std::invalid_argument("wavefunctions live on different grids");
    }
}

}  // namespace

double GridWavefunction::norm() const {
    double s = 0.0;
    for (const auto& v : values) s += std::norm(v);
    return s * dx;
}

cplx GridWavefunction::interpolate(double xv) const {
    const double f = (xv - x_min) / dx;
    if (f < 0.0 || f > static_cast<double>(size() - 1)) return 0.0;
    auto i = static_cast<std::ptrdiff_t>(std::floor(f));
    i = std::clamp<std::ptrdiff_t>(i - 1, 0, static_cast<std::ptrdiff_t>(size()) - 4);
    const double s = f - static_cast<double>(i);
    cplx out = 0.0;
    for (int a = 0; a < 4; ++a) {
        double w = 1.0;
        for (int b = 0; b < 4; ++b) {
            if (b != a) w *= (s - b) / static_cast<double>(a - b);
        }
        out += w * values[static_cast<std::size_t>(i + a)];
    }
    return out;
}

GridWavefunction GridWavefunction::from_packet(const WavePacketParams& wp, double x_min, double x_max,
                                               std::size_t n) {
    if (n < 8) throw std::invalid_argument("grid needs at least 8 points");
    if (!(x_max > x_min)) throw std::invalid_argument("grid requires x_max > x_min");
    wp.validate();
    GridWavefunction g;
    g.x_min = x_min;
    g.dx = (x_max - x_min) / static_cast<double>(n);
    g.hbar = wp.hbar;
    g.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) g.values[k] = wavepacket_eval(g.x(k), wp);
    return g;
}

GridWavefunction split_operator_propagate(const GridWavefunction& psi0, double t,
                                          const SystemParams& sys, const SplitOperatorOptions& opts) {
    sys.validate();
    if (t < 0.0) throw std::invalid_argument("propagation time must be non-negative");
    if (!(opts.dt > 0.0)) throw std::invalid_argument("time step must be positive");
    if (opts.order != 2 && opts.order != 4) throw std::invalid_argument("splitting order must be 2 or 4");
    if (std::abs(psi0.hbar - sys.hbar) > 1e-14) throw std::invalid_argument("hbar of grid and system differ");
    check_edges(psi0, opts.edge_tol);
    GridWavefunction psi = psi0;
    if (t == 0.0) return psi;

    const std::size_t n = psi.size();
    const auto steps = static_cast<std::size_t>(std::ceil(t / opts.dt - 1e-9));
    const double dt = t / static_cast<double>(steps);
    const double h = sys.hbar;
    const auto k = wavenumbers(n, psi.dx);
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = real_potential(psi.x(j), sys);

    // Strang substeps of length w * dt.
    std::vector<double> weights;
    if (opts.order == 2) {
        weights = {1.0};
    } else {
        const double c = std::cbrt(2.0);
        weights = {1.0 / (2.0 - c), -c / (2.0 - c), 1.0 / (2.0 - c)};
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    auto kinetic = [&](double tau) {
        std::vector<cplx> out(n);
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = std::polar(inv_n, -h * k[j] * k[j] * tau / (2.0 * sys.mass));
        }
        return out;
    };
    auto potential_phase = [&](double tau) {
        std::vector<cplx> out(n);
        for (std::size_t j = 0; j < n; ++j) out[j] = std::polar(1.0, -v[j] * tau / h);
        return out;
    };
    std::vector<std::vector<cplx>> kin;
    for (double w : weights) kin.push_back(kinetic(w * dt));
    // Consecutive half potential steps merge; the sequence of potential
    // kicks is: half(w0), then (w_i + w_{i+1})/2, ..., half(w_last).
    std::vector<std::vector<cplx>> kicks;
    kicks.push_back(potential_phase(0.5 * weights.front() * dt));
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
        kicks.push_back(potential_phase(0.5 * (weights[i] + weights[i + 1]) * dt));
    }
    const auto wrap_kick = potential_phase(0.5 * (weights.back() + weights.front()) * dt);
    const auto last_kick = potential_phase(0.5 * weights.back() * dt);

    auto& buf = psi.values;
    FftPair fft(buf);
    auto apply = [&](const std::vector<cplx>& mult) {
        for (std::size_t j = 0; j < n; ++j) buf[j] *= mult[j];
    };
    apply(kicks[0]);
    const std::size_t check_every = 2048;
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (i > 0) apply(kicks[i]);
            fft.forward();
            apply(kin[i]);
            fft.backward();
        }
        apply(s + 1 < steps ? wrap_kick : last_kick);
        if ((s + 1) % check_every == 0) check_edges(psi, opts.edge_tol);
    }
    check_edges(psi, opts.edge_tol);
    return psi;
}

Expectations expectation_values(const GridWavefunction& psi, const SystemParams& sys) {
    const std::size_t n = psi.size();
    Expectations e;
    const double nrm = psi.norm();
    double pot = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double w = std::norm(psi.values[j]) * psi.dx;
        e.position += w * psi.x(j);
        pot += w * real_potential(psi.x(j), sys);
    }
    std::vector<cplx> buf = psi.values;
    {
        FftPair fft(buf);
        fft.forward();
    }
    const auto k = wavenumbers(n, psi.dx);
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double w = std::norm(buf[j]);
        s0 += w;
        s1 += w * k[j];
        s2 += w * k[j] * k[j];
    }
    const double h = psi.hbar;
    e.position /= nrm;
    e.momentum = h * s1 / s0;
    e.energy = h * h * s2 / (2.0 * sys.mass * s0) + pot / nrm;
    return e;
}

cplx overlap_numeric(const GridWavefunction& a, const GridWavefunction& b) {
    check_same_grid(a, b);
    cplx s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += std::conj(a.values[j]) * b.values[j];
    return s * a.dx;
}

double l2_distance(const GridWavefunction& a, const GridWavefunction& b) {
    check_same_grid(a, b);
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += std::norm(a.values[j] - b.values[j]);
    return std::sqrt(s * a.dx);
}

CompareReport compare_metrics(const std::vector<double>& x, const std::vector<cplx>& psi_sc,
                              const GridWavefunction& psi_q, const std::vector<double>& caustics,
                              const CompareOptions& opts) {
    if (x.size() != psi_sc.size()) throw std::invalid_argument("x and psi_sc sizes differ");
    if (!std::is_sorted(x.begin(), x.end())) throw std::invalid_argument("x must be increasing");
    const std::size_t n = x.size();
    CompareReport rep;
    if (n < 2) return rep;

    std::vector<cplx> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = psi_q.interpolate(x[i]);
    double qmax = 0.0;
    for (const auto& v : psi_q.values) qmax = std::max(qmax, std::abs(v));

    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = i > 0 ? x[i - 1] : x[i];
        const double hi = i + 1 < n ? x[i + 1] : x[i];
        w[i] = 0.5 * (hi - lo);
    }
    auto excluded = [&](double xv) {
        return std::any_of(caustics.begin(), caustics.end(),
                           [&](double c) { return std::abs(xv - c) <= opts.caustic_halfwidth; });
    };
    auto envelope = [&](const auto& get) {
        std::vector<double> env(n, 0.0);
        std::size_t lo = 0;
        std::size_t hi = 0;
        for (std::size_t i = 0; i < n; ++i) {
            while (x[lo] < x[i] - opts.envelope_halfwidth) ++lo;
            while (hi + 1 < n && x[hi + 1] <= x[i] + opts.envelope_halfwidth) ++hi;
            double m = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) m = std::max(m, get(j));
            env[i] = m;
        }
        return env;
    };
    const auto env_q = envelope([&](std::size_t j) { return std::abs(q[j]); });
    const auto env_sc = envelope([&](std::size_t j) { return std::abs(psi_sc[j]); });

    double g_num = 0.0;
    double g_den = 0.0;
    double c_num = 0.0;
    double c_den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d2 = std::norm(psi_sc[i] - q[i]) * w[i];
        g_num += d2;
        g_den += std::norm(q[i]) * w[i];
        if (excluded(x[i])) {
            ++rep.n_excluded;
            continue;
        }
        if (std::abs(q[i]) > opts.central_fraction * qmax) {
            ++rep.n_central;
            c_num += d2;
            c_den += std::norm(q[i]) * w[i];
        } else if (env_q[i] >= opts.tail_floor * qmax) {
            ++rep.n_tail;
            const double err = env_sc[i] > 0.0 ? std::abs(std::log10(env_sc[i] / env_q[i]))
                                                : std::numeric_limits<double>::infinity();
            if (err > rep.tail_log_error) {
                rep.tail_log_error = err;
                rep.tail_worst_x = x[i];
            }
        }
    }
    rep.global_l2 = g_den > 0.0 ? std::sqrt(g_num / g_den) : 0.0;
    rep.central_l2 = c_den > 0.0 ? std::sqrt(c_num / c_den) : 0.0;
    return rep;
}

void write_grid_csv(const GridWavefunction& psi, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "x,re,im\n" << std::setprecision(17);
    for (std::size_t j = 0; j < psi.size(); ++j) {
        out << psi.x(j) << ',' << psi.values[j].real() << ',' << psi.values[j].imag() << '\n';
    }
}

GridWavefunction read_grid_csv(const std::filesystem::path& path, double hbar) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<double> xs;
    GridWavefunction g;
    g.hbar = hbar;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        double xv = 0.0;
        double re = 0.0;
        double im = 0.0;
        char c1 = 0;
        char c2 = 0;
        if (!(row >> xv >> c1 >> re >> c2 >> im) || c1 != ',' || c2 != ',') {
            throw std::runtime_error("malformed grid row: " + line);
        }
        xs.push_back(xv);
        g.values.emplace_back(re, im);
    }
    if (xs.size() < 2) throw std::runtime_error("grid file has fewer than two rows");
    g.x_min = xs.front();
    g.dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    return g;
}

void write_grid_binary(const GridWavefunction& psi, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::uint64_t n = psi.size();
    out.write(reinterpret_cast<const char*>(&psi.x_min), sizeof(double));
    out.write(reinterpret_cast<const char*>(&psi.dx), sizeof(double));
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(psi.values.data()),
              static_cast<std::streamsize>(n * 2 * sizeof(double)));
}

GridWavefunction read_grid_binary(const std::filesystem::path& path, double hbar) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    GridWavefunction g;
    g.hbar = hbar;
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&g.x_min), sizeof(double));
    in.read(reinterpret_cast<char*>(&g.dx), sizeof(double));
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n > (1ull << 32)) throw std::runtime_error("corrupt grid header in " + path.string());
    g.values.resize(n);
    in.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(n * 2 * sizeof(double)));
    if (!in) throw std::runtime_error("truncated grid file " + path.string());
    return g;
}

}  // namespace ggwpd
