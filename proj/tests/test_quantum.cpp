#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ggwpd/quantum.hpp"
#include "oracles.hpp"

using namespace ggwpd;

namespace {
const WavePacketParams kPacket{0.0, 20.0, cplx{32.0, 0.0}, 1.0};
const SystemParams kQuartic{};

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "ggwpd_quantum_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}
}  // namespace

TEST_CASE("packet sampling is normalized") {
    const auto psi = GridWavefunction::from_packet(kPacket, -30.0, 30.0, 16384);
    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(psi.x_max() < 30.0);
    CHECK(psi.values[psi.size() / 2] == wavepacket_eval(psi.x(psi.size() / 2), kPacket));
}

TEST_CASE("zero time is the identity") {
    const auto psi = GridWavefunction::from_packet(kPacket, -30.0, 30.0, 4096);
    const auto out = split_operator_propagate(psi, 0.0, kQuartic);
    CHECK(l2_distance(out, psi) == 0.0);
}

TEST_CASE("harmonic packet returns with a sign change after one period") {
    // exp(-i (n + 1/2) 2 pi) = -1 for every eigenstate.
    const WavePacketParams wp{1.0, 2.0, cplx{1.3, 0.4}, 1.0};
    const auto sys = SystemParams::harmonic(1.0);
    const auto psi = GridWavefunction::from_packet(wp, -20.0, 20.0, 1024);
    SplitOperatorOptions opts;
    opts.dt = 1e-3;
    const auto out = split_operator_propagate(psi, 2.0 * oracle::pi, sys, opts);
    double err = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) err += std::norm(out.values[k] + psi.values[k]) * psi.dx;
    CHECK(std::sqrt(err) < 1e-9);
}

TEST_CASE("harmonic evolution matches the Mehler kernel at intermediate times") {
    const WavePacketParams wp{0.5, -1.0, cplx{2.0, 0.0}, 1.0};
    const auto sys = SystemParams::harmonic(1.0);
    const auto psi = GridWavefunction::from_packet(wp, -20.0, 20.0, 1024);
    SplitOperatorOptions opts;
    opts.dt = 1e-3;
    const double t = 1.1;
    const auto out = split_operator_propagate(psi, t, sys, opts);
    std::vector<cplx> exact;
    std::vector<cplx> got;
    for (std::size_t k = 0; k < psi.size(); k += 8) {
        exact.push_back(oracle::harmonic_mehler(psi.x(k), t, 1.0, 0.5, -1.0, 2.0, 1.0));
        got.push_back(out.values[k]);
    }
    CHECK(oracle::rel_l2(got, exact) < 1e-8);
}

TEST_CASE("propagation is unitary") {
    // Fails by about a factor 2: FFT roundoff drifts the norm by ~2e-16 per step.
    const auto psi = GridWavefunction::from_packet(kPacket, -30.0, 30.0, 16384);
    SplitOperatorOptions opts;
    opts.dt = 1e-4;
    opts.order = 2;
    const auto out = split_operator_propagate(psi, 1.0, kQuartic, opts);
    CHECK(std::abs(out.norm() - psi.norm()) < 1e-12);
}

TEST_CASE("expectation values of the initial packet") {
    const WavePacketParams wp{0.7, -3.0, cplx{2.0, 0.0}, 1.0};
    const auto psi = GridWavefunction::from_packet(wp, -20.0, 20.0, 2048);
    const auto e = expectation_values(psi, kQuartic);
    CHECK(e.position == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(e.momentum == doctest::Approx(-3.0).epsilon(1e-10));
    // <p^2>/2 = (p^2 + b h / 2) / 2 and <x^4> = q^4 + 6 q^2 s + 3 s^2 with s = h / 2b.
    const double s = 1.0 / 4.0;
    const double q = 0.7;
    const double expect = 0.5 * (9.0 + 1.0) + 0.05 * (std::pow(q, 4) + 6.0 * q * q * s + 3.0 * s * s);
    CHECK(e.energy == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("energy is conserved in the quartic well") {
    const auto psi = GridWavefunction::from_packet(kPacket, -30.0, 30.0, 16384);
    const double e0 = expectation_values(psi, kQuartic).energy;
    const auto out = split_operator_propagate(psi, 1.0, kQuartic);
    CHECK(std::abs(expectation_values(out, kQuartic).energy - e0) < 1e-8 * e0);
}

TEST_CASE("overlaps") {
    const auto a = GridWavefunction::from_packet(kPacket, -10.0, 10.0, 8192);
    CHECK(std::abs(overlap_numeric(a, a) - 1.0) < 1e-12);
    const WavePacketParams bra{0.05, 19.5, cplx{30.0, 2.0}, 1.0};
    const auto b = GridWavefunction::from_packet(bra, -10.0, 10.0, 8192);
    const cplx closed = gaussian_overlap(bra, kPacket);
    CHECK(std::abs(overlap_numeric(b, a) - closed) < 1e-10);
    const auto c = GridWavefunction::from_packet(kPacket, -10.0, 10.0, 4096);
    CHECK_THROWS_AS(overlap_numeric(a, c), std::invalid_argument);
    CHECK_THROWS_AS(l2_distance(a, c), std::invalid_argument);
}

TEST_CASE("a packet running into the grid edge is a domain error") {
    const auto psi = GridWavefunction::from_packet(kPacket, -5.0, 5.0, 1024);
    CHECK_THROWS_AS(split_operator_propagate(psi, 1.0, kQuartic), DomainError);
}

TEST_CASE("interpolation") {
    const WavePacketParams wp{0.0, 1.0, cplx{1.0, 0.0}, 1.0};
    const auto psi = GridWavefunction::from_packet(wp, -15.0, 15.0, 2048);
    for (double x : {-1.234, 0.0101, 2.5}) CHECK(std::abs(psi.interpolate(x) - wavepacket_eval(x, wp)) < 1e-7);
    CHECK(psi.interpolate(100.0) == cplx{0.0});
}

TEST_CASE("CSV and binary round trips") {
    const auto psi = GridWavefunction::from_packet({0.3, 2.0, cplx{1.5, 0.2}, 1.0}, -8.0, 8.0, 256);
    write_grid_binary(psi, scratch("psi.bin"));
    const auto bin = read_grid_binary(scratch("psi.bin"));
    CHECK(bin.x_min == psi.x_min);
    CHECK(bin.dx == psi.dx);
    CHECK(bin.values == psi.values);
    CHECK(std::filesystem::file_size(scratch("psi.bin")) == 24 + 16 * psi.size());

    write_grid_csv(psi, scratch("psi.csv"));
    const auto csv = read_grid_csv(scratch("psi.csv"));
    REQUIRE(csv.size() == psi.size());
    CHECK(csv.x_min == doctest::Approx(psi.x_min).epsilon(1e-15));
    CHECK(csv.dx == doctest::Approx(psi.dx).epsilon(1e-12));
    CHECK(l2_distance(csv, psi) < 1e-14);
    CHECK_THROWS(read_grid_binary(scratch("missing.bin")));
}

TEST_CASE("comparison of a wavefunction with itself") {
    const auto psi = GridWavefunction::from_packet(kPacket, -10.0, 10.0, 4096);
    std::vector<double> x;
    std::vector<cplx> v;
    for (std::size_t k = 0; k < psi.size(); ++k) {
        x.push_back(psi.x(k));
        v.push_back(psi.values[k]);
    }
    const auto r = compare_metrics(x, v, psi, {});
    CHECK(r.global_l2 == 0.0);
    CHECK(r.central_l2 == 0.0);
    CHECK(r.tail_log_error == 0.0);
    CHECK(r.n_central > 0);
    CHECK(r.n_tail > 0);
    CHECK(r.n_excluded == 0);
    const auto with_caustic = compare_metrics(x, v, psi, {0.0});
    CHECK(with_caustic.n_excluded > 0);
}
