#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ggwpd/dynamics.hpp"
#include "oracles.hpp"

using namespace ggwpd;
using namespace std::complex_literals;

namespace {
const SystemParams kQuartic{};
const WavePacketParams kPacket{0.0, 20.0, cplx{32.0, 0.0}, 1.0};

double tau() { return central_period(kPacket, kQuartic); }

double max_entry_diff(const StabilityMatrix& a, const StabilityMatrix& b) {
    return std::max({std::abs(a.m11 - b.m11), std::abs(a.m12 - b.m12), std::abs(a.m21 - b.m21),
                     std::abs(a.m22 - b.m22)});
}
}  // namespace

TEST_CASE("hamiltonian by direct evaluation") {
    CHECK(hamiltonian({0.0, 20.0}, kQuartic).real() == doctest::Approx(200.0));
    const double e = 37.0;
    CHECK(hamiltonian({std::pow(e / 0.05, 0.25), 0.0}, kQuartic).real() == doctest::Approx(e));
    const cplx h = hamiltonian({1i, 0.0}, kQuartic);
    CHECK(h.real() == doctest::Approx(0.05));
    CHECK(std::abs(h.imag()) < 1e-15);
}

TEST_CASE("central period matches the quadrature oracle") {
    const double expected = oracle::quartic_period(200.0, 0.05);
    CHECK(tau() == doctest::Approx(expected).epsilon(1e-10));
    CHECK(tau() == doctest::Approx(2.0853).epsilon(1e-4));
    CHECK(oracle::quartic_integral_closed() == doctest::Approx(oracle::simpson(
                                                   [](double phi) { return 1.0 / std::sqrt(1.0 + std::pow(std::sin(phi), 2)); },
                                                   0.0, oracle::pi / 2.0))
                                                   .epsilon(1e-12));
    CHECK(orbit_period(0.0, 1.0, SystemParams::harmonic(2.0)) == doctest::Approx(oracle::pi));
}

TEST_CASE("zero time is the identity") {
    const ComplexPhasePoint z{cplx{0.3, 0.1}, cplx{19.0, -2.0}};
    const auto r = propagate(z, 0.0, kQuartic);
    CHECK(r.ok());
    CHECK(r.final.q == z.q);
    CHECK(r.final.p == z.p);
    CHECK(max_entry_diff(r.stability, StabilityMatrix::identity()) == 0.0);
    CHECK(r.action == 0.0);
}

TEST_CASE("real orbit returns after one period with a real action") {
    const auto r = propagate({0.0, 20.0}, tau(), kQuartic);
    REQUIRE(r.ok());
    CHECK(std::abs(r.final.q) < 1e-8);
    CHECK(std::abs(r.final.p - 20.0) < 1e-8);
    CHECK(std::abs(r.action.imag()) < 1e-10);
    CHECK(std::abs(r.stability.det() - 1.0) < 1e-9);
    CHECK(std::abs(hamiltonian(r.final, kQuartic) - 200.0) < 1e-10 * 200.0);
}

TEST_CASE("action rate equals p^2/m - H") {
    const ComplexPhasePoint z{cplx{0.2, 0.3}, cplx{18.0, 1.0}};
    const double t = 1.1;
    const double h = 1e-4;
    const auto a = propagate(z, t - h, kQuartic);
    const auto b = propagate(z, t + h, kQuartic);
    const auto c = propagate(z, t, kQuartic);
    const cplx rate = (b.action - a.action) / (2.0 * h);
    const cplx expected = c.final.p * c.final.p - hamiltonian(c.final, kQuartic);
    CHECK(std::abs(rate - expected) < 1e-5 * std::abs(expected));
}

TEST_CASE("stability matrix matches finite differences") {
    const ComplexPhasePoint z{cplx{0.1, 0.2}, cplx{20.0, -1.5}};
    const double t = 3.0 * tau();
    const auto r = propagate(z, t, kQuartic);
    REQUIRE(r.ok());
    const double d = 1e-6;
    for (const cplx dir : {cplx{1.0}, cplx{0.0, 1.0}}) {
        const auto pp = propagate({z.q, z.p + d * dir}, t, kQuartic);
        const auto pm = propagate({z.q, z.p - d * dir}, t, kQuartic);
        const auto qp = propagate({z.q + d * dir, z.p}, t, kQuartic);
        const auto qm = propagate({z.q - d * dir, z.p}, t, kQuartic);
        const cplx m11 = (pp.final.p - pm.final.p) / (2.0 * d * dir);
        const cplx m21 = (pp.final.q - pm.final.q) / (2.0 * d * dir);
        const cplx m12 = (qp.final.p - qm.final.p) / (2.0 * d * dir);
        const cplx m22 = (qp.final.q - qm.final.q) / (2.0 * d * dir);
        CHECK(std::abs(m11 - r.stability.m11) < 1e-4 * std::abs(r.stability.m11));
        CHECK(std::abs(m12 - r.stability.m12) < 1e-4 * std::abs(r.stability.m12));
        CHECK(std::abs(m21 - r.stability.m21) < 1e-4 * std::abs(r.stability.m21));
        CHECK(std::abs(m22 - r.stability.m22) < 1e-4 * std::abs(r.stability.m22));
    }
}

TEST_CASE("time reversal of a real trajectory") {
    const ComplexPhasePoint z{0.4, 17.0};
    const auto fwd = propagate(z, 2.5 * tau(), kQuartic);
    const auto back = propagate({fwd.final.q, -fwd.final.p}, 2.5 * tau(), kQuartic);
    CHECK(std::abs(back.final.q - z.q) < 1e-8);
    CHECK(std::abs(-back.final.p - z.p) < 1e-8);
}

TEST_CASE("symplecticity and energy conservation on the ket manifold band") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> re(-0.5, 0.5);
    std::uniform_real_distribution<double> im(-0.625, 0.625);
    const double t = 3.0 * tau();
    int ok = 0;
    for (int k = 0; k < 200; ++k) {
        const cplx u{re(rng), im(rng)};
        const ComplexPhasePoint z{u, kPacket.p_center + 1i * kPacket.width * u};
        const auto r = propagate(z, t, kQuartic);
        if (!r.ok()) continue;
        ++ok;
        const cplx e0 = hamiltonian(z, kQuartic);
        CHECK(std::abs(r.stability.det() - 1.0) < 1e-9);
        CHECK(std::abs(hamiltonian(r.final, kQuartic) - e0) / std::max(1.0, std::abs(e0)) < 1e-9);
    }
    CHECK(ok > 150);
}

TEST_CASE("harmonic flow matches the closed form") {
    const auto sys = SystemParams::harmonic(1.3);
    const ComplexPhasePoint z{cplx{0.5, 0.2}, cplx{-1.0, 0.7}};
    const double t = 2.2;
    const auto r = propagate(z, t, sys);
    const double c = std::cos(1.3 * t);
    const double s = std::sin(1.3 * t);
    CHECK(std::abs(r.final.q - (z.q * c + z.p / 1.3 * s)) < 1e-11);
    CHECK(std::abs(r.final.p - (z.p * c - 1.3 * z.q * s)) < 1e-11);
    CHECK(std::abs(r.stability.m11 - c) < 1e-11);
    CHECK(std::abs(r.stability.m21 - s / 1.3) < 1e-11);
    CHECK(std::abs(r.stability.m12 + 1.3 * s) < 1e-11);
}

TEST_CASE("scaling replicas of the central trajectory") {
    IntegratorOptions rec;
    rec.record_samples = true;
    const ComplexPhasePoint z0{0.0, 20.0};
    const auto ref = propagate(z0, 3.0 * tau(), kQuartic, rec);
    REQUIRE(ref.samples.size() > 10);

    const auto same = scale_trajectory(ref, 1.0);
    for (std::size_t k = 0; k < same.size(); ++k) {
        CHECK(same[k].q == ref.samples[k].point.q);
        CHECK(same[k].t == ref.samples[k].t);
    }
    for (double gamma : {0.5, 2.0, 3.0}) {
        CAPTURE(gamma);
        const ComplexPhasePoint zg{gamma * z0.q, gamma * gamma * z0.p};
        CHECK(orbit_period(zg.q.real(), zg.p.real(), kQuartic) == doctest::Approx(tau() / gamma).epsilon(1e-12));
        const auto replica = scale_trajectory(ref, gamma);
        for (std::size_t k = 1; k < replica.size(); k += replica.size() / 20) {
            const auto d = propagate(zg, replica[k].t, kQuartic);
            CHECK(std::abs(d.final.q - replica[k].q) < 1e-8 * std::max(1.0, std::abs(replica[k].q)));
            CHECK(std::abs(d.final.p - replica[k].p) < 1e-8 * std::max(1.0, std::abs(replica[k].p)));
            CHECK(std::abs(d.action - replica[k].action) < 1e-8 * std::max(1.0, std::abs(replica[k].action)));
        }
    }
}

TEST_CASE("initial conditions inside a singular cone blow up") {
    // Scan the band edge near (0, 0.625) where the cones accumulate.
    IntegratorOptions real_time;
    real_time.detour_factor = 0.0;
    int singular = 0;
    for (int k = 0; k <= 2000; ++k) {
        const cplx u{-0.5 + 0.0005 * k, 0.62};
        const ComplexPhasePoint z{u, kPacket.p_center + 1i * kPacket.width * u};
        const auto r = propagate(z, 3.0 * tau(), kQuartic, real_time);
        if (!r.ok()) {
            ++singular;
            CHECK(r.blowup_time > 0.0);
            CHECK(r.blowup_time < 3.0 * tau());
        }
    }
    CHECK(singular > 0);
}

TEST_CASE("pole detours agree with real-time integration where the latter is accurate") {
    // Passes within ~0.05 of a pole: |q| reaches a few hundred on the real axis.
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> uq(-1.5, 1.5);
    std::uniform_real_distribution<double> uqi(-0.7, 0.7);
    std::uniform_real_distribution<double> up(-8.0, 8.0);
    std::uniform_real_distribution<double> upi(-4.0, 4.0);
    IntegratorOptions real_time;
    real_time.detour_factor = 0.0;
    int compared = 0;
    for (int k = 0; k < 300; ++k) {
        const ComplexPhasePoint z{cplx{uq(rng), uqi(rng)}, cplx{20.0 + up(rng), upi(rng)}};
        const auto a = propagate(z, tau(), kQuartic);
        const auto b = propagate(z, tau(), kQuartic, real_time);
        if (!a.ok() || !b.ok()) continue;
        if (std::abs(b.stability.det() - 1.0) > 1e-10) continue;
        ++compared;
        CHECK(std::abs(a.final.q - b.final.q) < 1e-8 * std::max(1.0, std::abs(b.final.q)));
        CHECK(std::abs(a.action - b.action) < 1e-8 * std::max(1.0, std::abs(b.action)));
    }
    CHECK(compared > 200);
}

TEST_CASE("argument validation") {
    CHECK_THROWS_AS(propagate({0.0, 1.0}, -1.0, kQuartic), std::invalid_argument);
    SystemParams bad = kQuartic;
    bad.lambda = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    IntegratorOptions o;
    o.rel_tol = 0.0;
    CHECK_THROWS_AS(o.validate(), std::invalid_argument);
    o = {};
    o.detour_factor = 1.0;
    CHECK_THROWS_AS(o.validate(), std::invalid_argument);
}
