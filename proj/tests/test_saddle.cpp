#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ggwpd/saddle.hpp"
#include "oracles.hpp"

using namespace ggwpd;
using namespace std::complex_literals;

namespace {
const WavePacketParams kPacket{0.0, 20.0, cplx{32.0, 0.0}, 1.0};
const SystemParams kQuartic{};
const IntegratorOptions kInt{};
const NewtonOptions kNewton{};

double tau() { return central_period(kPacket, kQuartic); }

struct Central {
    EvolvedContour contour;
    std::vector<Foliation> foliations;
    ExposedSearch search;
};

const Central& central() {
    static const Central c = [] {
        Central out;
        out.contour = propagate_contour(wigner_matrix(kPacket), 5.0, 4096, 3.0 * tau(), kQuartic, kInt);
        out.foliations = segment_foliations(out.contour);
        out.search = find_exposed_saddles(out.foliations, out.contour, Target::wavefunction(0.0), kPacket, kInt,
                                          kNewton);
        return out;
    }();
    return c;
}

const Foliation& foliation(int label) {
    for (const auto& f : central().foliations) {
        if (f.label == label) return f;
    }
    throw std::runtime_error("no such foliation");
}

// W = S - i h (log phi(u0) - log N): the contribution scales as N exp(-Im W / h).
cplx reduced_action(const Saddle& s) {
    return s.traj.action - 1i * kPacket.hbar * (initial_exponent({s.u0}, kPacket) - log_normalization(kPacket));
}
}  // namespace

TEST_CASE("residual derivative matches finite differences") {
    const double t = 3.0 * tau();
    for (const auto& target : {Target::wavefunction(-1.3), Target::overlap({0.5, -18.0, cplx{20.0, 3.0}, 1.0})}) {
        const cplx u{0.05, 0.2};
        const auto r = bvp_residual(u, target, t, kPacket, kQuartic, kInt);
        REQUIRE(r.ok());
        const auto f = [&](cplx v) { return bvp_residual(v, target, t, kPacket, kQuartic, kInt).f; };
        const cplx fd = oracle::derivative(f, u, 1e-7);
        CHECK(std::abs(fd - r.df) < 1e-5 * std::abs(r.df));
        const cplx fd_im = (f(u + 1e-7i) - f(u - 1e-7i)) / 2e-7i;
        CHECK(std::abs(fd_im - r.df) < 1e-5 * std::abs(r.df));
    }
}

TEST_CASE("specialised residuals agree with the generic one") {
    const double t = 1.7;
    const cplx u{0.1, -0.05};
    const auto a = bvp_residual_wavefunction(u, 2.0, t, kPacket, kQuartic, kInt);
    const auto b = bvp_residual(u, Target::wavefunction(2.0), t, kPacket, kQuartic, kInt);
    CHECK(a.f == b.f);
    CHECK(a.df == b.df);
    const WavePacketParams bra{1.0, 19.0, cplx{30.0, 0.0}, 1.0};
    const auto c = bvp_residual_overlap(u, bra, t, kPacket, kQuartic, kInt);
    const auto d = bvp_residual(u, Target::overlap(bra), t, kPacket, kQuartic, kInt);
    CHECK(c.f == d.f);
    CHECK(std::abs(d.f - dual_residual(d.traj.final, bra)) < 1e-12);
}

TEST_CASE("zero time: one Newton step from any seed") {
    // Fails for the default step clip of half a position width: seeds further
    // away need several clipped steps.
    for (const cplx seed : {cplx{0.0}, cplx{0.3, 0.4}, cplx{-0.2, -0.5}}) {
        const auto rep = newton_search(seed, Target::wavefunction(0.37), 0.0, kPacket, kQuartic, kInt, kNewton);
        REQUIRE(rep.converged);
        CHECK(rep.iterations <= 2);
        CHECK(std::abs(rep.u - 0.37) < 1e-12);
    }
}

TEST_CASE("zero time without step clipping: one Newton step") {
    NewtonOptions free = kNewton;
    free.step_clip = 1e6;
    for (const cplx seed : {cplx{0.0}, cplx{0.3, 0.4}, cplx{-0.2, -0.5}, cplx{5.0, -3.0}}) {
        const auto rep = newton_search(seed, Target::wavefunction(0.37), 0.0, kPacket, kQuartic, kInt, free);
        REQUIRE(rep.converged);
        CHECK(rep.iterations <= 2);
        CHECK(std::abs(rep.u - 0.37) < 1e-12);
    }
}

TEST_CASE("an exact root converges at once") {
    const auto& s = central().search.saddles.front();
    const auto rep = newton_search(s.u0, s.target, s.t, kPacket, kQuartic, kInt, kNewton);
    REQUIRE(rep.converged);
    CHECK(rep.iterations <= 1);
    CHECK(std::abs(rep.u - s.u0) < 1e-10);
}

TEST_CASE("nine exposed saddles at x = 0 after three periods") {
    const auto& found = central().search;
    CHECK(found.failures.empty());
    REQUIRE(found.saddles.size() == 9);
    for (std::size_t i = 0; i < found.saddles.size(); ++i) {
        const auto& s = found.saddles[i];
        REQUIRE(s.foliation_label.has_value());
        CHECK(*s.foliation_label == static_cast<int>(i) + 1);
        CHECK(s.exposure == Exposure::exposed);
        CHECK(std::abs(ket_residual(s.start, kPacket)) < 1e-12);
        CHECK(std::abs(s.traj.final.q - 0.0) < 1e-9);
        for (std::size_t j = 0; j < i; ++j) CHECK(std::abs(s.u0 - found.saddles[j].u0) > 1e-3);
    }
}

TEST_CASE("no covering foliation, no saddles") {
    const auto& c = central();
    const auto far = find_exposed_saddles(c.foliations, c.contour, Target::wavefunction(500.0), kPacket, kInt,
                                          kNewton);
    CHECK(far.saddles.empty());
}

TEST_CASE("searches are deterministic") {
    const auto& c = central();
    const auto again = find_exposed_saddles(c.foliations, c.contour, Target::wavefunction(0.0), kPacket, kInt, kNewton,
                                            1);
    REQUIRE(again.saddles.size() == c.search.saddles.size());
    for (std::size_t i = 0; i < again.saddles.size(); ++i) CHECK(again.saddles[i].u0 == c.search.saddles[i].u0);
}

TEST_CASE("exposed saddles shadow their own references best") {
    const auto& c = central();
    const auto& saddles = c.search.saddles;
    for (const auto& s : saddles) {
        const auto own = select_reference(foliation(*s.foliation_label), c.contour, 0.0);
        REQUIRE(own.has_value());
        const double d_own = shadowing_check(s, own->traj);
        CHECK(d_own < 0.1);
        for (const auto& other : saddles) {
            if (other.foliation_label == s.foliation_label) continue;
            const auto ref = select_reference(foliation(*other.foliation_label), c.contour, 0.0);
            CHECK(shadowing_check(s, ref->traj) > d_own);
        }
    }
    // A saddle launched from the reference itself shadows it exactly.
    const auto ref = select_reference(foliation(1), c.contour, 0.0);
    Saddle at_ref;
    at_ref.start = ref->traj.start;
    at_ref.traj = ref->traj;
    CHECK(shadowing_check(at_ref, ref->traj) == 0.0);
}

TEST_CASE("Newton basins hold the references within 20% of the foliation extent") {
    const auto& c = central();
    for (const auto& s : c.search.saddles) {
        const auto& fol = foliation(*s.foliation_label);
        const auto ref = select_reference(fol, c.contour, 0.0);
        REQUIRE(ref.has_value());
        const double shift = 0.2 * fol.theta_extent();
        for (double sign : {-1.0, 1.0}) {
            CAPTURE(*s.foliation_label);
            CAPTURE(sign);
            const auto moved = c.contour.evaluate(ref->initial.theta + sign * shift);
            CHECK(reaches(moved, s.u0, s.target, s.t, kPacket, kQuartic, kInt, kNewton));
        }
    }
}

TEST_CASE("exposed saddle contributions are bounded by the packet normalization") {
    for (const auto& s : central().search.saddles) {
        CAPTURE(*s.foliation_label);
        CHECK(reduced_action(s).imag() >= -1e-9);
    }
}

TEST_CASE("deduplication keeps first occurrences") {
    Saddle a;
    a.u0 = {0.1, 0.2};
    a.foliation_label = 1;
    Saddle b = a;
    b.u0 += 1e-8;
    b.foliation_label = 2;
    Saddle c = a;
    c.u0 += 0.5;
    c.foliation_label = 3;
    const auto out = dedup_saddles({a, b, c}, 1e-6);
    REQUIRE(out.size() == 2);
    CHECK(*out[0].foliation_label == 1);
    CHECK(*out[1].foliation_label == 3);
}

TEST_CASE("newton option validation") {
    NewtonOptions o;
    o.tol = 0.0;
    CHECK_THROWS_AS(o.validate(), std::invalid_argument);
    o = {};
    o.max_iter = 0;
    CHECK_THROWS_AS(o.validate(), std::invalid_argument);
    CHECK(NewtonOptions{}.clip_for(kPacket) == doctest::Approx(0.0625));
}
