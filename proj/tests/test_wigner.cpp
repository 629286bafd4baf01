#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "ggwpd/wigner.hpp"
#include "oracles.hpp"

using namespace ggwpd;

namespace {
const WavePacketParams kPacket{0.0, 20.0, cplx{32.0, 0.0}, 1.0};
const SystemParams kQuartic{};

double tau() { return central_period(kPacket, kQuartic); }

EvolvedContour evolved(double n_sigma, double t, std::size_t points = 4096) {
    return propagate_contour(wigner_matrix(kPacket), n_sigma, points, t, kQuartic, {});
}

// Contours at multiples of tau, computed once.
const EvolvedContour& contour_at(int multiple) {
    static std::map<int, EvolvedContour> cache;
    auto it = cache.find(multiple);
    if (it == cache.end()) it = cache.emplace(multiple, evolved(5.0, multiple * tau())).first;
    return it->second;
}
}  // namespace

TEST_CASE("wigner matrix examples") {
    auto a = wigner_matrix(kPacket);
    CHECK(a.a_pp == doctest::Approx(1.0 / 32.0));
    CHECK(a.a_pq == 0.0);
    CHECK(a.a_qq == doctest::Approx(32.0));
    a = wigner_matrix({0.0, 0.0, cplx{1.0, 0.0}, 1.0});
    CHECK(a.a_pp == 1.0);
    CHECK(a.a_pq == 0.0);
    CHECK(a.a_qq == 1.0);
    a = wigner_matrix({0.0, 0.0, cplx{1.0, 1.0}, 1.0});
    CHECK(a.a_pp == doctest::Approx(1.0));
    CHECK(a.a_pq == doctest::Approx(1.0));
    CHECK(a.a_qq == doctest::Approx(2.0));
}

TEST_CASE("wigner matrix has unit determinant for any width") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> re(0.01, 50.0);
    std::uniform_real_distribution<double> im(-20.0, 20.0);
    for (int k = 0; k < 500; ++k) {
        const auto a = wigner_matrix({0.0, 0.0, cplx{re(rng), im(rng)}, 1.0});
        CHECK(a.det() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("wigner density peak and normalization") {
    const auto wf = wigner_matrix(kPacket);
    CHECK(wigner_eval(20.0, 0.0, wf) == doctest::Approx(1.0 / oracle::pi));
    const double sq = 1.0 / 8.0;
    const double sp = 4.0;
    const auto inner = [&](double p) {
        return oracle::simpson([&](double q) { return wigner_eval(p, q, wf); }, -8.0 * sq, 8.0 * sq, 400);
    };
    const double total = oracle::simpson(inner, 20.0 - 8.0 * sp, 20.0 + 8.0 * sp, 400);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sigma contours pass through the semi-axis points") {
    const auto wf = wigner_matrix(kPacket);
    const auto c = sigma_contour(1.0, 64, wf);
    // theta = 0: maximal q; quarter turns follow counter-clockwise.
    CHECK(c[0].q == doctest::Approx(0.125));
    CHECK(c[0].p == doctest::Approx(20.0));
    CHECK(c[16].q == doctest::Approx(0.0).scale(1.0));
    CHECK(c[16].p == doctest::Approx(24.0));
    CHECK(c[32].q == doctest::Approx(-0.125));
    CHECK(c[48].p == doctest::Approx(16.0));
    for (const auto& pt : c) {
        CHECK(wf.quadratic(pt.p - 20.0, pt.q) == doctest::Approx(0.5));
    }
    double q_max = 0.0;
    for (const auto& pt : sigma_contour(5.0, 4096, wf)) q_max = std::max(q_max, std::abs(pt.q));
    CHECK(q_max == doctest::Approx(0.625));
    CHECK(position_sigma(kPacket) == doctest::Approx(0.125));
}

TEST_CASE("contour argument checks") {
    const auto wf = wigner_matrix(kPacket);
    CHECK_THROWS_AS(sigma_contour(0.0, 64, wf), std::invalid_argument);
    CHECK_THROWS_AS(sigma_contour(1.0, 8, wf), std::invalid_argument);
}

TEST_CASE("zero-time contour is unchanged and has two foliations") {
    const auto c = evolved(5.0, 0.0, 256);
    for (const auto& s : c.points) {
        CHECK(s.q_t == s.initial.q);
        CHECK(s.p_t == s.initial.p);
    }
    CHECK(segment_foliations(c).size() == 2);
}

TEST_CASE("nine foliations at three periods") {
    const auto fols = segment_foliations(contour_at(3));
    CHECK(fols.size() == 9);
    for (std::size_t k = 0; k < fols.size(); ++k) CHECK(fols[k].label == static_cast<int>(k) + 1);
}

TEST_CASE("foliation count grows with time") {
    const auto n1 = segment_foliations(contour_at(1)).size();
    const auto n2 = segment_foliations(contour_at(2)).size();
    const auto n3 = segment_foliations(contour_at(3)).size();
    CHECK(n1 >= 2);
    CHECK(n1 < n3);
    CHECK(n1 <= n2);
    CHECK(n2 <= n3);
}

TEST_CASE("branches are monotone and meet at folds") {
    const auto& c = contour_at(3);
    const auto branches = segment_branches(c);
    REQUIRE(branches.size() > 2);
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const auto& br = branches[k];
        CHECK(br.theta_end > br.theta_begin);
        const int dir = br.direction();
        double prev = br.q_t_begin;
        for (int j = 1; j <= 20; ++j) {
            const double q = branch_point(br, c, j / 20.0).q_t;
            CHECK((q - prev) * dir >= -1e-9);
            prev = q;
        }
        const auto& next = branches[(k + 1) % branches.size()];
        CHECK(std::fmod(next.theta_begin - br.theta_end + 4.0 * oracle::pi, 2.0 * oracle::pi) ==
              doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        // dq_t / dtheta vanishes at the fold.
        CHECK(std::abs(c.evaluate(br.theta_end).dq_t) < 1e-4 * std::abs(branch_point(br, c, 0.5).dq_t) + 1e-6);
    }
}

TEST_CASE("Liouville: evolved 1-sigma contour keeps its area") {
    const auto wf = wigner_matrix(kPacket);
    const auto c = propagate_contour(wf, 1.0, 8192, 3.0 * tau(), kQuartic, {});
    std::vector<double> q0, p0, qt, pt;
    for (const auto& s : c.points) {
        q0.push_back(s.initial.q);
        p0.push_back(s.initial.p);
        qt.push_back(s.q_t);
        pt.push_back(s.p_t);
    }
    const double a0 = polygon_area(q0, p0);
    CHECK(std::abs(a0) == doctest::Approx(oracle::pi * 0.125 * 4.0).epsilon(1e-5));
    CHECK(std::abs(polygon_area(qt, pt)) == doctest::Approx(std::abs(a0)).epsilon(1e-3));
}

TEST_CASE("foliations cover the evolved position range without gaps") {
    const auto& c = contour_at(3);
    const auto fols = segment_foliations(c);
    double lo = 1e300;
    double hi = -1e300;
    for (const auto& s : c.points) {
        lo = std::min(lo, s.q_t);
        hi = std::max(hi, s.q_t);
    }
    for (double x = lo + 1e-6; x < hi; x += (hi - lo) / 997.0) {
        bool covered = false;
        for (const auto& f : fols) covered = covered || f.covers(x);
        CHECK_MESSAGE(covered, "gap at x = " << x);
    }
}

TEST_CASE("reference selection hits the target position") {
    const auto& c = contour_at(3);
    const auto fols = segment_foliations(c);
    int found = 0;
    for (const auto& f : fols) {
        const auto ref = select_reference(f, c, 0.0);
        if (!ref) continue;
        ++found;
        CHECK(std::abs(ref->q_t) < 1e-9);
        CHECK(std::abs(ref->traj.final.q.real()) < 1e-9);
    }
    CHECK(found == 9);

    const auto& br = fols.front().branches.front();
    const auto end = select_reference(br, c, br.q_t_end);
    REQUIRE(end.has_value());
    CHECK(end->initial.theta == doctest::Approx(br.theta_end).epsilon(1e-9));
    const auto mid = branch_point(br, c, 0.37);
    const auto again = select_reference(br, c, mid.q_t);
    REQUIRE(again.has_value());
    CHECK(again->initial.theta == doctest::Approx(mid.initial.theta).epsilon(1e-9));
    CHECK_FALSE(select_reference(br, c, br.q_t_max() + 1.0).has_value());
    CHECK_FALSE(select_reference(fols.front(), c, 1e3).has_value());
}

TEST_CASE("spread references lie on the foliation") {
    const auto& c = contour_at(3);
    for (const auto& f : segment_foliations(c)) {
        const auto refs = spread_references(f, c, 20);
        CHECK(refs.size() == 20);
        for (const auto& r : refs) {
            bool inside = false;
            for (const auto& br : f.branches) {
                double th = r.initial.theta;
                while (th < br.theta_begin) th += 2.0 * oracle::pi;
                inside = inside || th <= br.theta_end + 1e-12;
            }
            CHECK(inside);
        }
    }
}
