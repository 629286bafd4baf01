#include "ggwpd/wigner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ggwpd/parallel.hpp"

namespace ggwpd {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }
}  // namespace

WignerForm wigner_matrix(const WavePacketParams& wp) {
    wp.validate();
    const double c = wp.width.real();
    const double d = wp.width.imag();
    return {1.0 / c, d / c, c + d * d / c, wp.p_center, wp.q_center, wp.hbar};
}

double wigner_eval(double p, double q, const WignerForm& wf) {
    const double form = wf.quadratic(p - wf.p_center, q - wf.q_center);
    return std::exp(-form / wf.hbar) / (std::numbers::pi * wf.hbar);
}

double position_sigma(const WavePacketParams& wp) {
    return std::sqrt(wp.hbar / (2.0 * wp.width.real()));
}

ContourPoint contour_point(double theta, double n_sigma, const WignerForm& wf) {
    // A = [[1/c, d/c], [d/c, c + d^2/c]]  =>  form = (dp + d dq)^2 / c + c dq^2
    const double c = 1.0 / wf.a_pp;
    const double d = wf.a_pq * c;
    const double r = n_sigma * std::sqrt(wf.hbar / 2.0);
    const double sc = std::sqrt(c);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double dq = r * cs / sc;
    const double dp = r * sc * sn - d * dq;
    const double ddq = -r * sn / sc;
    const double ddp = r * sc * cs - d * ddq;
    return {theta, wf.q_center + dq, wf.p_center + dp, ddq, ddp};
}

std::vector<ContourPoint> sigma_contour(double n_sigma, std::size_t n_points, const WignerForm& wf) {
    if (!(n_sigma > 0.0)) throw std::invalid_argument("n_sigma must be positive");
    if (n_points < 16) throw std::invalid_argument("contour needs at least 16 points");
    std::vector<ContourPoint> out;
    out.reserve(n_points);
    for (std::size_t k = 0; k < n_points; ++k) {
        out.push_back(contour_point(two_pi * static_cast<double>(k) / static_cast<double>(n_points),
                                    n_sigma, wf));
    }
    return out;
}

ContourState evolve_contour_point(const ContourPoint& pt, double t, const SystemParams& sys,
                                  const IntegratorOptions& opts) {
    ContourState s;
    s.initial = pt;
    s.traj = propagate({cplx{pt.q}, cplx{pt.p}}, t, sys, opts);
    s.q_t = s.traj.final.q.real();
    s.p_t = s.traj.final.p.real();
    const auto& m = s.traj.stability;
    s.dq_t = m.m21.real() * pt.dp + m.m22.real() * pt.dq;
    return s;
}

ContourState EvolvedContour::evaluate(double theta) const {
    return evolve_contour_point(contour_point(theta, n_sigma, form), t, sys, opts);
}

EvolvedContour propagate_contour(const WignerForm& wf, double n_sigma, std::size_t n_points,
                                 double t, const SystemParams& sys, const IntegratorOptions& opts,
                                 unsigned threads) {
    EvolvedContour ec{wf, n_sigma, t, sys, opts, {}};
    const auto pts = sigma_contour(n_sigma, n_points, wf);
    ec.points.resize(pts.size());
    parallel_for(pts.size(), threads,
                 [&](std::size_t i) { ec.points[i] = evolve_contour_point(pts[i], t, sys, opts); });
    return ec;
}

namespace {

struct Fold {
    double theta;
    double q_t;
};

// Root of dq_t/dtheta on [a, b] given opposite end signs.
Fold bisect_fold(const EvolvedContour& c, ContourState a, ContourState b, double tol) {
    while (b.initial.theta - a.initial.theta > tol) {
        const auto m = c.evaluate(0.5 * (a.initial.theta + b.initial.theta));
        if (sign_of(m.dq_t) == sign_of(a.dq_t)) {
            a = m;
        } else {
            b = m;
        }
        if (m.dq_t == 0.0) {
            a = b = m;
            break;
        }
    }
    const auto& pick = std::abs(a.dq_t) < std::abs(b.dq_t) ? a : b;
    return {pick.initial.theta, pick.q_t};
}

// Collects the folds inside [a, b]. A half whose end slopes agree but whose
// chord disagrees hides an even number of folds and is split further.
void scan_interval(const EvolvedContour& c, const ContourState& a, const ContourState& b,
                   const SegmentOptions& opts, int depth, std::vector<Fold>& folds) {
    const auto mid = c.evaluate(0.5 * (a.initial.theta + b.initial.theta));
    auto half_clean = [](const ContourState& l, const ContourState& r) {
        const int sl = sign_of(l.dq_t);
        return sl == sign_of(r.dq_t) && sign_of(r.q_t - l.q_t) == sl;
    };
    auto handle_half = [&](const ContourState& l, const ContourState& r) {
        if (sign_of(l.dq_t) != sign_of(r.dq_t)) {
            folds.push_back(bisect_fold(c, l, r, opts.fold_theta_tol));
            return;
        }
        if (half_clean(l, r)) return;
        if (depth >= opts.max_refine_depth) {
            std::ostringstream msg;
            msg << "unresolved fold between theta = " << l.initial.theta << " and "
                << r.initial.theta;
            throw FoliationError(msg.str());
        }
        scan_interval(c, l, r, opts, depth + 1, folds);
    };
    handle_half(a, mid);
    handle_half(mid, b);
}

}  // namespace

std::vector<Branch> segment_branches(const EvolvedContour& contour, const SegmentOptions& opts) {
    const auto& pts = contour.points;
    const std::size_t n = pts.size();
    if (n < 16) throw std::invalid_argument("contour too coarse for segmentation");

    std::vector<Fold> folds;
    for (std::size_t i = 0; i < n; ++i) {
        const ContourState& a = pts[i];
        const ContourState b = (i + 1 == n) ? contour.evaluate(two_pi) : pts[i + 1];
        scan_interval(contour, a, b, opts, 0, folds);
    }
    std::sort(folds.begin(), folds.end(), [](const Fold& x, const Fold& y) { return x.theta < y.theta; });
    if (folds.size() < 2) {
        throw FoliationError("evolved contour has fewer than two folds");
    }

    std::vector<Branch> out;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        const Fold& f0 = folds[k];
        Fold f1 = folds[(k + 1) % folds.size()];
        if (k + 1 == folds.size()) f1.theta += two_pi;
        Branch br;
        br.theta_begin = f0.theta;
        br.theta_end = f1.theta;
        br.q_t_begin = f0.q_t;
        br.q_t_end = f1.q_t;
        br.reference = contour.evaluate(0.5 * (br.theta_begin + br.theta_end));
        out.push_back(br);
    }
    return out;
}

std::vector<Foliation> group_branches(const std::vector<Branch>& branches, const EvolvedContour& contour) {
    const std::size_t nf = branches.size();  // folds: fold k starts branch k
    std::vector<ContourState> fold_state(nf);
    for (std::size_t k = 0; k < nf; ++k) fold_state[k] = contour.evaluate(branches[k].theta_begin);

    // Wigner metric of the initial packet, applied to final points.
    auto dist = [&](std::size_t i, std::size_t j) {
        return contour.form.quadratic(fold_state[i].p_t - fold_state[j].p_t,
                                      fold_state[i].q_t - fold_state[j].q_t);
    };
    std::vector<std::size_t> nearest(nf);
    for (std::size_t i = 0; i < nf; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nf; ++j) {
            if (j != i && dist(i, j) < best) {
                best = dist(i, j);
                nearest[i] = j;
            }
        }
    }
    // cut id per fold, -1 for unpaired folds
    std::vector<int> cut(nf, -1);
    int n_cuts = 0;
    for (std::size_t i = 0; i < nf; ++i) {
        const std::size_t j = nearest[i];
        if (i < j && nearest[j] == i) {
            cut[i] = cut[j] = n_cuts++;
        }
    }

    std::vector<Foliation> out;
    if (n_cuts == 0) {
        // no filament structure: every branch is its own pathway
        for (const auto& br : branches) out.push_back({0, {br}});
    } else {
        // arcs run between consecutive cut folds and collect the branches in between
        std::size_t first = 0;
        while (cut[first] < 0) ++first;
        struct Arc {
            int cut_a;
            int cut_b;
            std::vector<Branch> branches;
        };
        std::vector<Arc> arcs;
        for (std::size_t step = 0; step < nf; ++step) {
            const std::size_t k = (first + step) % nf;
            if (cut[k] >= 0) arcs.push_back({cut[k], -1, {}});
            arcs.back().branches.push_back(branches[k]);
            const std::size_t next = (k + 1) % nf;
            if (cut[next] >= 0) arcs.back().cut_b = cut[next];
        }
        std::vector<bool> used(arcs.size(), false);
        for (std::size_t a = 0; a < arcs.size(); ++a) {
            if (used[a]) continue;
            used[a] = true;
            Foliation fol{0, arcs[a].branches};
            const int lo = std::min(arcs[a].cut_a, arcs[a].cut_b);
            const int hi = std::max(arcs[a].cut_a, arcs[a].cut_b);
            if (lo != hi) {
                for (std::size_t b = a + 1; b < arcs.size(); ++b) {
                    if (used[b]) continue;
                    if (std::min(arcs[b].cut_a, arcs[b].cut_b) == lo &&
                        std::max(arcs[b].cut_a, arcs[b].cut_b) == hi) {
                        used[b] = true;
                        fol.branches.insert(fol.branches.end(), arcs[b].branches.begin(),
                                            arcs[b].branches.end());
                    }
                }
            }
            out.push_back(std::move(fol));
        }
    }

    auto energy = [&](const Foliation& f) {
        double acc = 0.0;
        for (const auto& br : f.branches) acc += hamiltonian(br.reference.traj.start, contour.sys).real();
        return acc / static_cast<double>(f.branches.size());
    };
    std::stable_sort(out.begin(), out.end(),
                     [&](const Foliation& a, const Foliation& b) { return energy(a) < energy(b); });
    for (std::size_t r = 0; r < out.size(); ++r) out[r].label = static_cast<int>(r) + 1;
    return out;
}

std::vector<Foliation> segment_foliations(const EvolvedContour& contour, const SegmentOptions& opts) {
    return group_branches(segment_branches(contour, opts), contour);
}

double Foliation::q_t_min() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& b : branches) v = std::min(v, b.q_t_min());
    return v;
}

double Foliation::q_t_max() const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& b : branches) v = std::max(v, b.q_t_max());
    return v;
}

bool Foliation::covers(double x) const {
    return std::any_of(branches.begin(), branches.end(), [x](const Branch& b) { return b.covers(x); });
}

double Foliation::theta_extent() const {
    double acc = 0.0;
    for (const auto& b : branches) acc += b.theta_extent();
    return acc;
}

ContourState branch_point(const Branch& br, const EvolvedContour& contour, double s) {
    return contour.evaluate(br.theta_begin + s * br.theta_extent());
}

std::vector<ContourState> spread_references(const Foliation& fol, const EvolvedContour& contour,
                                            std::size_t n) {
    std::vector<ContourState> out;
    const double total = fol.theta_extent();
    for (std::size_t k = 0; k < n; ++k) {
        // midpoints of n equal slices of the concatenated theta range
        double s = total * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
        for (const auto& br : fol.branches) {
            if (s <= br.theta_extent()) {
                out.push_back(contour.evaluate(br.theta_begin + s));
                break;
            }
            s -= br.theta_extent();
        }
    }
    return out;
}

std::optional<ContourState> select_reference(const Foliation& fol, const EvolvedContour& contour,
                                             double x) {
    for (const auto& br : fol.branches) {
        if (br.covers(x)) return select_reference(br, contour, x);
    }
    return std::nullopt;
}

std::optional<ContourState> select_reference(const Branch& fol, const EvolvedContour& contour,
                                             double x) {
    if (!fol.covers(x)) return std::nullopt;
    double lo = fol.theta_begin;
    double hi = fol.theta_end;
    double f_lo = fol.q_t_begin - x;
    double f_hi = fol.q_t_end - x;
    if (f_lo == 0.0) return contour.evaluate(lo);
    if (f_hi == 0.0) return contour.evaluate(hi);
    ContourState best = contour.evaluate(0.5 * (lo + hi));
    // Illinois-modified regula falsi with a periodic bisection step.
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        double th = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if (!(th > lo && th < hi) || it % 8 == 7) th = 0.5 * (lo + hi);
        best = contour.evaluate(th);
        const double f = best.q_t - x;
        if (std::abs(f) < 1e-12 * std::max(1.0, std::abs(x)) || hi - lo < 1e-14) break;
        if (sign_of(f) == sign_of(f_lo)) {
            lo = th;
            f_lo = f;
            if (side == -1) f_hi *= 0.5;
            side = -1;
        } else {
            hi = th;
            f_hi = f;
            if (side == 1) f_lo *= 0.5;
            side = 1;
        }
    }
    return best;
}

double polygon_area(const std::vector<double>& q, const std::vector<double>& p) {
    if (q.size() != p.size() || q.size() < 3) throw std::invalid_argument("polygon needs >= 3 vertices");
    double acc = 0.0;
    const std::size_t n = q.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        acc += q[i] * p[j] - q[j] * p[i];
    }
    return 0.5 * std::abs(acc);
}

}  // namespace ggwpd
