#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ggwpd/dynamics.hpp"
#include "ggwpd/wave_packet.hpp"

namespace ggwpd {

/// Wigner density of a Gaussian packet:
///   W(p, q) = (1/pi h) exp[-(dp, dq) A (dp, dq)^T / h],  det A = 1.
struct WignerForm {
    double a_pp = 1.0;
    double a_pq = 0.0;
    double a_qq = 1.0;
    double p_center = 0.0;
    double q_center = 0.0;
    double hbar = 1.0;

    double det() const { return a_pp * a_qq - a_pq * a_pq; }
    double quadratic(double dp, double dq) const {
        return a_pp * dp * dp + 2.0 * a_pq * dp * dq + a_qq * dq * dq;
    }
};

WignerForm wigner_matrix(const WavePacketParams& wp);

double wigner_eval(double p, double q, const WignerForm& wf);

/// Position standard deviation sqrt(h / 2 Re b) of the packet.
double position_sigma(const WavePacketParams& wp);

struct ContourPoint {
    double theta = 0.0;
    double q = 0.0;
    double p = 0.0;
    /// Tangent d(q, p)/d(theta).
    double dq = 0.0;
    double dp = 0.0;
};

/// Point on the ellipse (dp, dq) A (dp, dq)^T = n^2 h / 2 at angle theta;
/// counter-clockwise in the (q, p) plane, theta = 0 at maximal q.
ContourPoint contour_point(double theta, double n_sigma, const WignerForm& wf);

/// Uniform samples theta_k = 2 pi k / n_points. Requires n_points >= 16.
std::vector<ContourPoint> sigma_contour(double n_sigma, std::size_t n_points, const WignerForm& wf);

struct ContourState {
    ContourPoint initial;
    TrajectoryResult traj;
    double q_t = 0.0;
    double p_t = 0.0;
    /// dq_t / d(theta) from the tangent map.
    double dq_t = 0.0;
};

/// Classically propagated sigma contour. Keeps everything needed to evaluate
/// new contour angles on demand.
struct EvolvedContour {
    WignerForm form;
    double n_sigma = 5.0;
    double t = 0.0;
    SystemParams sys;
    IntegratorOptions opts;
    std::vector<ContourState> points;

    ContourState evaluate(double theta) const;
};

ContourState evolve_contour_point(const ContourPoint& pt, double t, const SystemParams& sys,
                                  const IntegratorOptions& opts);

EvolvedContour propagate_contour(const WignerForm& wf, double n_sigma, std::size_t n_points,
                                 double t, const SystemParams& sys, const IntegratorOptions& opts,
                                 unsigned threads = 0);

/// Maximal interval of the contour on which q_t(theta) is monotone.
struct Branch {
    /// [theta_begin, theta_end] with theta_end > theta_begin; may exceed 2 pi (wraps).
    double theta_begin = 0.0;
    double theta_end = 0.0;
    double q_t_begin = 0.0;
    double q_t_end = 0.0;
    /// Interior reference at the middle of the interval.
    ContourState reference;

    double q_t_min() const { return std::min(q_t_begin, q_t_end); }
    double q_t_max() const { return std::max(q_t_begin, q_t_end); }
    bool covers(double x) const { return x >= q_t_min() && x <= q_t_max(); }
    double theta_extent() const { return theta_end - theta_begin; }
    int direction() const { return q_t_end >= q_t_begin ? 1 : -1; }
};

/// One classical transport pathway: a section of the evolved contour between
/// two cuts. A cut is a pair of folds on opposite sides of the evolved
/// filament, found as mutual nearest neighbours in final phase space. Inner
/// sections hold the two facing branches; end sections hold the single arc
/// running around a filament tip, which may contain unpaired folds.
struct Foliation {
    int label = 0;
    std::vector<Branch> branches;

    double q_t_min() const;
    double q_t_max() const;
    bool covers(double x) const;
    /// Summed theta extent of all branches.
    double theta_extent() const;
};

class FoliationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SegmentOptions {
    double fold_theta_tol = 1e-9;
    int max_refine_depth = 24;
};

/// Monotone branches of q_t(theta) in contour order, starting at the first
/// fold after theta = 0. Folds are located to fold_theta_tol.
std::vector<Branch> segment_branches(const EvolvedContour& contour, const SegmentOptions& opts = {});

/// Groups branches into foliations (see Foliation). Labels are ordinals by
/// increasing mean initial energy of the branch references.
std::vector<Foliation> group_branches(const std::vector<Branch>& branches, const EvolvedContour& contour);

std::vector<Foliation> segment_foliations(const EvolvedContour& contour,
                                          const SegmentOptions& opts = {});

/// Contour point of the branch whose final position equals x, by safeguarded
/// regula falsi in theta. Returns nullopt when x lies outside the branch range.
std::optional<ContourState> select_reference(const Branch& br, const EvolvedContour& contour, double x);

/// First covering branch of the foliation, in branch order.
std::optional<ContourState> select_reference(const Foliation& fol, const EvolvedContour& contour,
                                             double x);

/// Contour point at fractional position s in [0, 1] of the branch interval.
ContourState branch_point(const Branch& br, const EvolvedContour& contour, double s);

/// Points spread evenly over all branches of a foliation (n >= 1).
std::vector<ContourState> spread_references(const Foliation& fol, const EvolvedContour& contour,
                                            std::size_t n);

/// Enclosed phase-space area of a closed polygon (shoelace).
double polygon_area(const std::vector<double>& q, const std::vector<double>& p);

}  // namespace ggwpd
