#pragma once

// Two-dimensional base manifolds carrying a circle action, hermitian vector
// bundles with unitary connections, parallel transport and quadrature.
//
// Conventions used throughout:
//  * A point is a chart index plus chart coordinates (x, y).
//  * A local frame s_a over chart a; on an overlap s_b = s_a g_ab, and the
//    connection matrices satisfy A_b = g_ab^{-1} A_a g_ab + g_ab^{-1} d g_ab.
//  * Components f of a section (s = s_a f) obey f' = -A(c') f along a
//    horizontal curve c.
//  * Curvature F = dA + A ^ A is stored as its dx ^ dy coefficient F_xy.
//  * The action lifts to frames by a chart-constant generator G_a:
//    the lift maps s_a(p) f to s_a(k_theta p) exp(theta G_a) f.

#include "equichern/algebra.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace equichern {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;

struct Point {
    int chart = 0;
    Vec2 x = Vec2::Zero();
};

/// Rejection carrying the index of the first sample outside every chart.
class CurveOutsideCharts : public Rejected {
public:
    CurveOutsideCharts(const std::string& msg, std::size_t index) : Rejected(msg), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

/// Map from the unit square onto the manifold (minus a null set), used for
/// area quadrature. Returns the point and the Jacobian d(chart coords)/d(s,t);
/// the orientation of (s, t) agrees with the manifold orientation.
using SquareParametrization = std::function<std::pair<Point, Mat2>(double s, double t)>;

/// Smooth surface with an atlas and a circle action.
struct ChartedManifold {
    struct Chart {
        std::string name;
        std::function<bool(const Vec2&)> contains;
    };

    std::string name;
    std::vector<Chart> charts;
    /// Coordinates of the same point in chart `to`; empty off the overlap.
    std::function<std::optional<Vec2>(int from, int to, const Vec2&)> change;
    /// k_theta in chart coordinates (the image stays in the same chart).
    std::function<Vec2(int chart, const Vec2&, double theta)> act;
    /// Optional closed-form Jacobian of k_theta; differences are used otherwise.
    std::function<Mat2(int chart, const Vec2&, double theta)> act_jacobian;
    /// Generator X_M = d/dtheta k_theta at theta = 0.
    std::function<Vec2(int chart, const Vec2&)> generator;
    /// Riemannian area density sqrt(det g) in chart coordinates.
    std::function<double(int chart, const Vec2&)> area_density;
    /// Optional embedding into R^3 (S^2 only).
    std::function<Vec3(const Point&)> embed;
    /// Optional inverse of embed choosing a well-conditioned chart.
    std::function<Point(const Vec3&)> from_embedding;
    /// Optional parametrization for integrating over the whole (compact) base.
    SquareParametrization square;

    int chart_count() const { return static_cast<int>(charts.size()); }
    bool in_chart(const Point& p) const;
    /// Same point expressed in chart `to`; rejects off the overlap.
    Point to_chart(const Point& p, int to) const;
    /// Jacobian of the coordinate change at p (central differences).
    Mat2 change_jacobian(const Point& p, int to, double h = 1e-6) const;
    Point rotate(const Point& p, double theta) const { return {p.chart, act(p.chart, p.x, theta)}; }
    /// Pushforward dk_theta(v) at p (central differences).
    Vec2 rotate_vector(const Point& p, const Vec2& v, double theta, double h = 1e-6) const;
};

std::shared_ptr<const ChartedManifold> make_sphere();
std::shared_ptr<const ChartedManifold> make_torus();
std::shared_ptr<const ChartedManifold> make_plane();

/// Hermitian rank-n bundle with a unitary connection over a ChartedManifold.
struct BundleWithConnection {
    std::string name;
    std::shared_ptr<const ChartedManifold> base;
    int rank = 1;
    /// (A_x, A_y) at a chart point.
    std::function<std::array<Mat, 2>(int chart, const Vec2&)> connection;
    /// Optional closed-form F_xy; finite differences of A are used otherwise.
    std::function<Mat(int chart, const Vec2&)> curvature_xy;
    /// g_ab at a point given in chart a coordinates.
    std::function<Mat(int from, int to, const Vec2&)> transition;
    /// Chart-constant generator G_a of the fibre lift; empty means the
    /// action does not lift (no moment map available).
    std::function<Mat(int chart)> lift_generator;
    /// Central-difference step in chart coordinates.
    double fd_step = 1e-5;
    /// Radius of the tube around a loop inside which pushdown trivializations
    /// are accepted.
    double tube_radius = 0.5;

    std::array<Mat, 2> A(const Point& p) const { return connection(p.chart, p.x); }
    Mat A_on(const Point& p, const Vec2& v) const;
    Mat F(const Point& p) const;
    Mat F_on(const Point& p, const Vec2& v, const Vec2& w) const;
    /// F_xy computed from A by central differences, ignoring curvature_xy.
    Mat F_fd(const Point& p) const;
    Mat transition_at(const Point& p, int to) const;
    bool has_lift() const { return static_cast<bool>(lift_generator); }
    Mat lift_generator_at(int chart) const;
    /// exp(theta G_a).
    Mat lift(int chart, double theta) const;
    /// omega(X) in the chart frame: A(X_M) + G_a.
    Mat omega_X(const Point& p) const;
    /// Moment endomorphism mu = L_X - nabla_X = -omega(X).
    Mat moment(const Point& p) const { return -omega_X(p); }
    Mat identity() const { return Mat::Identity(rank, rank); }
};

/// O(k) over S^2 with the Fubini-Study connection scaled by k.
BundleWithConnection bundle_sphere_line(int k);
/// O(k1) + O(k2) with the diagonal connection.
BundleWithConnection bundle_sphere_sum(int k1, int k2);
/// Line bundle over the torus with A = -2 pi i x dy.
BundleWithConnection bundle_torus_theta();
/// Product bundle with A = 0 and a constant lift generator (defaults to 0).
BundleWithConnection bundle_trivial(std::shared_ptr<const ChartedManifold> base, int rank,
                                    std::optional<Mat> lift = std::nullopt);
/// Rank-2 rotation-invariant non-abelian connection on the plane:
/// A = i c1 f (x dy - y dx) sigma_z + i c2 f (x dx + y dy) sigma_x, f = 1/(1+r^2).
BundleWithConnection bundle_plane_su2(double c1 = 1.0, double c2 = 0.7);

/// Preset lookup: "s2/o(k)", "s2/o(k1)+o(k2)", "s2/trivial(n)", "t2/theta",
/// "t2/trivial(n)", "plane/su2", "plane/trivial(n)".
BundleWithConnection bundle_from_preset(const std::string& name);

/// Bundle from a text description, e.g.
///
///     name  demo
///     base  plane
///     rank  1
///     action rotation
///     lift  0 0
///     A_x 0 0  = -y/(1+x^2+y^2) | 0
///     A_y 0 0  =  x/(1+x^2+y^2) | 0
///
/// Entry lines give real | imaginary parts of one matrix entry of the
/// u(n)-valued coefficient; unspecified entries are zero. Bases: plane or
/// torus. Curvature is computed by finite differences.
BundleWithConnection bundle_from_description(const std::string& text);

/// Adds a per-chart matrix 1-form to the connection (curvature is then
/// recomputed by finite differences).
BundleWithConnection add_one_form(const BundleWithConnection& b,
                                  std::function<std::array<Mat, 2>(int, const Vec2&)> alpha,
                                  const std::string& suffix = "+alpha");

/// Gauge field over a single chart.
using GaugeField = std::function<Mat(int chart, const Vec2&)>;

/// Connection of the frame s g: g^{-1} A g + g^{-1} dg, dg by central
/// differences with step h. Rejects non-unitary g (beyond 1e-8).
std::array<Mat, 2> gauge_transform(const std::array<Mat, 2>& A, const GaugeField& g,
                                   const Point& p, double h = 1e-5);
/// Whole-bundle version; curvature of the result is computed by finite
/// differences so that F -> g^{-1} F g is a checkable property.
BundleWithConnection gauge_transform(const BundleWithConnection& b, GaugeField g, double h = 1e-5);

enum class CurveInterpolation { linear, trigonometric };

/// Ordered samples of a curve. For closed curves the last sample is joined
/// back to the first. Trigonometric interpolation treats the samples as
/// equispaced in a 2 pi periodic parameter and requires a single chart.
struct DiscreteCurve {
    std::vector<Point> samples;
    bool closed = false;
    CurveInterpolation interpolation = CurveInterpolation::linear;
};

DiscreteCurve straight_curve(const Point& a, const Point& b, int segments = 1);

struct TransportOptions {
    double tolerance = 1e-11;  // step-doubling self-difference target
    int max_doublings = 10;
};

struct TransportResult {
    Mat matrix;                      // polar-projected transport
    double unitarity_deviation = 0;  // distance of the raw solution from its projection
    double error_estimate = 0;       // self-difference of the last doubling
    int substeps = 0;                // RK4 steps per segment
    int final_chart = 0;
};

/// Transport matrix T: components f(end) = T f(start), start components in
/// the first sample's chart frame and end components in the last sample's
/// chart frame. Chart changes between consecutive samples apply the
/// transition at the earlier sample.
TransportResult parallel_transport(const BundleWithConnection& b, const DiscreteCurve& c,
                                   const TransportOptions& opt = {});

/// (i/2 pi) tr F_xy at the point (dx ^ dy coefficient in its chart).
Complex chern_form(const BundleWithConnection& b, const Point& p);

struct QuadratureGrid {
    int ns = 200;  // first parameter (colatitude on S^2)
    int nt = 400;  // second parameter (longitude on S^2)
};

/// Integral over the compact base of the 2-form beta, given as
/// beta(p, v, w) for coordinate vectors v, w. Midpoint rule on base.square.
Complex integrate_two_form(const ChartedManifold& m,
                           const std::function<Complex(const Point&, const Vec2&, const Vec2&)>& beta,
                           const QuadratureGrid& grid = {});

/// Integral of chern_form over the base; the real part is the Chern number.
double integrate_chern(const BundleWithConnection& b, const QuadratureGrid& grid = {});

/// Max over charts of |A - A^*|, |F - F^*| style skew-hermiticity defects at p.
double skew_hermitian_defect(const BundleWithConnection& b, const Point& p);

}  // namespace equichern
