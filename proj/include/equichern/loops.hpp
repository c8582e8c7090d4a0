#pragma once

// Discretized free loop space of a surface. Loops are sampled on the grid
// theta_j = 2 pi j / N; all theta quadrature is the periodic trapezoid rule,
// and the trace normalization is Tr = (1/2 pi) * integral over theta, so a
// loop-group gauge of winding W shifts the u-coefficient of the equivariant
// two-form by exactly -i W.

#include "equichern/algebra.hpp"
#include "equichern/geometry.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace equichern {

/// Loop sampled at theta_j = 2 pi j / N.
struct DiscreteLoop {
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }
    double theta(std::size_t j) const;
    /// Chart shared by every sample, or -1 when the loop uses several.
    int chart() const;

    static DiscreteLoop sample(std::size_t n, const std::function<Point(double)>& gamma);
    static DiscreteLoop constant(std::size_t n, const Point& p);
};

/// Per-sample unitaries a_j = a(theta_j).
struct LoopGauge {
    std::vector<Mat> values;

    std::size_t size() const { return values.size(); }
    int rank() const { return values.empty() ? 0 : static_cast<int>(values[0].rows()); }

    static LoopGauge sample(std::size_t n, const std::function<Mat(double)>& a);
    static LoopGauge identity(std::size_t n, int rank);
};

/// Loop of fibre frames: frame_j relates the chart frame to the chosen one,
/// sigma(theta_j) = s_chart(gamma(theta_j)) frame_j.
struct FrameLoop {
    DiscreteLoop loop;
    LoopGauge frame;

    static FrameLoop canonical(const DiscreteLoop& loop, int rank);
};

using LoopTangentField = std::vector<Vec2>;
using LoopSection = std::vector<CVec>;

/// Rejection for loops outside the trivialization tube.
class OutsideTube : public Rejected {
public:
    OutsideTube(const std::string& msg, double distance) : Rejected(msg), distance_(distance) {}
    double max_distance() const { return distance_; }

private:
    double distance_;
};

/// Rejection carrying the winding number that obstructs an operation.
class NonzeroWinding : public Rejected {
public:
    NonzeroWinding(const std::string& msg, int winding) : Rejected(msg), winding_(winding) {}
    int winding() const { return winding_; }

private:
    int winding_;
};

// ------------------------------------------------------------------ presets

/// "equator", "latitude(a)" (colatitude a), "tilted(a)" (great circle tilted
/// by a), "figure" (figure-eight in the north chart), "constant(x,y)" on S^2;
/// "figure-chart(t2)" on the torus.
DiscreteLoop loop_preset(const std::string& name, std::size_t n = 256);

// ------------------------------------------------------------ loop rotation

/// Samples of k_theta0 applied to the loop: gamma(theta_j + theta0). Grid
/// multiples are cyclic shifts; other angles need interpolate = true and use
/// the trigonometric interpolant (single-chart loops only).
DiscreteLoop loop_rotate(const DiscreteLoop& loop, double theta0, bool interpolate = false);
FrameLoop loop_rotate(const FrameLoop& loop, double theta0, bool interpolate = false);
LoopSection loop_rotate(const LoopSection& s, double theta0, bool interpolate = false);
LoopGauge loop_rotate(const LoopGauge& a, double theta0, bool interpolate = false);

/// Right action of a loop-group element on frames: frame_j -> frame_j a_j.
FrameLoop right_act(const FrameLoop& f, const LoopGauge& a);

// ----------------------------------------------------------------- velocity

/// Spectral derivative of the chart coordinates (single-chart loops, N >= 16).
LoopTangentField loop_velocity(const DiscreteLoop& loop);
/// Fourth-order periodic central differences, for cross-checks.
LoopTangentField loop_velocity_fd(const DiscreteLoop& loop);
/// Spectral derivative of the frame matrices.
std::vector<Mat> frame_velocity(const FrameLoop& f);
/// omega(gamma_bar'(theta_j)) = g^{-1} A(gamma') g + g^{-1} g'.
std::vector<Mat> frame_connection_pairing(const BundleWithConnection& b, const FrameLoop& f);

/// Largest eigen-angle of a_j^* a_{j+1}; the smoothness proxy rejects > 0.5 rad.
double max_step_rotation(const LoopGauge& a);

// ------------------------------------------------------- pushdown geometry

/// Components over gamma_0 of the section s over gamma (given in chart-frame
/// components at gamma(theta)): frame0^{-1} P_c^{-1} s, with c_theta the
/// straight chart segment from gamma_0(theta) to gamma(theta).
LoopSection pushdown_trivialize(const BundleWithConnection& b, const FrameLoop& gamma0,
                                const DiscreteLoop& gamma, const LoopSection& s, int segments = 4);

/// Transition u(theta) = frame0^{-1} P_c^{-1} P_d frame1 between the
/// trivializations centred at gamma_0 and gamma_1, evaluated over gamma.
LoopGauge transition_extract(const BundleWithConnection& b, const FrameLoop& gamma0,
                             const FrameLoop& gamma1, const DiscreteLoop& gamma, int segments = 4);

/// max_j chart distance |gamma(theta_j) - gamma_0(theta_j)| (in gamma_0's charts).
double tube_distance(const ChartedManifold& m, const DiscreteLoop& gamma0, const DiscreteLoop& gamma);

// ------------------------------------------------------------------ winding

struct WindingReport {
    int winding = 0;
    double phase_unwrap = 0.0;    // method A before rounding
    double trace_integral = 0.0;  // method B before rounding
    double agreement = 0.0;       // |A - B|
    double non_integrality = 0.0; // |B - winding|
};

/// Winding number of det a by phase unwrapping and by the trace integral
/// (1/2 pi i) * integral of tr(a^{-1} a'). Rejects det-phase steps of 0.75 pi
/// or more as undersampled.
WindingReport winding_number(const LoopGauge& a);

/// (1/2 pi) * trapezoid integral of tr over theta.
Complex leading_trace(const std::vector<Mat>& field);

/// a^{-1} a' per sample (spectral a').
std::vector<Mat> maurer_cartan(const LoopGauge& a);

// ----------------------------------------------------------- loop 2-forms

/// Tr(Omega~ - u omega~(X)) on (Y, Z): u^0 is (1/2pi) int tr F(Y, Z), u^1 is
/// -(1/2pi) int tr omega(gamma_bar'). Rejects frames failing the smoothness proxy.
UScalar equivariant_two_form(const BundleWithConnection& b, const FrameLoop& f,
                             const LoopTangentField& Y, const LoopTangentField& Z);

/// Equivariant first Chern form beta_[2](Y, Z) + u beta_[0] from a
/// winding-zero frame. The loop overload uses the chart frame (moving the
/// loop into one chart when possible); the frame overload rejects frames of
/// nonzero winding with the obstructing integer.
UScalar equivariant_first_chern_form(const BundleWithConnection& b, const DiscreteLoop& gamma,
                                     const LoopTangentField& Y, const LoopTangentField& Z);
UScalar equivariant_first_chern_form(const BundleWithConnection& b, const FrameLoop& f,
                                     const LoopTangentField& Y, const LoopTangentField& Z);

// ------------------------------------------------- non-pointwise operator

using LoopFunction = std::function<std::vector<Complex>(const DiscreteLoop&)>;
using LoopSectionField = std::function<LoopSection(const DiscreteLoop&)>;

struct CommutatorDefect {
    LoopSection defect;    // D(f s) - f D(s)
    LoopSection expected;  // -(df/dtheta) s
    double mismatch = 0.0; // max |defect - expected|
    double size = 0.0;     // max |defect|
};

struct OperatorOptions {
    double step = 1e-3;  // fourth-order stencil in the rotation angle
    int average_nodes = 1;
};

/// D = L_X - nabla^ave_X on sections of the pushdown bundle at gamma. L_X is
/// differentiated from rotated loops and shifted outputs; nabla_X from parallel
/// transport along the loop's own rotation flow. nabla^ave averages the
/// pullbacks by average_nodes grid rotations.
LoopSection D_operator(const BundleWithConnection& b, const DiscreteLoop& gamma, const LoopSectionField& s,
                       const OperatorOptions& opt = {});

CommutatorDefect D_commutator_defect(const BundleWithConnection& b, const DiscreteLoop& gamma,
                                     const LoopFunction& f, const LoopSectionField& s,
                                     const OperatorOptions& opt = {});

// ----------------------------------------------------- loop-space calculus

/// Loop-space form of some total degree; the u^j piece is evaluated on the
/// first (total degree - 2j) tangent fields.
using LoopForm = std::function<UScalar(const DiscreteLoop&, const std::vector<LoopTangentField>&)>;

/// Tr(Omega~ - u omega~(X))^k with the chart frame, evaluated per theta in
/// the Grassmann algebra generated by the supplied fields (total degree 2k).
LoopForm loop_chern_weil_form(const BundleWithConnection& b, int k);

/// Predicted value of (d - u i_X) Tr(Omega~ - u omega~(X))^k for pointwise
/// products: -u k Tr(E^{k-1} L), where L(Y) = d/dtheta [A(Y(theta))] is the
/// Lie derivative of the per-theta connection. It is a total theta-derivative
/// for k = 1 and generally nonzero for k >= 2. Total degree 2k + 1.
LoopForm loop_closedness_obstruction(const BundleWithConnection& b, int k);

/// Connection on the segment between two bundles over the same base:
/// A_t = (1 - t) A_0 + t A_1, curvature by finite differences.
BundleWithConnection interpolate_connection(const BundleWithConnection& b0, const BundleWithConnection& b1,
                                            double t);

/// k * int_0^1 Tr(alpha~ (Omega~_t - u omega~_t(X))^{k-1}) dt with
/// alpha = A_1 - A_0 (total degree 2k - 1), Gauss-Legendre in t.
LoopForm loop_transgression_form(const BundleWithConnection& b0, const BundleWithConnection& b1, int k,
                                 int gauss_nodes = 8);

struct LoopDOptions {
    double step = 1e-4;  // directional step in loop coordinates
};

/// (d - u i_X) of the form at gamma on fields Y_0..: the u^j piece is evaluated
/// on the first total + 1 - 2j fields. d uses loop-independent extension
/// fields, whose brackets vanish; X(gamma) = gamma'.
UScalar loopspace_equivariant_d(const LoopForm& form, int total_degree, const DiscreteLoop& gamma,
                                const std::vector<LoopTangentField>& fields, const LoopDOptions& opt = {});

// ------------------------------------------------------------ transgression

struct TorusMap {
    std::size_t nt = 0, ns = 0;
    std::vector<Vec3> points;  // row-major, index t * ns + s

    const Vec3& at(std::size_t t, std::size_t s) const { return points[(t % nt) * ns + (s % ns)]; }
};

struct DegreeReport {
    TorusMap map;
    int degree = 0;
    double raw = 0.0;             // solid-angle sum / 4 pi
    double quadrature = 0.0;      // area-form quadrature / 4 pi (second order)
    double non_integrality = 0.0; // |raw - degree|
};

/// Torus map (t, s) -> beta(t)(s) into S^2 and its degree from exact signed
/// solid angles of the grid triangles. Rejects cells whose neighbouring
/// points are more than pi/2 apart.
DegreeReport transgress_loop_family(const ChartedManifold& m, const std::vector<DiscreteLoop>& family);
DegreeReport transgress_loop_family(const std::vector<std::vector<Vec3>>& grid);

/// Loop of loops sweeping S^2 once: latitude circles from pole to pole,
/// then back along constant loops on a meridian.
std::vector<std::vector<Vec3>> once_covering_family(std::size_t nt, std::size_t ns);

// ------------------------------------------------------------ serialization

void write_table(std::ostream& out, const DiscreteLoop& loop);
void write_table(std::ostream& out, const LoopGauge& a);
void write_table(std::ostream& out, const LoopTangentField& y);
void write_table(std::ostream& out, const LoopSection& s);
DiscreteLoop read_loop_table(std::istream& in);
LoopGauge read_gauge_table(std::istream& in);

}  // namespace equichern
