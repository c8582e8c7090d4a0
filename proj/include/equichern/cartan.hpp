#pragma once

// Finite-dimensional circle-equivariant Chern-Weil theory on a surface:
// the Cartan differential d - u i_X, connection averaging, the moment
// endomorphism, equivariant curvature and basic-form checks on the frame
// bundle.

#include "equichern/algebra.hpp"
#include "equichern/geometry.hpp"

#include <functional>
#include <map>
#include <memory>
#include <vector>

namespace equichern {

struct CartanOptions {
    double fd_step = 1e-5;    // exterior derivatives
    double flow_step = 1e-4;  // Lie derivatives along the action
    int flow_samples = 16;    // samples of the transport curve along the flow
};

/// Scalar differential form of degree 0, 1 or 2 on a surface, given by its
/// coefficients in the chart coordinate basis: {f}, {f_x, f_y} or {f_xy}.
struct FormField {
    using Coefficients = std::function<std::vector<Complex>(const Point&)>;

    int degree = 0;
    Coefficients coeffs;
    /// Optional closed-form exterior derivative (coefficients of degree + 1).
    Coefficients exterior_derivative;

    /// Value on the first `degree` vectors.
    Complex evaluate(const Point& p, const std::vector<Vec2>& vectors) const;
};

/// sum_k u^k alpha_k with alpha_k of form degree total_degree - 2k.
struct EquivariantFormField {
    std::shared_ptr<const ChartedManifold> base;
    int total_degree = 0;
    std::map<int, FormField> pieces;  // u-power -> form

    /// Each u^k piece evaluated on the first (total_degree - 2k) vectors.
    UScalar evaluate(const Point& p, const std::vector<Vec2>& vectors) const;
    /// Largest deviation |k_theta^* alpha - alpha| over the given angles.
    double invariance_defect(const Point& p, const std::vector<Vec2>& vectors,
                             const std::vector<double>& angles) const;
};

/// (d - u i_X) f as a new field of total degree + 1. Exterior derivatives
/// use the analytic coefficients when present and central differences of the
/// coordinate coefficients otherwise (coordinate fields commute).
EquivariantFormField equivariant_differential(const EquivariantFormField& f,
                                              const CartanOptions& opt = {});

struct DifferentialValue {
    UScalar value;
    /// Set when the operand is not invariant at the sample point, in which
    /// case (d - u i_X)^2 = -u L_X need not vanish.
    bool non_invariant = false;
    double invariance_defect = 0.0;
};

/// Evaluates (d - u i_X) f at p on the supplied vectors (the u^k piece of
/// the result is evaluated on the first total_degree + 1 - 2k of them).
DifferentialValue equivariant_differential(const EquivariantFormField& f, const Point& p,
                                           const std::vector<Vec2>& vectors,
                                           const CartanOptions& opt = {});

/// Multiplication by u on fields.
EquivariantFormField periodicity_shift(const EquivariantFormField& f);

/// tr (Omega - u omega(X))^k as an equivariant form of total degree 2k,
/// evaluated through the Grassmann algebra in the chart frame.
EquivariantFormField chern_weil_form(const BundleWithConnection& b, int k);

/// Averages the connection over the circle action with a Q-node rule:
/// A_ave(p)(v) = (1/Q) sum_q L_q^{-1} A(k_q p)(dk_q v) L_q, theta_q = 2 pi q / Q.
/// Requires a lift; rejects Q < 4. Curvature is recomputed by differences.
BundleWithConnection average_connection(const BundleWithConnection& b, int Q);

/// |L^{-1} A(k_theta p)(dk_theta v) L - A(p)(v)|.
double connection_invariance_defect(const BundleWithConnection& b, const Point& p, const Vec2& v,
                                    double theta);
/// |L^{-1} F(k_theta p)(dk v, dk w) L - F(p)(v, w)|.
double curvature_invariance_defect(const BundleWithConnection& b, const Point& p, const Vec2& v,
                                   const Vec2& w, double theta);

/// mu = L_X - nabla_X as a field of endomorphisms in chart frames.
struct MomentEndomorphism {
    std::function<Mat(const Point&)> at;
    /// |mu + mu^*| at p.
    double skew_defect(const Point& p) const;
};

/// L_X from the lifted action and nabla_X from parallel transport along the
/// flow, both differenced with a two-sided fourth-order stencil of the flow step. At fixed points of
/// the action the transport is the identity and only the lift contributes.
MomentEndomorphism moment_endomorphism(const BundleWithConnection& b, const CartanOptions& opt = {});

/// tr exp(Omega_hat + u mu) with Grassmann generators xi_i bound to the
/// vectors v_i: Omega_hat = sum_{i<j} F(v_i, v_j) xi_i xi_j. u-powers beyond
/// max_u are truncated (flagged). Rejects more than 6 vectors.
UGrassmann equivariant_chern_character(const BundleWithConnection& b, const Point& p,
                                       const std::vector<Vec2>& vectors, int max_u = 4);

/// Frame over a chart: sigma = s_chart g.
struct FrameSection {
    int chart = 0;
    GaugeField g;
};

/// Omega(v, w) - u omega(X~) in the frame sigma, where X~ is the generator of
/// the lifted action on frames: omega(X~) = g^{-1} (A(X) + G) g. The u^0
/// coefficient is g^{-1} F(v, w) g. Rejects points that cannot be moved into
/// the frame's chart.
ULaurent<Mat> equivariant_curvature_principal(const BundleWithConnection& b, const FrameSection& s,
                                              const Point& p, const Vec2& v, const Vec2& w);

/// Tangent vector (v, g eta) to the local trivialization U x U(n) at (p, g).
struct TotalSpaceVector {
    Vec2 v = Vec2::Zero();
    Mat eta;  // in u(n)
};

/// Form on the local frame bundle, each u^k piece evaluated on the first
/// (total degree - 2k) vectors.
using TotalSpaceForm =
    std::function<ULaurent<Mat>(const Point&, const Mat& g, const std::vector<TotalSpaceVector>&)>;

/// omega_{(p,g)}(v, g eta) = g^{-1} A(v) g + eta (total degree 1).
TotalSpaceForm connection_form(const BundleWithConnection& b);
/// Curvature on the frame bundle from the structure equation
/// Omega = d omega + omega ^ omega, with left-invariant vertical fields and
/// derivatives along their flows by a fourth-order central stencil of step h.
Mat total_space_curvature(const BundleWithConnection& b, const Point& p, const Mat& g,
                          const TotalSpaceVector& y1, const TotalSpaceVector& y2, double h = 1e-3);
/// tr (Omega - u omega(X~))^k on the frame bundle (total degree 2k; values are 1x1).
TotalSpaceForm chern_weil_total_space_form(const BundleWithConnection& b, int k, double h = 1e-3);

struct BasicReport {
    double horizontality_defect = 0.0;  // contraction with V_eta
    double invariance_defect = 0.0;     // R_a^* beta - beta
};

/// Horizontality and right-invariance of a total-space form at (p, g), using
/// the vertical sample eta and the constant gauge a. `others` supplies the
/// remaining arguments (total degree - 1 of them are used at most).
BasicReport check_basic(const TotalSpaceForm& form, int total_degree, const Point& p, const Mat& g,
                        const Mat& a, const Mat& eta, const std::vector<TotalSpaceVector>& others);

}  // namespace equichern
