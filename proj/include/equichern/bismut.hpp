#pragma once

// Path-ordered solutions H(t) of the Bismut integral equation over a frame
// loop, in Grassmann-valued matrices whose generators stand for tangent fields
// along the loop.
//
// Normalization. The loop parameter is theta in [0, 2 pi) and X is its
// generator. The ODE variable is t = theta / 2 pi in [0, 1]. The plain
// solution is driven by Omega^ + 2 pi omega(gamma_bar'(theta)), i.e. by the
// frame velocity with respect to t, which is what makes the gauge law hold.
// The u-variant is driven by Omega^ - u omega(gamma_bar'(theta)), pairing u
// with the same generator X as the Cartan differential. The two therefore
// agree at u = -2 pi.
//
// Sign. The xi-free part of the plain H(1) solves H' = H omega, so it is the
// inverse of the parallel transport around the loop expressed in the frame:
// H(1)_[0] = g(0)^{-1} P^{-1} g(0) where P solves P' = -A(gamma') P.

#include "equichern/loops.hpp"

#include <iosfwd>

namespace equichern {

enum class BismutVariant { plain, u };

struct BismutOptions {
    std::size_t initial_steps = 0;  // 0: N * 2^k steps, the least with h * max|driver| <= 0.1
    double tolerance = 1e-8;        // successive step-halving difference
    int max_halvings = 4;
    bool drop_curvature = false;    // solve with Omega^ = 0
};

struct PathOrderedSolution {
    BismutVariant variant = BismutVariant::plain;
    int generators = 0;
    int rank = 0;
    std::vector<double> t;         // t_j = j / N, j = 0..N
    std::vector<UGrassmann> H;     // H(t_j); the plain variant only uses u^0
    std::vector<LoopTangentField> fields;
    std::size_t steps = 0;         // RK4 steps of the accepted solve
    int halvings = 0;
    double error_estimate = 0.0;   // Richardson estimate of the accepted solve
    bool truncated = false;        // u-powers beyond the stored range were dropped

    const GrassmannMatrix& plain(std::size_t j) const { return H[j].at(0); }
    const UGrassmann& final() const { return H.back(); }
};

/// Highest u-power stored by the u-variant for m generators.
inline int bismut_u_degree(int generators) { return generators / 2 + 1; }

/// Integrates H' = H (Omega^(t) + sigma omega^(t)) with RK4 on a step grid
/// refined from the initial step count until two successive solutions differ by
/// less than the tolerance. The driver is evaluated off-grid through the
/// trigonometric interpolants of the loop, frame and fields. Rejects odd m,
/// m > 4, frames failing the smoothness proxy and non-convergence.
PathOrderedSolution solve_H(const BundleWithConnection& b, const FrameLoop& f,
                            const std::vector<LoopTangentField>& fields, BismutVariant variant,
                            const BismutOptions& opt = {});

struct GaugeLawReport {
    double law_defect = 0.0;         // max_j |H_a(t_j) - a(0)^{-1} H(t_j) a(t_j)|
    double ingredient_defect = 0.0;  // max_j |omega_a - (Ad_{a^{-1}} omega + a^{-1} a')|
    double trace_defect = 0.0;       // |tr H_a(1) - tr H(1)|
};

/// Checks the right-action law of the plain solution under the loop gauge a,
/// solving again for the transformed frame with the same fields.
GaugeLawReport verify_gauge_law(const BundleWithConnection& b, const FrameLoop& f, const LoopGauge& a,
                                const std::vector<LoopTangentField>& fields, const BismutOptions& opt = {});

struct Degree2Report {
    UScalar bismut;    // xi1 xi2 u^0 and xi-free u^1 coefficients of tr H~(1)
    UScalar loops;     // equivariant_two_form on the same data
    double defect = 0.0;
};

Degree2Report degree2_identity(const BundleWithConnection& b, const FrameLoop& f, const LoopTangentField& Y,
                               const LoopTangentField& Z, const BismutOptions& opt = {});

struct RestrictionReport {
    double character_defect = 0.0;  // |tr H(1) - tr exp(Omega^)| over all coefficients
    double degree2_defect = 0.0;    // |xi1 xi2 coefficient - tr F(Y, Z)|
    double rank_defect = 0.0;       // |xi-free coefficient - n|
    double closedness_residual = 0.0;  // FD gradient of the xi-free trace over the base point
};

/// tr H(1) on the constant loop at p with constant fields Y, Z.
RestrictionReport bch_restriction_check(const BundleWithConnection& b, const Point& p, const Vec2& Y,
                                        const Vec2& Z, std::size_t n = 32);

/// One row per t_j: t, u-power, Grassmann mask, then re/im of each entry.
void write_table(std::ostream& out, const PathOrderedSolution& s);

}  // namespace equichern
