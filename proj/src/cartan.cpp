#include "equichern/cartan.hpp"

#include "equichern/fourier.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

namespace equichern {

namespace {

constexpr double kPi = std::numbers::pi;

double wedge(const Vec2& v, const Vec2& w) { return v.x() * w.y() - v.y() * w.x(); }

FormField scaled(FormField f, Complex c)
{
    auto inner = f.coeffs;
    f.coeffs = [inner, c](const Point& p) {
        auto v = inner(p);
        for (auto& x : v) x *= c;
        return v;
    };
    f.exterior_derivative = nullptr;
    return f;
}

FormField sum(const FormField& a, const FormField& b)
{
    if (a.degree != b.degree) throw Rejected("form sum: degree mismatch");
    FormField r;
    r.degree = a.degree;
    auto ca = a.coeffs, cb = b.coeffs;
    r.coeffs = [ca, cb](const Point& p) {
        auto v = ca(p);
        const auto w = cb(p);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += w[i];
        return v;
    };
    return r;
}

FormField exterior_d(const FormField& f, double h)
{
    FormField r;
    r.degree = f.degree + 1;
    if (f.exterior_derivative) {
        r.coeffs = f.exterior_derivative;
        return r;
    }
    auto c = f.coeffs;
    const int deg = f.degree;
    r.coeffs = [c, deg, h](const Point& p) -> std::vector<Complex> {
        const Point xp{p.chart, p.x + Vec2(h, 0.0)}, xm{p.chart, p.x - Vec2(h, 0.0)};
        const Point yp{p.chart, p.x + Vec2(0.0, h)}, ym{p.chart, p.x - Vec2(0.0, h)};
        if (deg == 0)
            return {(c(xp)[0] - c(xm)[0]) / (2.0 * h), (c(yp)[0] - c(ym)[0]) / (2.0 * h)};
        return {(c(xp)[1] - c(xm)[1]) / (2.0 * h) - (c(yp)[0] - c(ym)[0]) / (2.0 * h)};
    };
    return r;
}

FormField contract_generator(const FormField& f, std::shared_ptr<const ChartedManifold> base)
{
    FormField r;
    r.degree = f.degree - 1;
    auto c = f.coeffs;
    const int deg = f.degree;
    r.coeffs = [c, deg, base](const Point& p) -> std::vector<Complex> {
        const Vec2 X = base->generator(p.chart, p.x);
        const auto a = c(p);
        if (deg == 1) return {a[0] * X.x() + a[1] * X.y()};
        return {-a[0] * X.y(), a[0] * X.x()};
    };
    return r;
}

void add_piece(std::map<int, FormField>& pieces, int power, const FormField& f)
{
    auto it = pieces.find(power);
    if (it == pieces.end()) pieces.emplace(power, f);
    else it->second = sum(it->second, f);
}

UScalar empty_uscalar(int lo, int hi)
{
    return UScalar(std::min(lo, UScalar::kDefaultMin), std::max(hi, UScalar::kDefaultMax), 0.0);
}

// Omega_hat + u * coeff_u with generators bound to vectors; u-bounds [0, max_u].
UGrassmann equivariant_curvature_grassmann(const BundleWithConnection& b, const Point& p,
                                           const std::vector<Vec2>& vectors, const Mat& coeff_u,
                                           int max_u)
{
    const int m = static_cast<int>(vectors.size());
    GrassmannMatrix omega(m, b.rank);
    if (m >= 2) {
        const Mat f = b.F(p);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                omega[(SubsetMask{1} << i) | (SubsetMask{1} << j)] =
                    f * wedge(vectors[static_cast<std::size_t>(i)], vectors[static_cast<std::size_t>(j)]);
    }
    UGrassmann e(0, max_u, GrassmannMatrix(m, b.rank));
    e[0] = omega;
    if (max_u >= 1) e[1] = GrassmannMatrix::scalar(m, coeff_u);
    return e;
}

UGrassmann power(const UGrassmann& e, int k)
{
    const auto& proto = e.zero();
    UGrassmann r = lift_to_u(GrassmannMatrix::identity(proto.generators(), proto.rank()), e.min_deg(),
                             e.max_deg());
    for (int i = 0; i < k; ++i) r = r * e;
    return r;
}

}  // namespace

// -------------------------------------------------------------------- forms

Complex FormField::evaluate(const Point& p, const std::vector<Vec2>& vectors) const
{
    if (static_cast<int>(vectors.size()) < degree)
        throw Rejected("FormField: " + std::to_string(degree) + "-form needs that many vectors");
    const auto c = coeffs(p);
    switch (degree) {
    case 0: return c[0];
    case 1: return c[0] * vectors[0].x() + c[1] * vectors[0].y();
    case 2: return c[0] * wedge(vectors[0], vectors[1]);
    default: return 0.0;
    }
}

UScalar EquivariantFormField::evaluate(const Point& p, const std::vector<Vec2>& vectors) const
{
    int lo = 0, hi = 0;
    for (const auto& [k, f] : pieces) {
        lo = std::min(lo, k);
        hi = std::max(hi, k);
    }
    UScalar r = empty_uscalar(lo, hi);
    for (const auto& [k, f] : pieces) r[k] = f.evaluate(p, vectors);
    return r;
}

double EquivariantFormField::invariance_defect(const Point& p, const std::vector<Vec2>& vectors,
                                               const std::vector<double>& angles) const
{
    double worst = 0.0;
    for (double theta : angles) {
        const Point q = base->rotate(p, theta);
        std::vector<Vec2> moved;
        for (const auto& v : vectors) moved.push_back(base->rotate_vector(p, v, theta));
        for (const auto& [k, f] : pieces)
            worst = std::max(worst, std::abs(f.evaluate(q, moved) - f.evaluate(p, vectors)));
    }
    return worst;
}

EquivariantFormField equivariant_differential(const EquivariantFormField& f, const CartanOptions& opt)
{
    EquivariantFormField r;
    r.base = f.base;
    r.total_degree = f.total_degree + 1;
    for (const auto& [k, alpha] : f.pieces) {
        if (alpha.degree != f.total_degree - 2 * k)
            throw Rejected("equivariant_differential: u^" + std::to_string(k) +
                           " piece has inconsistent form degree");
        // d of a 2-form vanishes on a surface
        if (alpha.degree < 2) add_piece(r.pieces, k, exterior_d(alpha, opt.fd_step));
        if (alpha.degree > 0) add_piece(r.pieces, k + 1, scaled(contract_generator(alpha, f.base), -1.0));
    }
    return r;
}

DifferentialValue equivariant_differential(const EquivariantFormField& f, const Point& p,
                                           const std::vector<Vec2>& vectors, const CartanOptions& opt)
{
    DifferentialValue out;
    out.value = equivariant_differential(f, opt).evaluate(p, vectors);
    std::vector<Vec2> probe = vectors;
    while (probe.size() < 2) probe.push_back(Vec2(0.6, -0.8));
    out.invariance_defect = f.invariance_defect(p, probe, {0.7, 2.1, -1.3});
    out.non_invariant = out.invariance_defect > 1e-6;
    return out;
}

EquivariantFormField periodicity_shift(const EquivariantFormField& f)
{
    EquivariantFormField r;
    r.base = f.base;
    r.total_degree = f.total_degree + 2;
    for (const auto& [k, alpha] : f.pieces) r.pieces.emplace(k + 1, alpha);
    return r;
}

EquivariantFormField chern_weil_form(const BundleWithConnection& b, int k)
{
    if (k < 1) throw Rejected("chern_weil_form: k must be positive");
    EquivariantFormField r;
    r.base = b.base;
    r.total_degree = 2 * k;
    const auto value = [b, k](const Point& p) {
        const std::vector<Vec2> basis{Vec2(1.0, 0.0), Vec2(0.0, 1.0)};
        return trace(power(equivariant_curvature_grassmann(b, p, basis, b.moment(p), k), k));
    };
    FormField top;  // u^{k-1}: the 2-form piece
    top.degree = 2;
    top.coeffs = [value, k](const Point& p) -> std::vector<Complex> {
        return {value(p).at(k - 1)[3](0, 0)};
    };
    FormField bottom;  // u^k: the function piece
    bottom.degree = 0;
    bottom.coeffs = [value, k](const Point& p) -> std::vector<Complex> {
        return {value(p).at(k)[0](0, 0)};
    };
    r.pieces.emplace(k - 1, top);
    r.pieces.emplace(k, bottom);
    return r;
}

// ---------------------------------------------------------------- averaging

BundleWithConnection average_connection(const BundleWithConnection& b, int Q)
{
    if (Q < 4) throw Rejected("average_connection: need at least 4 nodes, got " + std::to_string(Q));
    if (!b.has_lift()) throw Rejected("average_connection: " + b.name + " has no lifted action");

    std::vector<double> angles(static_cast<std::size_t>(Q));
    for (int q = 0; q < Q; ++q) angles[static_cast<std::size_t>(q)] = 2.0 * kPi * q / Q;
    std::vector<std::vector<Mat>> lifts, inverse_lifts;
    for (int c = 0; c < b.base->chart_count(); ++c) {
        lifts.emplace_back();
        inverse_lifts.emplace_back();
        for (double th : angles) {
            lifts.back().push_back(b.lift(c, th));
            inverse_lifts.back().push_back(b.lift(c, -th));
        }
    }

    BundleWithConnection r = b;
    r.name = b.name + "/ave(" + std::to_string(Q) + ")";
    r.curvature_xy = nullptr;
    auto conn = b.connection;
    auto base = b.base;
    const int n = b.rank;
    r.connection = [=](int chart, const Vec2& x) {
        std::array<Mat, 2> acc{Mat::Zero(n, n), Mat::Zero(n, n)};
        for (std::size_t q = 0; q < angles.size(); ++q) {
            const Point p{chart, x};
            const Point kp = base->rotate(p, angles[q]);
            const Vec2 jx = base->rotate_vector(p, Vec2(1.0, 0.0), angles[q]);
            const Vec2 jy = base->rotate_vector(p, Vec2(0.0, 1.0), angles[q]);
            const auto a = conn(chart, kp.x);
            const Mat& L = lifts[static_cast<std::size_t>(chart)][q];
            const Mat& Li = inverse_lifts[static_cast<std::size_t>(chart)][q];
            acc[0] += Li * (a[0] * jx.x() + a[1] * jx.y()) * L;
            acc[1] += Li * (a[0] * jy.x() + a[1] * jy.y()) * L;
        }
        acc[0] /= double(angles.size());
        acc[1] /= double(angles.size());
        return acc;
    };
    return r;
}

double connection_invariance_defect(const BundleWithConnection& b, const Point& p, const Vec2& v,
                                    double theta)
{
    const Point kp = b.base->rotate(p, theta);
    const Vec2 kv = b.base->rotate_vector(p, v, theta);
    const Mat pulled = b.lift(p.chart, -theta) * b.A_on(kp, kv) * b.lift(p.chart, theta);
    return coeff_norm(Mat(pulled - b.A_on(p, v)));
}

double curvature_invariance_defect(const BundleWithConnection& b, const Point& p, const Vec2& v,
                                   const Vec2& w, double theta)
{
    const Point kp = b.base->rotate(p, theta);
    const Vec2 kv = b.base->rotate_vector(p, v, theta), kw = b.base->rotate_vector(p, w, theta);
    const Mat pulled = b.lift(p.chart, -theta) * b.F_on(kp, kv, kw) * b.lift(p.chart, theta);
    return coeff_norm(Mat(pulled - b.F_on(p, v, w)));
}

// ------------------------------------------------------------------- moment

double MomentEndomorphism::skew_defect(const Point& p) const
{
    const Mat m = at(p);
    return coeff_norm(Mat(m + m.adjoint()));
}

MomentEndomorphism moment_endomorphism(const BundleWithConnection& b, const CartanOptions& opt)
{
    if (!b.has_lift()) throw Rejected("moment_endomorphism: " + b.name + " has no lifted action");
    MomentEndomorphism mu;
    mu.at = [b, opt](const Point& p) {
        const bool fixed = b.base->generator(p.chart, p.x).isZero(0.0);
        // L_{-theta} - T_theta^{-1}, with T_theta the transport along the flow
        // from p to k_theta p.
        const auto defect = [&](double theta) {
            Mat tinv = b.identity();
            if (!fixed) {
                DiscreteCurve c;
                for (int s = 0; s <= opt.flow_samples; ++s)
                    c.samples.push_back(b.base->rotate(p, theta * s / opt.flow_samples));
                tinv = parallel_transport(b, c).matrix.adjoint();
            }
            return Mat(b.lift(p.chart, -theta) - tinv);
        };
        const double h = opt.flow_step;
        return Mat((8.0 * (defect(h) - defect(-h)) - (defect(2.0 * h) - defect(-2.0 * h))) / (12.0 * h));
    };
    return mu;
}

UGrassmann equivariant_chern_character(const BundleWithConnection& b, const Point& p,
                                       const std::vector<Vec2>& vectors, int max_u)
{
    if (vectors.size() > static_cast<std::size_t>(GrassmannMatrix::kMaxGenerators))
        throw Rejected("equivariant_chern_character: at most 6 vectors");
    if (max_u < 0) throw Rejected("equivariant_chern_character: negative u bound");
    return trace(exp_nilpotent(equivariant_curvature_grassmann(b, p, vectors, b.moment(p), max_u)));
}

ULaurent<Mat> equivariant_curvature_principal(const BundleWithConnection& b, const FrameSection& s,
                                              const Point& p, const Vec2& v, const Vec2& w)
{
    Point q = p;
    Vec2 vq = v, wq = w;
    if (p.chart != s.chart) {
        try {
            q = b.base->to_chart(p, s.chart);
            const Mat2 j = b.base->change_jacobian(p, s.chart);
            vq = j * v;
            wq = j * w;
        } catch (const Rejected&) {
            throw Rejected("equivariant_curvature_principal: point outside the frame's chart");
        }
    }
    if (!b.base->in_chart(q)) throw Rejected("equivariant_curvature_principal: point outside the frame domain");
    const Mat g = s.g(q.chart, q.x);
    const Mat gi = g.inverse();
    ULaurent<Mat> r(ULaurent<Mat>::kDefaultMin, ULaurent<Mat>::kDefaultMax, Mat::Zero(b.rank, b.rank));
    r[0] = gi * b.F_on(q, vq, wq) * g;
    r[1] = -(gi * b.omega_X(q) * g);
    return r;
}

// ------------------------------------------------------------- total space

namespace {

Mat total_space_omega(const BundleWithConnection& b, const Point& p, const Mat& g,
                      const TotalSpaceVector& y)
{
    return g.adjoint() * b.A_on(p, y.v) * g + y.eta;
}

}  // namespace

TotalSpaceForm connection_form(const BundleWithConnection& b)
{
    return [b](const Point& p, const Mat& g, const std::vector<TotalSpaceVector>& ys) {
        if (ys.empty()) throw Rejected("connection_form: needs one vector");
        ULaurent<Mat> r(ULaurent<Mat>::kDefaultMin, ULaurent<Mat>::kDefaultMax, Mat::Zero(b.rank, b.rank));
        r[0] = total_space_omega(b, p, g, ys[0]);
        return r;
    };
}

Mat total_space_curvature(const BundleWithConnection& b, const Point& p, const Mat& g,
                          const TotalSpaceVector& y1, const TotalSpaceVector& y2, double h)
{
    // Y1(omega(Y2)) along the flow (p + t v1, g exp(t eta1)) of Y1.
    const auto along = [&](const TotalSpaceVector& dir, const TotalSpaceVector& field) {
        const auto at = [&](double t) {
            const Mat gt = g * Mat(t * dir.eta).exp();
            return total_space_omega(b, {p.chart, p.x + t * dir.v}, gt, field);
        };
        return Mat((8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h));
    };
    const Mat w1 = total_space_omega(b, p, g, y1), w2 = total_space_omega(b, p, g, y2);
    // [B_v, B_w] = [B_v, V_eta] = 0 and [V_eta, V_zeta] = V_[eta, zeta]
    const Mat bracket = y1.eta * y2.eta - y2.eta * y1.eta;
    const Mat d_omega = along(y1, y2) - along(y2, y1) - bracket;
    return d_omega + w1 * w2 - w2 * w1;
}

TotalSpaceForm chern_weil_total_space_form(const BundleWithConnection& b, int k, double h)
{
    if (k < 1) throw Rejected("chern_weil_total_space_form: k must be positive");
    return [b, k, h](const Point& p, const Mat& g, const std::vector<TotalSpaceVector>& ys) {
        const int m = std::min<int>(static_cast<int>(ys.size()), 2 * k);
        GrassmannMatrix omega(m, b.rank);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                omega[(SubsetMask{1} << i) | (SubsetMask{1} << j)] =
                    total_space_curvature(b, p, g, ys[static_cast<std::size_t>(i)],
                                          ys[static_cast<std::size_t>(j)], h);
        UGrassmann e(0, k, GrassmannMatrix(m, b.rank));
        e[0] = omega;
        e[1] = GrassmannMatrix::scalar(m, Mat(-(g.adjoint() * b.omega_X(p) * g)));
        const UGrassmann t = trace(power(e, k));
        ULaurent<Mat> r(ULaurent<Mat>::kDefaultMin, ULaurent<Mat>::kDefaultMax, Mat::Zero(1, 1));
        for (int j = 0; j <= k; ++j) {
            const int d = 2 * k - 2 * j;
            if (d > m) continue;
            r[j] = t.at(j)[(SubsetMask{1} << d) - 1];
        }
        return r;
    };
}

BasicReport check_basic(const TotalSpaceForm& form, int total_degree, const Point& p, const Mat& g,
                        const Mat& a, const Mat& eta, const std::vector<TotalSpaceVector>& others)
{
    BasicReport rep;
    std::vector<TotalSpaceVector> with_vertical{TotalSpaceVector{Vec2::Zero(), eta}};
    with_vertical.insert(with_vertical.end(), others.begin(), others.end());
    const auto contracted = form(p, g, with_vertical);
    for (int j = contracted.min_deg(); j <= contracted.max_deg(); ++j) {
        const int d = total_degree - 2 * j;
        if (d >= 1 && d <= static_cast<int>(with_vertical.size()))
            rep.horizontality_defect = std::max(rep.horizontality_defect, coeff_norm(contracted.at(j)));
    }

    std::vector<TotalSpaceVector> moved;
    const Mat ai = a.inverse();
    for (const auto& y : others) moved.push_back({y.v, Mat(ai * y.eta * a)});
    const auto before = form(p, g, others);
    const auto after = form(p, Mat(g * a), moved);
    rep.invariance_defect = (after - before).norm();
    return rep;
}

}  // namespace equichern
