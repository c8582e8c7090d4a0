#include "equichern/cartan.hpp"
#include "equichern/fourier.hpp"

#include "support.hpp"

#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace equichern;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

Mat mat1(Complex c)
{
    Mat m(1, 1);
    m(0, 0) = c;
    return m;
}

FormField function_form(std::function<Complex(const Vec2&)> f)
{
    FormField r;
    r.degree = 0;
    r.coeffs = [f](const Point& p) { return std::vector<Complex>{f(p.x)}; };
    return r;
}

FormField two_form(std::function<Complex(const Vec2&)> f)
{
    FormField r;
    r.degree = 2;
    r.coeffs = [f](const Point& p) { return std::vector<Complex>{f(p.x)}; };
    return r;
}

// Invariant total-degree-2 element on the plane: u^0 g(r) dx^dy + u^1 h(r).
EquivariantFormField invariant_sample()
{
    EquivariantFormField f;
    f.base = make_plane();
    f.total_degree = 2;
    f.pieces.emplace(0, two_form([](const Vec2& x) { return Complex(std::exp(-x.squaredNorm()), 0.5); }));
    f.pieces.emplace(1, function_form([](const Vec2& x) { return Complex(std::cos(x.squaredNorm()), 0.0); }));
    return f;
}

// The non-invariant perturbation i eps x (x dy - y dx)/(1+r^2)^3 in the north chart.
std::array<Mat, 2> bump(double eps, const Vec2& x)
{
    const double d = 1.0 + x.squaredNorm();
    const double c = eps * x.x() / (d * d * d);
    return {mat1(-kI * c * x.y()), mat1(kI * c * x.x())};
}

}  // namespace

TEST_CASE("equivariant differential: constants and the height function")
{
    EquivariantFormField c;
    c.base = make_sphere();
    c.total_degree = 0;
    c.pieces.emplace(0, function_form([](const Vec2&) { return Complex(2.5); }));
    const auto dc = equivariant_differential(c, {0, Vec2(0.3, 0.4)}, {Vec2(1, 0)});
    CHECK(dc.value.norm() == 0.0);

    EquivariantFormField h;
    h.base = make_sphere();
    h.total_degree = 0;
    FormField height = function_form([](const Vec2& x) {
        const double r2 = x.squaredNorm();
        return Complex((1.0 - r2) / (1.0 + r2));
    });
    h.pieces.emplace(0, height);
    const Point p{0, Vec2(0.3, -0.6)};
    const Vec2 v(0.2, 0.9);
    const auto dh = equivariant_differential(h, p, {v});
    const double d = 1.0 + p.x.squaredNorm();
    const Complex exact = -4.0 * p.x.dot(v) / (d * d);
    CHECK(std::abs(dh.value.at(0) - exact) < 1e-9);
    CHECK(dh.value.at(1) == Complex(0.0));
    CHECK_FALSE(dh.non_invariant);
}

TEST_CASE("equivariant differential squares to zero on invariant forms")
{
    const auto f = invariant_sample();
    const auto df = equivariant_differential(f);
    const auto ddf = equivariant_differential(df);
    for (const Vec2 x : {Vec2(0.3, 0.2), Vec2(-0.8, 0.5)}) {
        const auto r = ddf.evaluate({0, x}, {Vec2(1.0, 0.3), Vec2(-0.2, 0.7)});
        CHECK(r.norm() < 1e-4);
    }

    // a non-invariant function is flagged and d^2 = -u L_X survives
    EquivariantFormField g;
    g.base = make_plane();
    g.total_degree = 0;
    g.pieces.emplace(0, function_form([](const Vec2& x) { return Complex(x.x()); }));
    const Point p{0, Vec2(0.5, 0.25)};
    CHECK(equivariant_differential(g, p, {Vec2(1, 0)}).non_invariant);
    const auto dd = equivariant_differential(equivariant_differential(g)).evaluate(p, {Vec2(1, 0), Vec2(0, 1)});
    // L_X x = -y
    CHECK(std::abs(dd.at(1) - (-1.0) * (-p.x.y())) < 1e-6);
}

TEST_CASE("periodicity shift commutes with the equivariant differential")
{
    const auto f = invariant_sample();
    const Point p{0, Vec2(0.4, -0.1)};
    const std::vector<Vec2> vs{Vec2(0.3, 1.0), Vec2(1.0, -0.5)};
    const auto lhs = equivariant_differential(periodicity_shift(f)).evaluate(p, vs);
    const auto rhs = periodicity_shift(equivariant_differential(f).evaluate(p, vs));
    CHECK((lhs - rhs).norm() < 1e-14);
    // closedness is preserved
    const auto cw = chern_weil_form(bundle_sphere_line(1), 1);
    CHECK(equivariant_differential(periodicity_shift(cw)).evaluate({0, Vec2(0.2, 0.5)}, vs).norm() < 1e-6);
}

TEST_CASE("chain relations for the u = 1 and u = -1 projections")
{
    const auto f = invariant_sample();
    const auto df = equivariant_differential(f);
    const Point p{0, Vec2(0.35, 0.6)};
    const Vec2 v(0.8, -0.4);
    const double h = 1e-5;
    // For f = alpha_2 + u phi: d phi(v) and (i_X alpha_2)(v).
    const auto phi = [&](const Vec2& x) { return f.pieces.at(1).evaluate({0, x}, {}); };
    const Complex dphi = (phi(p.x + h * v) - phi(p.x - h * v)) / (2.0 * h);
    const Vec2 X = f.base->generator(0, p.x);
    const Complex ix_alpha = f.pieces.at(0).evaluate(p, {X, v});
    const auto val = df.evaluate(p, {v});
    // q (u = 1): q(d - u i_X) f = (d - i_X) q f
    CHECK(std::abs(u_substitute(val, 1.0) - (dphi - ix_alpha)) < 1e-8);
    // u = -1: (d + i_X) applied to alpha - phi
    CHECK(std::abs(u_substitute(val, -1.0) - (-dphi + ix_alpha)) < 1e-8);
}

TEST_CASE("averaging")
{
    const auto o1 = bundle_sphere_line(1);
    const std::vector<Point> pts{{0, Vec2(0.3, 0.7)}, {0, Vec2(-1.2, 0.4)}, {1, Vec2(0.5, -0.2)}};
    const std::vector<Vec2> vecs{Vec2(1, 0), Vec2(0.3, -0.9)};

    SUBCASE("invariant connection is a fixed point")
    {
        const auto ave = average_connection(o1, 8);
        for (const auto& p : pts)
            for (const auto& v : vecs) CHECK(coeff_norm(Mat(ave.A_on(p, v) - o1.A_on(p, v))) < 1e-12);
    }
    SUBCASE("a non-invariant perturbation is removed")
    {
        const auto pert = add_one_form(o1, [](int chart, const Vec2& x) {
            if (chart == 0) return bump(0.3, x);
            return std::array<Mat, 2>{mat1(0.0), mat1(0.0)};
        });
        CHECK(connection_invariance_defect(pert, pts[0], vecs[1], 0.9) > 1e-3);
        const auto ave = average_connection(pert, 32);
        for (const auto& p : pts)
            for (const auto& v : vecs) {
                CHECK(coeff_norm(Mat(ave.A_on(p, v) - o1.A_on(p, v))) < 1e-8);
                for (double th : {0.4, 2.0, 5.1}) CHECK(connection_invariance_defect(ave, p, v, th) < 1e-8);
            }
        for (double th : {0.4, 2.0}) CHECK(curvature_invariance_defect(ave, pts[0], vecs[0], vecs[1], th) < 1e-6);
        const auto twice = average_connection(ave, 32);
        CHECK(coeff_norm(Mat(twice.A_on(pts[1], vecs[1]) - ave.A_on(pts[1], vecs[1]))) < 1e-10);
    }
    SUBCASE("nonabelian lift")
    {
        Mat g = Mat::Zero(2, 2);
        g(0, 1) = 1.0;
        g(1, 0) = -1.0;  // skew generator of a rotation in the fibre
        auto triv = bundle_trivial(make_plane(), 2, g);
        const auto pert = add_one_form(triv, [](int, const Vec2& x) {
            Mat a = Mat::Zero(2, 2), b = Mat::Zero(2, 2);
            a(0, 0) = kI * x.x();
            b(1, 1) = kI * x.y() * x.x();
            return std::array<Mat, 2>{a, b};
        });
        const auto ave = average_connection(pert, 32);
        for (double th : {0.3, 1.7})
            CHECK(connection_invariance_defect(ave, {0, Vec2(0.4, 0.2)}, Vec2(0.5, 1.0), th) < 1e-10);
    }
    CHECK_THROWS_AS(average_connection(o1, 3), Rejected);
    CHECK_THROWS_AS(average_connection(gauge_transform(o1, [](int, const Vec2&) { return mat1(1.0); }), 8),
                    Rejected);
}

TEST_CASE("equivariant curvature in the principal picture")
{
    const double lambda = 0.7;
    const auto flat = bundle_trivial(make_plane(), 1, mat1(kI * lambda));
    const FrameSection id{0, [](int, const Vec2&) { return mat1(1.0); }};
    const auto r = equivariant_curvature_principal(flat, id, {0, Vec2(0.3, 0.1)}, Vec2(1, 0), Vec2(0, 1));
    CHECK(coeff_norm(r.at(0)) == 0.0);
    CHECK(std::abs(r.at(1)(0, 0) + kI * lambda) < 1e-15);

    for (int k : {-2, 1, 3})
        for (double theta0 : {0.4, 1.2, 2.5}) {
            const auto b = bundle_sphere_line(k);
            const Point p = b.base->from_embedding(
                Vec3(std::sin(theta0) * std::cos(0.3), std::sin(theta0) * std::sin(0.3), std::cos(theta0)));
            const Point pn = b.base->to_chart(p, 0);
            const auto e = equivariant_curvature_principal(b, id, pn, Vec2(1, 0), Vec2(0, 1));
            CHECK(std::abs(e.at(1)(0, 0) - kI * double(k) * (1.0 - std::cos(theta0)) / 2.0) < 1e-12);
        }

    // frame changes conjugate both coefficients
    const auto su2 = bundle_plane_su2();
    Mat sx(2, 2);
    sx << 0, 1, 1, 0;
    const FrameSection rot{0, [sx](int, const Vec2& x) { return Mat((kI * x.x() * sx).exp()); }};
    const Point p{0, Vec2(0.6, -0.2)};
    const auto e0 = equivariant_curvature_principal(su2, FrameSection{0, [](int, const Vec2&) {
                                                        return Mat(Mat::Identity(2, 2));
                                                    }},
                                                    p, Vec2(1, 0), Vec2(0, 1));
    const auto e1 = equivariant_curvature_principal(su2, rot, p, Vec2(1, 0), Vec2(0, 1));
    const Mat g = rot.g(0, p.x);
    CHECK(coeff_norm(Mat(e1.at(0) - g.adjoint() * e0.at(0) * g)) < 1e-12);
    CHECK(std::abs(e1.at(1).trace() - e0.at(1).trace()) < 1e-12);
}

TEST_CASE("equivariant Bianchi identity for tr (Omega - u omega(X))^k")
{
    for (const std::string name : {"s2/o(1)", "s2/o(-2)", "s2/o(1)+o(2)", "plane/su2", "t2/theta"}) {
        const auto b = bundle_from_preset(name);
        for (int k : {1, 2}) {
            const auto f = chern_weil_form(b, k);
            for (const Vec2 x : {Vec2(0.3, 0.45), Vec2(-0.9, 0.2)}) {
                const Point p{0, x};
                const auto r = equivariant_differential(f, p, {Vec2(1.0, 0.2), Vec2(-0.4, 0.8)});
                CHECK(r.value.norm() < 1e-4);
                CHECK_FALSE(r.non_invariant);
            }
        }
    }
}

TEST_CASE("moment endomorphism")
{
    for (const std::string name : {"s2/o(1)", "s2/o(-3)", "plane/su2", "t2/theta", "s2/o(2)+o(-1)"}) {
        const auto b = bundle_from_preset(name);
        const auto mu = moment_endomorphism(b);
        for (int chart = 0; chart < b.base->chart_count(); ++chart)
            for (const Vec2 x : {Vec2(0.3, 0.45), Vec2(-0.9, 0.2)}) {
                const Point p{chart, x};
                CHECK(coeff_norm(Mat(mu.at(p) - b.moment(p))) < 1e-7);
                CHECK(mu.skew_defect(p) < 1e-8);
            }
    }
    // isotropy weights at the poles
    for (int k : {-2, 1, 2}) {
        const auto mu = moment_endomorphism(bundle_sphere_line(k));
        CHECK(std::abs(mu.at({1, Vec2::Zero()})(0, 0) - kI * double(k)) < 1e-8);
        CHECK(std::abs(mu.at({0, Vec2::Zero()})(0, 0)) < 1e-8);
        // the fibre over the fixed point rotates with eigenvalue e^{-ik theta}
        const Mat L = bundle_sphere_line(k).lift(1, 0.5);
        CHECK(std::abs(std::log(L(0, 0)) / 0.5 + mu.at({1, Vec2::Zero()})(0, 0)) < 1e-8);
    }
}

TEST_CASE("equivariant Chern character")
{
    const auto triv = bundle_trivial(make_sphere(), 3);
    const auto ch0 = equivariant_chern_character(triv, {0, Vec2(0.1, 0.2)}, {Vec2(1, 0), Vec2(0, 1)});
    CHECK(std::abs(ch0.at(0)[0](0, 0) - 3.0) < 1e-15);
    for (int k = 1; k <= 4; ++k) CHECK(ch0.at(k).norm() == 0.0);

    const auto b = bundle_sphere_line(2);
    const Point p{0, Vec2(0.4, -0.3)};
    const Vec2 v(1.0, 0.5), w(-0.2, 1.0);
    const auto ch = equivariant_chern_character(b, p, {v, w});
    const Complex F = b.F_on(p, v, w)(0, 0), mu = b.moment(p)(0, 0);
    double fact = 1.0;
    for (int k = 0; k <= 4; ++k) {
        if (k > 0) fact *= k;
        CHECK(std::abs(ch.at(k)[0](0, 0) - std::pow(mu, k) / fact) < 1e-14);
        CHECK(std::abs(ch.at(k)[3](0, 0) - F * std::pow(mu, k) / fact) < 1e-14);
    }
    CHECK(std::abs(ch.at(1)[0](0, 0) - b.moment(p).trace()) < 1e-15);

    // u = 0 restriction is the ordinary Chern character integrand
    const auto su2 = bundle_plane_su2();
    const std::vector<Vec2> vs{Vec2(1, 0), Vec2(0, 1), Vec2(0.3, 0.3), Vec2(-1, 2)};
    const auto chs = equivariant_chern_character(su2, p, vs);
    GrassmannMatrix omega(4, 2);
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) omega[(1u << i) | (1u << j)] = su2.F_on(p, vs[i], vs[j]);
    CHECK((chs.at(0) - grassmann_exp(omega).trace()).norm() < 1e-13);

    CHECK_THROWS_AS(equivariant_chern_character(b, p, std::vector<Vec2>(7, v)), Rejected);
}

TEST_CASE("basic forms on the frame bundle")
{
    std::mt19937_64 rng(21);
    for (const std::string name : {"s2/o(1)", "s2/o(-2)", "plane/su2", "s2/o(1)+o(3)"}) {
        const auto b = bundle_from_preset(name);
        const int n = b.rank;
        const Point p{0, Vec2(0.35, -0.5)};
        const Mat g = unitary_projection(testsupport::random_matrix(rng, n));
        const Mat a = unitary_projection(testsupport::random_matrix(rng, n));
        const Mat eta = testsupport::random_skew(rng, n);
        const std::vector<TotalSpaceVector> others{{Vec2(1.0, 0.2), testsupport::random_skew(rng, n)},
                                                   {Vec2(-0.3, 0.8), testsupport::random_skew(rng, n)}};

        // the curvature itself is g^{-1} F g
        const Mat omega = total_space_curvature(b, p, g, others[0], others[1]);
        CHECK(coeff_norm(Mat(omega - g.adjoint() * b.F_on(p, others[0].v, others[1].v) * g)) < 1e-9);

        for (int k : {1, 2}) {
            const auto rep = check_basic(chern_weil_total_space_form(b, k), 2 * k, p, g, a, eta, others);
            CHECK(rep.horizontality_defect < 1e-10);
            CHECK(rep.invariance_defect < 1e-10);
        }
        const auto raw = check_basic(connection_form(b), 1, p, g, a, eta, others);
        CHECK(std::abs(raw.horizontality_defect - coeff_norm(eta)) < 1e-14);
        CHECK(raw.horizontality_defect > 0.0);
    }
}
