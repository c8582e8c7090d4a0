#include "equichern/bismut.hpp"
#include "equichern/fourier.hpp"

#include "support.hpp"

#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace equichern;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

LoopTangentField field(std::size_t n, double a, double b, int mode)
{
    LoopTangentField y(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double t = 2.0 * kPi * double(j) / double(n);
        y[j] = Vec2(a * std::cos(mode * t) + 0.3, b * std::sin((mode + 1) * t) - 0.2);
    }
    return y;
}

LoopGauge phase_gauge(std::size_t n, int w, double c)
{
    return LoopGauge::sample(n, [w, c](double t) {
        Mat m(1, 1);
        m(0, 0) = std::exp(kI * (w * t + c * std::sin(t)));
        return m;
    });
}

LoopGauge rank2_gauge(std::size_t n, int w, double c1, double c2)
{
    return LoopGauge::sample(n, [=](double t) {
        Mat d = Mat::Identity(2, 2);
        d(0, 0) = std::exp(kI * (w * t));
        Mat sx(2, 2), sz(2, 2);
        sx << 0, 1, 1, 0;
        sz << 1, 0, 0, -1;
        const Mat h = kI * (c1 * std::sin(t + 0.4) * sx + c2 * std::cos(2.0 * t) * sz);
        return Mat(d * h.exp());
    });
}

}  // namespace

TEST_CASE("H starts at the identity")
{
    const auto b = bundle_sphere_line(1);
    const auto loop = loop_preset("figure", 32);
    const auto s = solve_H(b, FrameLoop::canonical(loop, 1), {field(32, 0.2, 0.1, 1), field(32, -0.1, 0.3, 2)},
                           BismutVariant::u);
    CHECK(s.H.front() == lift_to_u(GrassmannMatrix::identity(2, 1), 0, bismut_u_degree(2)));
    CHECK(s.H.size() == 33);
    CHECK(s.t.back() == 1.0);
}

TEST_CASE("a constant driver gives the matrix exponential")
{
    const auto plane = make_plane();
    const auto b = bundle_trivial(plane, 2);
    const std::size_t n = 64;
    Mat gen(2, 2);
    gen << kI * 1.0, 0.0, 0.0, kI * 2.0;
    std::mt19937_64 rng(9);
    const Mat v = unitary_projection(testsupport::random_matrix(rng, 2));
    const Mat M = v * gen * v.adjoint();
    const auto loop = DiscreteLoop::constant(n, {0, Vec2(0.2, 0.1)});
    const FrameLoop f{loop, LoopGauge::sample(n, [&](double t) { return Mat((t * M).exp()); })};
    const auto s = solve_H(b, f, {}, BismutVariant::plain);
    double worst = 0.0;
    for (std::size_t j = 0; j <= n; ++j)
        worst = std::max(worst, coeff_norm(Mat(s.plain(j)[0] - (2.0 * kPi * s.t[j] * M).exp())));
    CHECK(worst < 1e-9);
}

TEST_CASE("rank-one solutions match the scalar closed form")
{
    const auto b = bundle_sphere_line(1);
    const std::size_t n = 64;
    const auto loop = loop_preset("figure", n);
    const auto Y = field(n, 0.2, 0.1, 1), Z = field(n, -0.1, 0.3, 2);
    const auto s = solve_H(b, FrameLoop::canonical(loop, 1), {Y, Z}, BismutVariant::plain);
    const auto v = loop_velocity(loop);
    Complex a = 0.0, c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        a += 2.0 * kPi * b.A_on(loop.points[j], v[j])(0, 0);
        c += b.F_on(loop.points[j], Y[j], Z[j])(0, 0);
    }
    a /= double(n);
    c /= double(n);
    const GrassmannMatrix& h = s.plain(n);
    CHECK(std::abs(h[0](0, 0) - std::exp(a)) < 1e-8);
    CHECK(std::abs(h[0b11](0, 0) - std::exp(a) * c) < 1e-8);
    CHECK(std::abs(h[0b01](0, 0)) == 0.0);
}

TEST_CASE("the xi-free part is the inverse holonomy")
{
    for (const char* name : {"s2/o(1)", "plane/su2", "s2/o(1)+o(2)"}) {
        const auto b = bundle_from_preset(name);
        const auto loop = loop_preset("figure", 64);
        const auto s = solve_H(b, FrameLoop::canonical(loop, b.rank), {}, BismutVariant::plain);
        DiscreteCurve c{loop.points, true, CurveInterpolation::trigonometric};
        const auto p = parallel_transport(b, c);
        CHECK(coeff_norm(Mat(s.final().at(0)[0] - p.matrix.inverse())) < 1e-7);
    }
    const auto b = bundle_sphere_line(1);
    const auto s = solve_H(b, FrameLoop::canonical(loop_preset("equator", 64), 1), {}, BismutVariant::plain);
    CHECK(std::abs(s.final().at(0)[0](0, 0) + 1.0) < 1e-9);
}

TEST_CASE("the gauge law holds for the plain solution")
{
    const std::size_t n = 64;
    SUBCASE("winding-one phase on the equator")
    {
        const auto b = bundle_sphere_line(1);
        const auto f = FrameLoop::canonical(loop_preset("equator", n), 1);
        const auto r = verify_gauge_law(b, f, phase_gauge(n, 1, 0.0), {field(n, 0.2, 0.1, 1), field(n, -0.1, 0.3, 2)});
        CHECK(r.law_defect < 1e-6);
        CHECK(r.ingredient_defect < 1e-8);
        CHECK(r.trace_defect < 1e-7);
    }
    SUBCASE("constant gauge")
    {
        const auto b = bundle_plane_su2();
        std::mt19937_64 rng(4);
        const Mat a = unitary_projection(testsupport::random_matrix(rng, 2));
        const LoopGauge g{std::vector<Mat>(n, a)};
        const auto r = verify_gauge_law(b, FrameLoop::canonical(loop_preset("figure", n), 2), g,
                                        {field(n, 0.2, 0.1, 1), field(n, -0.1, 0.3, 2)});
        CHECK(r.law_defect < 1e-10);
        CHECK(r.trace_defect < 1e-12);
    }
    SUBCASE("rank two with four fields")
    {
        const auto b = bundle_plane_su2();
        for (int w : {-1, 0, 2}) {
            const auto r = verify_gauge_law(b, FrameLoop::canonical(loop_preset("figure", n), 2),
                                            rank2_gauge(n, w, 0.6, 0.3),
                                            {field(n, 0.2, 0.1, 1), field(n, -0.1, 0.3, 2), field(n, 0.1, 0.1, 0),
                                             field(n, 0.05, -0.2, 3)});
            CHECK(r.law_defect < 1e-6);
            CHECK(r.ingredient_defect < 1e-8);
            CHECK(r.trace_defect < 1e-7);
        }
    }
}

TEST_CASE("the degree-two part of the u-variant is the equivariant two-form")
{
    const std::size_t n = 64;
    const auto b = bundle_sphere_line(1);
    const auto loop = loop_preset("equator", n);
    const LoopTangentField Y(n, Vec2(1.0, 0.0)), Z(n, Vec2(0.0, 1.0));
    const auto f = FrameLoop::canonical(loop, 1);
    const auto r = degree2_identity(b, f, Y, Z);
    CHECK(r.defect < 1e-6);
    CHECK(std::abs(r.loops.at(1) - 0.5 * kI) < 1e-12);

    const auto shifted = degree2_identity(b, right_act(f, phase_gauge(n, 1, 0.3)), Y, Z);
    CHECK(shifted.defect < 1e-6);
    CHECK(std::abs(shifted.bismut.at(1) - r.bismut.at(1) + kI) < 1e-6);
    CHECK(std::abs(shifted.loops.at(1) - r.loops.at(1) + kI) < 1e-10);

    const auto su2 = bundle_plane_su2();
    const auto r2 = degree2_identity(su2, right_act(FrameLoop::canonical(loop_preset("figure", n), 2),
                                                    rank2_gauge(n, 1, 0.5, 0.2)),
                                     field(n, 0.2, 0.1, 1), field(n, -0.1, 0.3, 2));
    CHECK(r2.defect < 1e-6);

    const auto flat = bundle_trivial(make_plane(), 1);
    const auto still = DiscreteLoop::constant(n, {0, Vec2(0.4, 0.0)});
    const auto r0 = degree2_identity(flat, FrameLoop::canonical(still, 1), Y, Z);
    CHECK(r0.bismut.norm() < 1e-20);
    CHECK(r0.loops.norm() < 1e-20);
}

TEST_CASE("on constant loops tr H(1) is the Chern character integrand")
{
    const Vec2 Y(0.7, 0.2), Z(-0.1, 0.5);
    for (const char* name : {"s2/o(2)", "plane/su2", "s2/o(1)+o(-2)"}) {
        const auto b = bundle_from_preset(name);
        const auto r = bch_restriction_check(b, {0, Vec2(0.3, -0.4)}, Y, Z);
        CHECK(r.character_defect < 1e-8);
        CHECK(r.degree2_defect < 1e-8);
        CHECK(r.rank_defect < 1e-12);
        CHECK(r.closedness_residual < 1e-4);
    }
    const auto r = bch_restriction_check(bundle_trivial(make_plane(), 1), {0, Vec2(0.0, 0.0)}, Y, Z);
    CHECK(r.character_defect < 1e-15);
}

TEST_CASE("RK4 self-differences shrink sixteenfold per halving")
{
    const std::size_t n = 16;
    const auto b = bundle_sphere_line(1);
    const auto f = FrameLoop::canonical(loop_preset("tilted(0.5)", n), 1);
    const std::vector<LoopTangentField> fields{field(n, 0.2, 0.1, 1), field(n, -0.1, 0.3, 2)};
    std::vector<UGrassmann> finals;
    for (std::size_t steps : {n, 2 * n, 4 * n, 8 * n}) {
        BismutOptions o;
        o.initial_steps = steps;
        o.max_halvings = 1;
        o.tolerance = 1e300;
        finals.push_back(solve_H(b, f, fields, BismutVariant::plain, o).final());
    }
    const double d1 = (finals[0] - finals[1]).norm(), d2 = (finals[1] - finals[2]).norm(),
                 d3 = (finals[2] - finals[3]).norm();
    CHECK(d1 / d2 == doctest::Approx(16.0).epsilon(0.15));
    CHECK(d2 / d3 == doctest::Approx(16.0).epsilon(0.15));
}

TEST_CASE("degree-two parts need curvature")
{
    const auto b = bundle_plane_su2();
    const std::size_t n = 32;
    BismutOptions o;
    o.drop_curvature = true;
    const auto s = solve_H(b, FrameLoop::canonical(loop_preset("figure", n), 2),
                           {field(n, 0.2, 0.1, 1), field(n, -0.1, 0.3, 2)}, BismutVariant::plain, o);
    CHECK(coeff_norm(s.final().at(0)[0b11]) == 0.0);
    CHECK(coeff_norm(s.final().at(0)[0]) > 0.5);
}

TEST_CASE("solve_H rejects bad inputs")
{
    const auto b = bundle_sphere_line(1);
    const std::size_t n = 32;
    const auto f = FrameLoop::canonical(loop_preset("figure", n), 1);
    const auto y = field(n, 0.1, 0.1, 1);
    CHECK_THROWS_AS(solve_H(b, f, {y}, BismutVariant::plain), Rejected);
    CHECK_THROWS_AS(solve_H(b, f, {y, y, y, y, y, y}, BismutVariant::plain), Rejected);
    BismutOptions o;
    o.tolerance = 1e-30;
    CHECK_THROWS_AS(solve_H(b, f, {y, y}, BismutVariant::plain, o), Rejected);
    CHECK_THROWS_AS(solve_H(b, right_act(f, phase_gauge(n, 12, 0.0)), {y, y}, BismutVariant::plain), Rejected);
}

TEST_CASE("solutions export as text tables")
{
    const auto b = bundle_sphere_line(1);
    const auto s = solve_H(b, FrameLoop::canonical(loop_preset("figure", 16), 1),
                           {field(16, 0.1, 0.1, 1), field(16, 0.2, -0.1, 2)}, BismutVariant::u);
    std::stringstream ss;
    write_table(ss, s);
    std::string line;
    int rows = 0;
    while (std::getline(ss, line))
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 17 * (bismut_u_degree(2) + 1) * 4);
}
