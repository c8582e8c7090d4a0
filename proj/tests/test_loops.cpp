#include "equichern/loops.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace equichern;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

LoopGauge phase_loop(std::size_t n, int w, double wobble = 0.0)
{
    return LoopGauge::sample(n, [w, wobble](double t) {
        Mat m(1, 1);
        m(0, 0) = std::exp(kI * (w * t + wobble * std::sin(t) + 0.3 * wobble * std::sin(3.0 * t)));
        return m;
    });
}

LoopTangentField smooth_field(std::size_t n, double a, double b, int mode)
{
    LoopTangentField y(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double t = 2.0 * kPi * double(j) / double(n);
        y[j] = Vec2(a * std::cos(mode * t) + 0.2, b * std::sin((mode + 1) * t) - 0.1);
    }
    return y;
}

double max_abs(const LoopSection& a, const LoopSection& b)
{
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, (a[j] - b[j]).cwiseAbs().maxCoeff());
    return m;
}

}  // namespace

TEST_CASE("winding number of phase loops")
{
    for (int w : {-3, -1, 0, 1, 2, 5}) {
        const auto r = winding_number(phase_loop(128, w, 0.7));
        CHECK(r.winding == w);
        CHECK(r.agreement < 1e-10);
        CHECK(r.non_integrality < 1e-10);
    }
}

TEST_CASE("winding reverses under orientation reversal and ignores rotation")
{
    const auto a = phase_loop(96, 2, 0.4);
    LoopGauge rev;
    rev.values.push_back(a.values[0]);
    for (std::size_t j = a.size() - 1; j > 0; --j) rev.values.push_back(a.values[j]);
    CHECK(winding_number(rev).winding == -2);
    CHECK(winding_number(loop_rotate(a, 2.0 * kPi * 7.0 / 96.0)).winding == 2);
    CHECK(winding_number(loop_rotate(a, 0.123, true)).winding == 2);
}

TEST_CASE("winding rejects undersampled loops")
{
    CHECK_THROWS_AS(winding_number(phase_loop(8, 3)), Rejected);
}

TEST_CASE("rank-two winding comes from the determinant")
{
    const auto a = LoopGauge::sample(128, [](double t) {
        Mat m = Mat::Zero(2, 2);
        m(0, 0) = std::exp(kI * t);
        m(1, 1) = std::exp(-kI * 3.0 * t);
        Mat r(2, 2);
        r << std::cos(std::sin(t)), -std::sin(std::sin(t)), std::sin(std::sin(t)), std::cos(std::sin(t));
        return Mat(r * m);
    });
    CHECK(winding_number(a).winding == -2);
}

TEST_CASE("frame change shifts the u-part by -i w")
{
    const auto b = bundle_sphere_line(1);
    const auto loop = loop_preset("figure", 128);
    const auto Y = smooth_field(128, 0.3, 0.2, 1), Z = smooth_field(128, -0.1, 0.4, 2);
    const auto f = FrameLoop::canonical(loop, 1);
    const auto base = equivariant_two_form(b, f, Y, Z);
    for (int w : {-2, 1, 3}) {
        const auto moved = equivariant_two_form(b, right_act(f, phase_loop(128, w, 0.5)), Y, Z);
        CHECK(std::abs(moved.at(0) - base.at(0)) < 1e-12);
        CHECK(std::abs(moved.at(1) - base.at(1) + kI * double(w)) < 1e-10);
    }
    const auto same = equivariant_first_chern_form(b, right_act(f, phase_loop(128, 0, 0.9)), Y, Z);
    CHECK(std::abs(same.at(1) - base.at(1)) < 1e-10);
    CHECK_THROWS_AS(equivariant_first_chern_form(b, right_act(f, phase_loop(128, 1)), Y, Z), NonzeroWinding);
}

TEST_CASE("first Chern form on a constant loop is the curvature")
{
    for (const char* name : {"s2/o(2)", "plane/su2", "s2/o(1)+o(-1)"}) {
        const auto b = bundle_from_preset(name);
        const Point p{0, Vec2(0.3, -0.2)};
        const auto loop = DiscreteLoop::constant(64, p);
        const LoopTangentField Y(64, Vec2(0.5, 0.1)), Z(64, Vec2(-0.2, 0.7));
        const auto r = equivariant_first_chern_form(b, loop, Y, Z);
        CHECK(std::abs(r.at(0) - b.F_on(p, Y[0], Z[0]).trace()) < 1e-12);
        CHECK(std::abs(r.at(1)) < 1e-14);
    }
}

TEST_CASE("first Chern form moves a cross-chart loop into one chart")
{
    const auto b = bundle_sphere_line(1);
    const auto north = loop_preset("figure", 64);
    DiscreteLoop mixed = north;
    for (std::size_t j = 0; j < mixed.size(); j += 2) mixed.points[j] = b.base->to_chart(mixed.points[j], 1);
    LoopTangentField Y(64, Vec2(0.2, 0.1)), Z(64, Vec2(0.0, 0.3));
    LoopTangentField Ym = Y, Zm = Z;
    for (std::size_t j = 0; j < mixed.size(); j += 2) {
        const Mat2 jac = b.base->change_jacobian(north.points[j], 1);
        Ym[j] = jac * Y[j];
        Zm[j] = jac * Z[j];
    }
    const auto a = equivariant_first_chern_form(b, north, Y, Z);
    const auto c = equivariant_first_chern_form(b, mixed, Ym, Zm);
    CHECK(std::abs(a.at(0) - c.at(0)) < 1e-10);
    CHECK(std::abs(a.at(1) - c.at(1)) < 1e-10);
}

TEST_CASE("pushdown at the centre loop is the identity")
{
    const auto b = bundle_plane_su2();
    const auto loop = loop_preset("figure", 64);
    std::mt19937_64 rng(11);
    LoopSection s(64);
    std::normal_distribution<double> nd;
    for (auto& v : s) v = CVec::NullaryExpr(2, [&] { return Complex(nd(rng), nd(rng)); });
    const auto out = pushdown_trivialize(b, FrameLoop::canonical(loop, 2), loop, s);
    CHECK(max_abs(out, s) < 1e-14);
}

TEST_CASE("pushdown transitions satisfy the cocycle identity")
{
    const auto b = bundle_plane_su2();
    const auto g0 = loop_preset("figure", 64);
    auto shift = [&](double dx, double dy) {
        DiscreteLoop l = g0;
        for (auto& p : l.points) p.x += Vec2(dx, dy);
        return l;
    };
    const auto g1 = shift(0.05, -0.03), g2 = shift(-0.04, 0.06), g = shift(0.01, 0.02);
    const auto f0 = FrameLoop::canonical(g0, 2), f1 = FrameLoop::canonical(g1, 2), f2 = FrameLoop::canonical(g2, 2);
    const auto u01 = transition_extract(b, f0, f1, g), u12 = transition_extract(b, f1, f2, g),
               u02 = transition_extract(b, f0, f2, g);
    double worst = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j)
        worst = std::max(worst, (u01.values[j] * u12.values[j] - u02.values[j]).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-10);
}

TEST_CASE("pushdown rejects loops outside the tube")
{
    const auto b = bundle_plane_su2();
    const auto g0 = loop_preset("figure", 32);
    DiscreteLoop far = g0;
    for (auto& p : far.points) p.x += Vec2(2.0 * b.tube_radius, 0.0);
    const LoopSection s(32, CVec::Ones(2));
    try {
        pushdown_trivialize(b, FrameLoop::canonical(g0, 2), far, s);
        FAIL("expected OutsideTube");
    } catch (const OutsideTube& e) {
        CHECK(e.max_distance() == doctest::Approx(2.0 * b.tube_radius));
    }
}

TEST_CASE("D obeys the commutator rule")
{
    const auto b = bundle_plane_su2();
    const auto loop = loop_preset("figure", 64);
    const LoopSectionField s = [](const DiscreteLoop& l) {
        LoopSection v(l.size());
        for (std::size_t j = 0; j < l.size(); ++j) {
            const Vec2& x = l.points[j].x;
            v[j] = CVec(2);
            v[j] << Complex(x.x(), x.y() * x.y()), Complex(std::cos(x.y()), 0.5);
        }
        return v;
    };
    SUBCASE("f = sin theta")
    {
        const LoopFunction f = [](const DiscreteLoop& l) {
            std::vector<Complex> v(l.size());
            for (std::size_t j = 0; j < l.size(); ++j) v[j] = std::sin(l.theta(j));
            return v;
        };
        const auto r = D_commutator_defect(b, loop, f, s);
        CHECK(r.mismatch < 1e-8);
        const auto s0 = s(loop);
        double worst = 0.0;
        for (std::size_t j = 0; j < loop.size(); ++j)
            worst = std::max(worst, (r.defect[j] + std::cos(loop.theta(j)) * s0[j]).cwiseAbs().maxCoeff());
        CHECK(worst < 1e-8);
    }
    SUBCASE("theta-independent f commutes")
    {
        const LoopFunction f = [](const DiscreteLoop& l) {
            Complex mean = 0.0;
            for (const auto& p : l.points) mean += p.x.squaredNorm();
            return std::vector<Complex>(l.size(), mean / double(l.size()));
        };
        CHECK(D_commutator_defect(b, loop, f, s).size < 1e-9);
    }
    SUBCASE("f depending on the loop point")
    {
        const LoopFunction f = [](const DiscreteLoop& l) {
            std::vector<Complex> v(l.size());
            for (std::size_t j = 0; j < l.size(); ++j) v[j] = Complex(l.points[j].x.x(), 0.2);
            return v;
        };
        CHECK(D_commutator_defect(b, loop, f, s).mismatch < 1e-8);
    }
    SUBCASE("linearity")
    {
        const LoopSectionField s2 = [](const DiscreteLoop& l) {
            LoopSection v(l.size(), CVec::Zero(2));
            for (std::size_t j = 0; j < l.size(); ++j) v[j](1) = l.points[j].x.x() * l.points[j].x.y();
            return v;
        };
        const Complex c{0.3, -1.2};
        const LoopSectionField comb = [&](const DiscreteLoop& l) {
            auto a = s(l);
            const auto e = s2(l);
            for (std::size_t j = 0; j < a.size(); ++j) a[j] += c * e[j];
            return a;
        };
        const auto da = D_operator(b, loop, s), db = D_operator(b, loop, s2), dc = D_operator(b, loop, comb);
        LoopSection expect(da.size());
        for (std::size_t j = 0; j < da.size(); ++j) expect[j] = da[j] + c * db[j];
        CHECK(max_abs(dc, expect) < 1e-10);
    }
}

TEST_CASE("averaging over grid rotations leaves D unchanged")
{
    const auto b = bundle_sphere_line(1);
    const auto loop = loop_preset("latitude(1.0)", 32);
    const LoopSectionField s = [](const DiscreteLoop& l) {
        LoopSection v(l.size());
        for (std::size_t j = 0; j < l.size(); ++j) v[j] = CVec::Constant(1, Complex(l.points[j].x.x(), 1.0));
        return v;
    };
    OperatorOptions avg;
    avg.average_nodes = 4;
    CHECK(max_abs(D_operator(b, loop, s), D_operator(b, loop, s, avg)) < 1e-9);
    avg.average_nodes = 5;
    CHECK_THROWS_AS(D_operator(b, loop, s, avg), Rejected);
}

TEST_CASE("degree of loop families")
{
    const auto once = transgress_loop_family(once_covering_family(48, 48));
    CHECK(std::abs(once.degree) == 1);
    CHECK(once.non_integrality < 1e-10);
    CHECK(std::abs(once.quadrature - once.raw) < 0.05);

    std::vector<std::vector<Vec3>> flat(16, std::vector<Vec3>(16, Vec3(0.0, 0.0, 1.0)));
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) {
            const double t = 2.0 * kPi * double(j) / 16.0;
            flat[i][j] = Vec3(0.3 * std::cos(t), 0.3 * std::sin(t), 1.0).normalized();
        }
    const auto zero = transgress_loop_family(flat);
    CHECK(zero.degree == 0);
    CHECK(std::abs(zero.raw) < 1e-12);

    std::vector<DiscreteLoop> family;
    const auto sphere = make_sphere();
    for (double a : {0.3, 0.8, 1.3, 1.8, 2.3, 2.8})
        family.push_back(loop_preset("latitude(" + std::to_string(a) + ")", 24));
    CHECK_THROWS_AS(transgress_loop_family(*sphere, family), Rejected);
}

TEST_CASE("the first Chern-Weil loop form is equivariantly closed")
{
    const std::vector<LoopTangentField> fields{smooth_field(64, 0.3, 0.2, 1), smooth_field(64, -0.2, 0.1, 2),
                                               smooth_field(64, 0.1, -0.3, 0)};
    for (const char* name : {"s2/o(1)", "s2/o(1)+o(2)"})
        for (const char* loop_name : {"equator", "latitude(1.0471975511965976)", "latitude(2.0943951023931953)",
                                      "tilted(0.5)", "figure"}) {
            const auto b = bundle_from_preset(name);
            const auto r = loopspace_equivariant_d(loop_chern_weil_form(b, 1), 2, loop_preset(loop_name, 64), fields);
            CHECK(r.norm() < 1e-8);
        }
}

TEST_CASE("higher Chern-Weil loop forms miss closedness by the predicted obstruction")
{
    const auto loop = loop_preset("figure", 64);
    const std::vector<LoopTangentField> fields{smooth_field(64, 0.3, 0.2, 1), smooth_field(64, -0.2, 0.1, 2),
                                               smooth_field(64, 0.1, -0.3, 0), smooth_field(64, 0.2, 0.2, 3),
                                               smooth_field(64, -0.1, 0.25, 1)};
    for (const char* name : {"s2/o(1)", "plane/su2", "s2/o(1)+o(2)"})
        for (int k : {1, 2}) {
            const auto b = bundle_from_preset(name);
            const auto r = loopspace_equivariant_d(loop_chern_weil_form(b, k), 2 * k, loop, fields);
            const auto predicted = loop_closedness_obstruction(b, k)(loop, fields);
            CHECK((r - predicted).norm() < 1e-7);
            if (k == 1) CHECK(predicted.norm() < 1e-12);
            if (k == 2 && std::string(name) != "s2/o(1)+o(2)") CHECK(predicted.norm() > 1e-3);
        }
}

TEST_CASE("transgression relates the first Chern-Weil forms of two connections")
{
    const auto b0 = bundle_sphere_line(1);
    for (bool invariant : {false, true}) {
        const auto b1 = add_one_form(b0, [invariant](int, const Vec2& x) {
            const double d = 1.0 + x.squaredNorm();
            const double c = invariant ? 0.5 / (d * d) : 0.5 * x.x() / (d * d * d);
            Mat ax(1, 1), ay(1, 1);
            ax(0, 0) = -kI * c * x.y();
            ay(0, 0) = kI * c * x.x();
            return std::array<Mat, 2>{ax, ay};
        });
        const std::vector<LoopTangentField> fields{smooth_field(64, 0.3, 0.2, 1), smooth_field(64, -0.2, 0.1, 2)};
        for (const char* loop_name : {"figure", "equator", "tilted(0.5)"}) {
            const auto loop = loop_preset(loop_name, 64);
            const auto dT = loopspace_equivariant_d(loop_transgression_form(b0, b1, 1), 1, loop, fields);
            const auto c0 = loop_chern_weil_form(b0, 1)(loop, fields);
            const auto c1 = loop_chern_weil_form(b1, 1)(loop, fields);
            CHECK((dT - (c1 - c0)).norm() < 1e-9);
            if (std::string(loop_name) == "figure") CHECK((c1 - c0).norm() > 1e-4);
        }
    }
}

TEST_CASE("spectral and finite-difference velocities agree")
{
    for (const char* name : {"figure", "tilted(0.5)", "equator"}) {
        const auto loop = loop_preset(name, 256);
        const auto a = loop_velocity(loop), b = loop_velocity_fd(loop);
        double worst = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, (a[j] - b[j]).norm());
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("loop rotation on and off the grid")
{
    const auto loop = loop_preset("figure", 64);
    const auto r = loop_rotate(loop, 2.0 * kPi * 5.0 / 64.0);
    CHECK(r.points[0].x == loop.points[5].x);
    CHECK_THROWS_AS(loop_rotate(loop, 0.01), Rejected);
    const auto back = loop_rotate(loop_rotate(loop, 0.01, true), -0.01, true);
    for (std::size_t j = 0; j < loop.size(); ++j) CHECK((back.points[j].x - loop.points[j].x).norm() < 1e-12);
}

TEST_CASE("table serialization round trips")
{
    const auto loop = loop_preset("tilted(0.5)", 32);
    std::stringstream ss;
    write_table(ss, loop);
    const auto again = read_loop_table(ss);
    REQUIRE(again.size() == loop.size());
    for (std::size_t j = 0; j < loop.size(); ++j) {
        CHECK(again.points[j].chart == loop.points[j].chart);
        CHECK(again.points[j].x == loop.points[j].x);
    }
    std::mt19937_64 rng(3);
    LoopGauge g;
    for (int j = 0; j < 16; ++j) g.values.push_back(testsupport::random_matrix(rng, 2));
    std::stringstream gs;
    write_table(gs, g);
    const auto g2 = read_gauge_table(gs);
    REQUIRE(g2.size() == g.size());
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(g2.values[j] == g.values[j]);
    std::stringstream bad("0 2 1 2 3\n");
    CHECK_THROWS_AS(read_gauge_table(bad), Rejected);
}

TEST_CASE("loop presets validate their parameters")
{
    CHECK_THROWS_AS(loop_preset("latitude(4)"), Rejected);
    CHECK_THROWS_AS(loop_preset("spiral"), Rejected);
    CHECK(loop_preset("latitude(2.5)", 16).chart() == 1);
    CHECK(loop_preset("constant(0.1,0.2)", 16).points[7].x == Vec2(0.1, 0.2));
}
