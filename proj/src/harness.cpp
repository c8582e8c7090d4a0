#include "equichern/harness.hpp"

#include "equichern/bismut.hpp"
#include "equichern/cartan.hpp"
#include "equichern/fourier.hpp"

#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace equichern {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI{0.0, 1.0};
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    double defect = 0.0;
    std::string message;
};

using CheckFn = std::function<Outcome(const SuiteConfig&, std::mt19937_64&)>;

struct CheckSpec {
    std::string id;
    std::string suite;
    std::string anchor;
    double base_tol;
    int order;  // tolerance growth exponent in 256 / N
    CheckFn run;
};

std::string fmt(double v)
{
    std::ostringstream s;
    s << std::setprecision(3) << v;
    return s.str();
}

const std::vector<std::string>& preset_loops()
{
    static const std::vector<std::string> names{"equator", "latitude(1.0471975511965976)",
                                                "latitude(2.0943951023931953)", "tilted(0.5)", "figure"};
    return names;
}

std::vector<LoopTangentField> random_fields(std::mt19937_64& rng, std::size_t n, int count)
{
    std::vector<LoopTangentField> f;
    for (int i = 0; i < count; ++i) f.push_back(random_loop_field(rng, n));
    return f;
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Mat random_skew(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> nd;
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = Complex(nd(rng), nd(rng));
    return Mat(0.5 * (m - m.adjoint()));
}

// ------------------------------------------------------------ algebra

Outcome algebra_round_trip(const SuiteConfig&, std::mt19937_64& rng)
{
    // dyadic rationals keep every operation exact
    std::uniform_int_distribution<int> num(-64, 64);
    const auto dyadic = [&] { return Complex(num(rng) / 16.0, num(rng) / 32.0); };
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int k = trial % 5 - 1;
        GradedSum<Mat> g;
        const int parity = trial % 2;
        for (int d = parity; d <= 6; d += 2) g.emplace(d, Mat::NullaryExpr(2, 2, dyadic));
        const int total = parity ? 2 * k + 1 : 2 * k;
        const auto f = r_map<Mat>(g, k, Mat::Zero(2, 2));
        const auto back = q_map(f, total);
        for (const auto& [deg, piece] : g) worst = std::max(worst, coeff_norm(Mat(back.at(deg) - piece)));
        const auto again = r_map<Mat>(back, k, Mat::Zero(2, 2));
        if (!(again == f)) worst = std::max(worst, 1.0);
    }
    return {worst, "20 dyadic graded sums"};
}

Outcome algebra_u_minus_one(const SuiteConfig&, std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> num(-64, 64);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        ULaurent<Mat> f(0, 4, Mat::Zero(2, 2));
        Mat alternating = Mat::Zero(2, 2);
        for (int k = 0; k <= 4; ++k) {
            f[k] = Mat::NullaryExpr(2, 2, [&] { return Complex(num(rng) / 8.0, num(rng) / 4.0); });
            alternating += (k % 2 ? -1.0 : 1.0) * f.at(k);
        }
        worst = std::max(worst, coeff_norm(Mat(u_substitute(f, -1.0) - alternating)));
    }
    return {worst, "u = -1 against the alternating sum"};
}

// ------------------------------------------------------------- cartan

std::vector<Point> sample_points(std::mt19937_64& rng, int count)
{
    std::vector<Point> pts;
    for (int i = 0; i < count; ++i)
        pts.push_back({i % 3 == 2 ? 1 : 0, Vec2(uniform(rng, -1.2, 1.2), uniform(rng, -1.2, 1.2))});
    return pts;
}

Outcome averaging_invariance(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto pert = perturb_sphere_bundle(bundle_sphere_line(1), 0.5, false);
    const auto ave = average_connection(pert, c.q);
    double worst = 0.0;
    for (const auto& p : sample_points(rng, 3))
        for (int r = 0; r < 8; ++r) {
            const Vec2 v(uniform(rng, -1, 1), uniform(rng, -1, 1));
            worst = std::max(worst, connection_invariance_defect(ave, p, v, uniform(rng, 0.0, 2.0 * kPi)));
        }
    const double before = connection_invariance_defect(pert, {0, Vec2(0.3, 0.7)}, Vec2(0.3, -0.9), 0.9);
    return {worst, "raw perturbed defect " + fmt(before) + ", Q = " + std::to_string(c.q)};
}

Outcome averaging_idempotence(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto pert = perturb_sphere_bundle(bundle_sphere_line(1), 0.5, false);
    const auto ave = average_connection(pert, c.q);
    const auto twice = average_connection(ave, c.q);
    double worst = 0.0;
    for (const auto& p : sample_points(rng, 4)) {
        const Vec2 v(uniform(rng, -1, 1), uniform(rng, -1, 1));
        worst = std::max(worst, coeff_norm(Mat(twice.A_on(p, v) - ave.A_on(p, v))));
    }
    return {worst, ""};
}

Outcome cartan_basic(const SuiteConfig&, std::mt19937_64& rng)
{
    double worst = 0.0;
    for (const std::string name : {"s2/o(1)", "s2/o(-2)", "plane/su2", "s2/o(1)+o(3)"}) {
        const auto b = bundle_from_preset(name);
        const int n = b.rank;
        const Point p{0, Vec2(uniform(rng, -0.8, 0.8), uniform(rng, -0.8, 0.8))};
        const Mat g = random_unitary(rng, n), a = random_unitary(rng, n), eta = random_skew(rng, n);
        const std::vector<TotalSpaceVector> others{
            {Vec2(uniform(rng, -1, 1), uniform(rng, -1, 1)), random_skew(rng, n)},
            {Vec2(uniform(rng, -1, 1), uniform(rng, -1, 1)), random_skew(rng, n)}};
        for (int k : {1, 2}) {
            const auto rep = check_basic(chern_weil_total_space_form(b, k), 2 * k, p, g, a, eta, others);
            worst = std::max({worst, rep.horizontality_defect, rep.invariance_defect});
        }
    }
    return {worst, "tr(Omega - u omega(X))^k, k = 1, 2"};
}

Outcome cartan_bianchi(const SuiteConfig&, std::mt19937_64& rng)
{
    double worst = 0.0;
    for (const std::string name : {"s2/o(1)", "s2/o(1)+o(2)", "plane/su2", "t2/theta"}) {
        const auto b = bundle_from_preset(name);
        for (int k : {1, 2}) {
            const auto f = chern_weil_form(b, k);
            const Point p{0, Vec2(uniform(rng, -0.9, 0.9), uniform(rng, -0.9, 0.9))};
            const auto r = equivariant_differential(
                f, p, {Vec2(uniform(rng, -1, 1), uniform(rng, -1, 1)), Vec2(uniform(rng, -1, 1), uniform(rng, -1, 1))});
            worst = std::max(worst, r.value.norm());
        }
    }
    return {worst, "FD residual"};
}

Outcome loop_space_failure(const SuiteConfig& c, std::mt19937_64& rng)
{
    // witnesses that the loop-space form is not basic: a winding-1 gauge shifts it by -u i
    const auto b = bundle_sphere_line(1);
    const auto f = FrameLoop::canonical(loop_preset("figure", c.n), 1);
    const auto Y = random_loop_field(rng, c.n), Z = random_loop_field(rng, c.n);
    const auto base = equivariant_two_form(b, f, Y, Z);
    const auto moved = equivariant_two_form(b, right_act(f, random_phase_gauge(rng, c.n, 1)), Y, Z);
    const double shift = std::abs(moved.at(1) - base.at(1));
    // the witness is the size of the shift itself, which must be |-u i| = 1 and not 0
    return {std::abs(shift - 1.0) + std::abs(moved.at(0) - base.at(0)), "invariance defect |shift| = " + fmt(shift)};
}

// ------------------------------------------------------------- winding

Outcome winding_random(const SuiteConfig& c, std::mt19937_64& rng)
{
    double worst = 0.0;
    int mismatches = 0;
    for (int i = 0; i < 20; ++i) {
        const int w = i % 5 - 2;
        const auto a = i % 2 ? random_rank2_gauge(rng, c.n, w) : random_phase_gauge(rng, c.n, w);
        const auto r = winding_number(a);
        if (r.winding != w || std::lround(r.trace_integral) != w) ++mismatches;
        worst = std::max({worst, r.agreement, r.non_integrality});
    }
    if (mismatches) return {kInf, std::to_string(mismatches) + " planted windings missed"};
    return {worst, "20 gauges, windings -2..2"};
}

Outcome winding_leading_trace(const SuiteConfig& c, std::mt19937_64& rng)
{
    double worst = 0.0;
    for (int w = -2; w <= 2; ++w) {
        const auto a = random_rank2_gauge(rng, c.n, w);
        worst = std::max(worst, std::abs(leading_trace(maurer_cartan(a)) - kI * double(winding_number(a).winding)));
    }
    return {worst, ""};
}

// ------------------------------------------------------- loop operators

Outcome gauge_shift(const SuiteConfig& c, std::mt19937_64& rng)
{
    double worst = 0.0;
    const auto o1 = bundle_sphere_line(1);
    const auto o12 = bundle_from_preset("s2/o(1)+o(2)");
    for (int w = -2; w <= 2; ++w)
        for (int rank : {1, 2}) {
            const auto& b = rank == 1 ? o1 : o12;
            const auto f = FrameLoop::canonical(loop_preset("figure", c.n), rank);
            const auto Y = random_loop_field(rng, c.n), Z = random_loop_field(rng, c.n);
            const auto a = rank == 1 ? random_phase_gauge(rng, c.n, w) : random_rank2_gauge(rng, c.n, w);
            const auto base = equivariant_two_form(b, f, Y, Z);
            const auto moved = equivariant_two_form(b, right_act(f, a), Y, Z);
            worst = std::max(worst, std::abs(moved.at(1) - base.at(1) + kI * double(w)));
            worst = std::max(worst, std::abs(moved.at(0) - base.at(0)));
        }
    return {worst, "W in -2..2, ranks 1 and 2"};
}

Outcome winding_zero_invariance(const SuiteConfig& c, std::mt19937_64& rng)
{
    double worst = 0.0;
    const auto b = bundle_from_preset("s2/o(1)+o(2)");
    const auto f = FrameLoop::canonical(loop_preset("tilted(0.5)", c.n), 2);
    for (int i = 0; i < 10; ++i) {
        const auto Y = random_loop_field(rng, c.n), Z = random_loop_field(rng, c.n);
        const auto base = equivariant_two_form(b, f, Y, Z);
        const auto moved = equivariant_two_form(b, right_act(f, random_rank2_gauge(rng, c.n, 0)), Y, Z);
        worst = std::max(worst, (moved - base).norm());
    }
    return {worst, "10 winding-zero gauges"};
}

LoopSectionField random_section(std::mt19937_64& rng)
{
    std::array<Complex, 6> k;
    for (auto& x : k) x = Complex(uniform(rng, -1, 1), uniform(rng, -1, 1));
    return [k](const DiscreteLoop& l) {
        LoopSection v(l.size());
        for (std::size_t j = 0; j < l.size(); ++j) {
            const Vec2& x = l.points[j].x;
            v[j] = CVec(2);
            v[j] << k[0] + k[1] * x.x() + k[2] * x.y() * x.y(), k[3] * std::cos(x.x()) + k[4] * x.x() * x.y() + k[5];
        }
        return v;
    };
}

Outcome commutator(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto b = bundle_plane_su2();
    const auto loop = loop_preset("figure", c.n);
    double worst = 0.0, smallest = kInf;
    for (int i = 0; i < 10; ++i) {
        std::array<double, 5> k;
        for (auto& x : k) x = uniform(rng, -1, 1);
        const LoopFunction f = [k](const DiscreteLoop& l) {
            std::vector<Complex> v(l.size());
            for (std::size_t j = 0; j < l.size(); ++j) {
                const double t = l.theta(j);
                v[j] = Complex(k[0] * std::sin(t + k[1]) + k[2] * std::cos(2.0 * t) + k[3] * l.points[j].x.x(), k[4]);
            }
            return v;
        };
        const auto r = D_commutator_defect(b, loop, f, random_section(rng));
        worst = std::max(worst, r.mismatch);
        smallest = std::min(smallest, r.size);
    }
    return {worst, "smallest commutator size " + fmt(smallest)};
}

Outcome commutator_theta_independent(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto b = bundle_plane_su2();
    const auto loop = loop_preset("figure", c.n);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double k = uniform(rng, -1, 1);
        const LoopFunction f = [k](const DiscreteLoop& l) {
            Complex mean = 0.0;
            for (const auto& p : l.points) mean += p.x.squaredNorm();
            return std::vector<Complex>(l.size(), k + mean / double(l.size()));
        };
        worst = std::max(worst, D_commutator_defect(b, loop, f, random_section(rng)).size);
    }
    return {worst, ""};
}

Outcome closedness(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto b = bundle_sphere_line(1);
    double worst = 0.0;
    for (const auto& name : preset_loops()) {
        const auto fields = random_fields(rng, c.n, 3);
        const auto r = loopspace_equivariant_d(loop_chern_weil_form(b, 1), 2, loop_preset(name, c.n), fields);
        worst = std::max(worst, r.norm());
    }
    return {worst, "k = 1 on 5 preset loops"};
}

Outcome closedness_k2(const SuiteConfig& c, std::mt19937_64& rng)
{
    // k = 2 is not closed pointwise; the residual must equal the total-derivative obstruction
    const auto b = bundle_sphere_line(1);
    double worst = 0.0, residual = 0.0;
    for (const auto& name : preset_loops()) {
        const auto loop = loop_preset(name, c.n);
        const auto fields = random_fields(rng, c.n, 5);
        const auto r = loopspace_equivariant_d(loop_chern_weil_form(b, 2), 4, loop, fields);
        const auto predicted = loop_closedness_obstruction(b, 2)(loop, fields);
        worst = std::max(worst, (r - predicted).norm());
        residual = std::max(residual, r.norm());
    }
    return {worst, "k = 2 closedness residual " + fmt(residual) + " matches the obstruction"};
}

Outcome transgression_pair(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto b0 = bundle_sphere_line(1);
    const auto b1 = perturb_sphere_bundle(b0, 0.5, true);
    double worst = 0.0, size = 0.0;
    for (const auto& name : preset_loops()) {
        const auto loop = loop_preset(name, c.n);
        const auto fields = random_fields(rng, c.n, 2);
        const auto dT = loopspace_equivariant_d(loop_transgression_form(b0, b1, 1), 1, loop, fields);
        const auto diff = loop_chern_weil_form(b1, 1)(loop, fields) - loop_chern_weil_form(b0, 1)(loop, fields);
        worst = std::max(worst, (dT - diff).norm());
        size = std::max(size, diff.norm());
    }
    return {worst, "Chern-Weil difference up to " + fmt(size)};
}

Outcome pushdown_cocycle(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto b = bundle_plane_su2();
    const auto g0 = loop_preset("figure", c.n);
    const auto shifted = [&](double r) {
        DiscreteLoop l = g0;
        const Vec2 d(uniform(rng, -r, r), uniform(rng, -r, r));
        for (auto& p : l.points) p.x += d;
        return l;
    };
    const auto g1 = shifted(0.05), g2 = shifted(0.05), g = shifted(0.02);
    const auto f0 = FrameLoop::canonical(g0, 2), f1 = FrameLoop::canonical(g1, 2), f2 = FrameLoop::canonical(g2, 2);
    const auto u01 = transition_extract(b, f0, f1, g), u12 = transition_extract(b, f1, f2, g),
               u02 = transition_extract(b, f0, f2, g);
    double worst = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j)
        worst = std::max(worst, coeff_norm(Mat(u01.values[j] * u12.values[j] - u02.values[j])));
    return {worst, ""};
}

// ----------------------------------------------------------------- bismut

std::vector<std::pair<FrameLoop, LoopGauge>> bismut_pairs(const SuiteConfig& c, std::mt19937_64& rng)
{
    std::vector<std::pair<FrameLoop, LoopGauge>> out;
    for (std::size_t i = 0; i < preset_loops().size(); ++i) {
        const int w = static_cast<int>(i % 3) - 1;
        out.emplace_back(FrameLoop::canonical(loop_preset(preset_loops()[i], c.n), 2), random_rank2_gauge(rng, c.n, w));
    }
    return out;
}

struct BismutLaws {
    double law = 0.0, ingredient = 0.0, trace = 0.0;
};

BismutLaws bismut_laws(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto b = bundle_from_preset("s2/o(1)+o(2)");
    BismutLaws r;
    for (const auto& [f, a] : bismut_pairs(c, rng)) {
        const auto rep = verify_gauge_law(b, f, a, random_fields(rng, c.n, 2));
        r.law = std::max(r.law, rep.law_defect);
        r.ingredient = std::max(r.ingredient, rep.ingredient_defect);
        r.trace = std::max(r.trace, rep.trace_defect);
    }
    return r;
}

Outcome bismut_gauge_law(const SuiteConfig& c, std::mt19937_64& rng) { return {bismut_laws(c, rng).law, "5 pairs, m = 2"}; }
Outcome bismut_ingredient(const SuiteConfig& c, std::mt19937_64& rng) { return {bismut_laws(c, rng).ingredient, ""}; }
Outcome bismut_trace(const SuiteConfig& c, std::mt19937_64& rng) { return {bismut_laws(c, rng).trace, ""}; }

Outcome bismut_degree2(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto b = bundle_from_preset("s2/o(1)+o(2)");
    double worst = 0.0;
    for (const auto& [f, a] : bismut_pairs(c, rng)) {
        const auto Y = random_loop_field(rng, c.n), Z = random_loop_field(rng, c.n);
        worst = std::max(worst, degree2_identity(b, right_act(f, a), Y, Z).defect);
    }
    return {worst, ""};
}

Outcome bismut_restriction(const SuiteConfig&, std::mt19937_64& rng)
{
    double worst = 0.0;
    for (const std::string name : {"s2/o(2)", "plane/su2", "s2/o(1)+o(-2)"}) {
        const auto b = bundle_from_preset(name);
        const Point p{0, Vec2(uniform(rng, -1, 1), uniform(rng, -1, 1))};
        const auto r = bch_restriction_check(b, p, Vec2(uniform(rng, -1, 1), uniform(rng, -1, 1)),
                                             Vec2(uniform(rng, -1, 1), uniform(rng, -1, 1)));
        worst = std::max({worst, r.character_defect, r.degree2_defect, r.rank_defect});
    }
    return {worst, ""};
}

Outcome bismut_transport(const SuiteConfig& c, std::mt19937_64&)
{
    double worst = 0.0;
    for (const std::string name : {"s2/o(1)", "s2/o(1)+o(2)", "plane/su2"}) {
        const auto b = bundle_from_preset(name);
        const auto loop = loop_preset("figure", c.n);
        const auto s = solve_H(b, FrameLoop::canonical(loop, b.rank), {}, BismutVariant::plain);
        const auto p = parallel_transport(b, DiscreteCurve{loop.points, true, CurveInterpolation::trigonometric});
        worst = std::max(worst, coeff_norm(Mat(s.final().at(0)[0] - p.matrix.inverse())));
    }
    return {worst, "xi-free H(1) against the inverse holonomy"};
}

// Self-consistency error of the solver at a given step count (equator, rank 1, m = 2).
double bismut_solver_error(std::size_t steps)
{
    const std::size_t n = 16;
    const auto b = bundle_sphere_line(1);
    const auto loop = loop_preset("equator", n);
    LoopTangentField Y(n), Z(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double t = loop.theta(j);
        Y[j] = Vec2(0.5 * std::cos(t), 0.3 + 0.2 * std::sin(2.0 * t));
        Z[j] = Vec2(-0.2 + 0.4 * std::sin(t), 0.6 * std::cos(3.0 * t));
    }
    BismutOptions o;
    o.initial_steps = steps / 2;
    o.max_halvings = 1;
    o.tolerance = kInf;
    const auto s = solve_H(b, FrameLoop::canonical(loop, 1), {Y, Z}, BismutVariant::plain, o);
    // the driver commutes, so H(1) = exp(a)(1 + c xi1 xi2) with spectrally exact averages
    const auto v = loop_velocity(loop);
    Complex a = 0.0, c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        a += 2.0 * kPi * b.A_on(loop.points[j], v[j])(0, 0);
        c += b.F_on(loop.points[j], Y[j], Z[j])(0, 0);
    }
    a /= double(n);
    c /= double(n);
    const auto& h = s.plain(n);
    return std::max(std::abs(h[0](0, 0) - std::exp(a)), std::abs(h[0b11](0, 0) - std::exp(a) * c));
}

Outcome bismut_order(const SuiteConfig&, std::mt19937_64&)
{
    const double e1 = bismut_solver_error(32), e2 = bismut_solver_error(64);
    const double order = std::log2(e1 / e2);
    return {std::abs(order - 4.0), "observed order " + fmt(order)};
}

// ------------------------------------------------------------- first Chern

Outcome first_chern_constant(const SuiteConfig&, std::mt19937_64& rng, bool degree2)
{
    double worst = 0.0;
    const std::vector<std::string> names{"s2/o(1)", "s2/o(-2)", "s2/o(1)+o(2)", "plane/su2", "t2/theta"};
    for (int i = 0; i < 10; ++i) {
        const auto b = bundle_from_preset(names[static_cast<std::size_t>(i) % names.size()]);
        const Point p{0, Vec2(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9))};
        const Vec2 y(uniform(rng, -1, 1), uniform(rng, -1, 1)), z(uniform(rng, -1, 1), uniform(rng, -1, 1));
        const std::size_t n = 16;
        const auto r = equivariant_first_chern_form(b, DiscreteLoop::constant(n, p), LoopTangentField(n, y),
                                                    LoopTangentField(n, z));
        worst = std::max(worst, degree2 ? std::abs(r.at(0) - b.F_on(p, y, z).trace()) : std::abs(r.at(1)));
    }
    return {worst, "10 constant loops"};
}

Outcome first_chern_integral(const SuiteConfig& c, std::mt19937_64&)
{
    double worst = 0.0;
    const QuadratureGrid grid{static_cast<int>(c.n / 2), static_cast<int>(c.n)};
    for (int k = -2; k <= 2; ++k) {
        const auto b = bundle_sphere_line(k);
        const auto beta = [&b](const Point& p, const Vec2& v, const Vec2& w) {
            const std::size_t n = 16;
            const auto r = equivariant_first_chern_form(b, DiscreteLoop::constant(n, p), LoopTangentField(n, v),
                                                        LoopTangentField(n, w));
            return kI / (2.0 * kPi) * r.at(0);
        };
        worst = std::max(worst, std::abs(integrate_two_form(*b.base, beta, grid) - double(k)));
    }
    return {worst, "k = -2..2 on a " + std::to_string(grid.ns) + " x " + std::to_string(grid.nt) + " grid"};
}

Outcome first_chern_winding(const SuiteConfig& c, std::mt19937_64& rng)
{
    const auto b = bundle_sphere_line(1);
    const auto f = FrameLoop::canonical(loop_preset("figure", c.n), 1);
    const auto Y = random_loop_field(rng, c.n), Z = random_loop_field(rng, c.n);
    for (int w : {-2, 1, 2}) {
        try {
            equivariant_first_chern_form(b, right_act(f, random_phase_gauge(rng, c.n, w)), Y, Z);
            return {1.0, "winding " + std::to_string(w) + " frame accepted"};
        } catch (const NonzeroWinding& e) {
            if (e.winding() != w) return {1.0, "reported winding " + std::to_string(e.winding())};
        }
    }
    return {0.0, "nonzero windings rejected with the obstructing integer"};
}

// ---------------------------------------------------------- transgression

Outcome transgression_degree(const SuiteConfig& c, std::mt19937_64&)
{
    const std::size_t m = std::max<std::size_t>(c.n / 4, 16);
    const auto r = transgress_loop_family(once_covering_family(m, m));
    if (std::abs(r.degree) != 1) return {kInf, "degree " + std::to_string(r.degree)};
    return {r.non_integrality, "degree " + std::to_string(r.degree) + ", area quadrature " + fmt(r.quadrature)};
}

Outcome transgression_constant(const SuiteConfig& c, std::mt19937_64& rng)
{
    const std::size_t m = std::max<std::size_t>(c.n / 4, 16);
    const double colat = uniform(rng, 0.3, 2.8);
    std::vector<std::vector<Vec3>> grid(m, std::vector<Vec3>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double lon = 2.0 * kPi * double(j) / double(m);
            grid[i][j] = Vec3(std::sin(colat) * std::cos(lon), std::sin(colat) * std::sin(lon), std::cos(colat));
        }
    const auto r = transgress_loop_family(grid);
    return {std::abs(r.raw) + std::abs(r.degree), "constant-in-t family"};
}

const std::vector<CheckSpec>& registry()
{
    using namespace std::placeholders;
    static const std::vector<CheckSpec> checks{
        {"algebra.q-r-round-trip", "cartan-finite", "r_{2k} and q_{2k} are inverses", 0.0, 0, algebra_round_trip},
        {"algebra.u-minus-one", "cartan-finite", "purely a differential form", 0.0, 0, algebra_u_minus_one},
        {"basic.loop-space-failure", "cartan-finite", "-u i W(det a)", 1e-8, 0, loop_space_failure},
        {"bismut.degree2", "bismut", "tr H~(1)_[2]", 1e-6, 0, bismut_degree2},
        {"bismut.gauge-law", "bismut", "a(0)^-1 H(t) a(t)", 1e-6, 0, bismut_gauge_law},
        {"bismut.ingredient", "bismut", "Ad_{a(theta)^-1} omega(X) + a(theta)^-1 a'(theta)", 1e-8, 0,
         bismut_ingredient},
        {"bismut.order", "bismut", "H(t) = Id + int_0^t", 0.5, 0, bismut_order},
        {"bismut.restriction", "bismut", "tr H(1) = pi~* beta", 1e-8, 0, bismut_restriction},
        {"bismut.trace-invariance", "bismut", "R_a^* tr H(1) = tr H(1)", 1e-7, 0, bismut_trace},
        {"bismut.transport", "bismut", "H(t) = Id + int_0^t", 1e-7, 0, bismut_transport},
        {"cartan.averaging-idempotence", "cartan-finite", "omega^ave is a S^1-invariant connection", 1e-10, 0,
         averaging_idempotence},
        {"cartan.averaging-invariance", "cartan-finite", "omega^ave is a S^1-invariant connection", 1e-8, 0,
         averaging_invariance},
        {"cartan.basic", "cartan-finite", "f(Omega^S1) is basic", 1e-10, 0, cartan_basic},
        {"cartan.bianchi", "cartan-finite", "(D - u i_X) Omega^S1 = 0", 1e-4, 0, cartan_bianchi},
        {"first-chern.constant-degree0", "first-chern", "extends c_1(E) under the embedding", 1e-10, 0,
         std::bind(first_chern_constant, _1, _2, false)},
        {"first-chern.constant-degree2", "first-chern", "extends c_1(E) under the embedding", 1e-8, 0,
         std::bind(first_chern_constant, _1, _2, true)},
        {"first-chern.integral", "first-chern", "extends c_1(E) under the embedding", 1e-3, 2, first_chern_integral},
        {"first-chern.nonzero-winding", "first-chern", "c_1^S1(E) != 0", 0.0, 0, first_chern_winding},
        {"loops.closedness", "loop-operators", "equivariantly closed for all k", 1e-3, 0, closedness},
        {"loops.closedness-k2-obstruction", "loop-operators", "equivariantly closed for all k", 1e-6, 0,
         closedness_k2},
        {"loops.commutator", "loop-operators", "-(d/dtheta f) s~ + f D~ s~", 1e-5, 0, commutator},
        {"loops.commutator-theta-independent", "loop-operators", "linear over C^inf(LM x S^1)", 1e-9, 0,
         commutator_theta_independent},
        {"loops.gauge-shift", "loop-operators", "-u i W(det a)", 1e-8, 0, gauge_shift},
        {"loops.pushdown-cocycle", "loop-operators", "admits the structure group LU(n)", 1e-10, 0, pushdown_cocycle},
        {"loops.transgression", "loop-operators", "independent of connection on FrE", 1e-3, 0, transgression_pair},
        {"loops.winding-zero-invariance", "loop-operators", "-u i W(det a)", 1e-12, 0, winding_zero_invariance},
        {"transgression.constant-family", "transgression", "2-cycle on M given by", 0.0, 0, transgression_constant},
        {"transgression.degree", "transgression", "homology cross product with the generator", 1e-4, 0,
         transgression_degree},
        {"winding.leading-trace", "winding", "leading order trace", 1e-9, 0, winding_leading_trace},
        {"winding.random-gauges", "winding", "2 pi i W(det a)", 1e-9, 0, winding_random},
    };
    return checks;
}

const CheckSpec& find_check(const std::string& id)
{
    for (const auto& c : registry())
        if (c.id == id) return c;
    throw UsageError("unknown check '" + id + "'");
}

CheckResult execute(const CheckSpec& spec, const SuiteConfig& config)
{
    CheckResult r;
    r.id = spec.id;
    r.anchor = spec.anchor;
    r.tol = scaled_tolerance(spec.base_tol, spec.order, config.n, config.tol_scale);
    auto rng = check_rng(config.seed, spec.id);
    const auto start = std::chrono::steady_clock::now();
    try {
        const Outcome o = spec.run(config, rng);
        r.defect = o.defect;
        r.message = o.message;
    } catch (const Rejected& e) {
        r.defect = kInf;
        r.message = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.pass = r.defect <= r.tol;
    return r;
}

}  // namespace

// ------------------------------------------------------------------ config

void SuiteConfig::validate() const
{
    const auto names = suite_names();
    if (std::find(names.begin(), names.end(), suite) == names.end())
        throw UsageError("unknown suite '" + suite + "'");
    if (n < 32 || n > 1024 || (n & (n - 1)) != 0)
        throw UsageError("N must be a power of two between 32 and 1024");
    if (q < 4) throw UsageError("Q must be at least 4");
    if (!(tol_scale > 0.0)) throw UsageError("the tolerance scale must be positive");
}

std::vector<std::string> suite_names()
{
    return {"all", "bismut", "cartan-finite", "first-chern", "loop-operators", "transgression", "winding"};
}

std::vector<std::string> suite_checks(const std::string& suite)
{
    std::vector<std::string> ids;
    for (const auto& c : registry())
        if (suite == "all" || c.suite == suite) ids.push_back(c.id);
    if (ids.empty()) throw UsageError("unknown suite '" + suite + "'");
    std::sort(ids.begin(), ids.end());
    return ids;
}

double scaled_tolerance(double base, int order, std::size_t n, double tol_scale)
{
    return base * tol_scale * std::max(1.0, std::pow(256.0 / double(n), order));
}

std::vector<CheckResult> run_suite(const SuiteConfig& config)
{
    config.validate();
    std::vector<CheckResult> out;
    for (const auto& id : suite_checks(config.suite)) out.push_back(execute(find_check(id), config));
    return out;
}

CheckResult run_check(const std::string& id, const SuiteConfig& config)
{
    const auto& spec = find_check(id);
    SuiteConfig c = config;
    c.suite = spec.suite;
    c.validate();
    return execute(spec, c);
}

bool all_passed(const std::vector<CheckResult>& results)
{
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.pass; });
}

void write_report(std::ostream& out, const std::vector<CheckResult>& results, ReportFormat format)
{
    if (format == ReportFormat::json_lines) {
        for (const auto& r : results) {
            nlohmann::json j;
            j["id"] = r.id;
            j["anchor"] = r.anchor;
            j["defect"] = std::isfinite(r.defect) ? nlohmann::json(r.defect) : nlohmann::json(nullptr);
            j["tol"] = r.tol;
            j["pass"] = r.pass;
            j["seconds"] = r.seconds;
            if (!r.message.empty()) j["message"] = r.message;
            out << j.dump() << '\n';
        }
        return;
    }
    std::size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.id.size());
    for (const auto& r : results) {
        out << (r.pass ? "PASS " : "FAIL ") << std::left << std::setw(static_cast<int>(width)) << r.id
            << "  defect " << std::setw(10) << std::setprecision(3) << r.defect << " tol " << std::setw(9)
            << r.tol << " " << std::fixed << std::setprecision(2) << r.seconds << "s" << std::defaultfloat;
        out << "  [" << r.anchor << "]";
        if (!r.message.empty()) out << "  " << r.message;
        out << '\n';
    }
    const auto failed = std::count_if(results.begin(), results.end(), [](const CheckResult& r) { return !r.pass; });
    out << results.size() - static_cast<std::size_t>(failed) << " passed, " << failed << " failed\n";
}

// ------------------------------------------------------------------ studies

std::vector<std::string> study_checks()
{
    return {"bismut.solver-error", "first-chern.integral", "winding.random-gauges"};
}

StudyResult convergence_study(const std::string& check, const std::vector<std::size_t>& ns, const SuiteConfig& base)
{
    const auto known = study_checks();
    if (std::find(known.begin(), known.end(), check) == known.end())
        throw UsageError("check '" + check + "' has no N-dependent defect");
    if (ns.size() < 2) throw UsageError("a study needs at least two N values");
    StudyResult s;
    s.check = check;
    for (const std::size_t n : ns) {
        SuiteConfig c = base;
        c.n = n;
        if (check == "bismut.solver-error") {
            if (n < 2 || (n & (n - 1)) != 0) throw UsageError("step counts must be powers of two");
            s.rows.push_back({n, bismut_solver_error(std::max<std::size_t>(n, 32))});
            continue;
        }
        c.suite = find_check(check).suite;
        c.validate();
        s.rows.push_back({n, run_check(check, c).defect});
    }
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i + 1 < s.rows.size(); ++i) {
        const double a = s.rows[i].defect, b = s.rows[i + 1].defect;
        if (!(a > 1e-13 && b > 1e-13) || !std::isfinite(a) || !std::isfinite(b)) continue;
        sum += std::log(a / b) / std::log(double(s.rows[i + 1].n) / double(s.rows[i].n));
        ++count;
    }
    s.observed_order = count ? sum / count : std::numeric_limits<double>::quiet_NaN();
    return s;
}

void write_study(std::ostream& out, const StudyResult& study)
{
    out << "n,defect,order\n" << std::setprecision(6);
    for (std::size_t i = 0; i < study.rows.size(); ++i) {
        out << study.rows[i].n << ',' << study.rows[i].defect << ',';
        if (i > 0 && study.rows[i - 1].defect > 1e-13 && study.rows[i].defect > 1e-13)
            out << std::log(study.rows[i - 1].defect / study.rows[i].defect) /
                       std::log(double(study.rows[i].n) / double(study.rows[i - 1].n));
        out << '\n';
    }
    out << "# observed order " << study.observed_order << '\n';
}

std::string resolve_output_path(const std::string& path)
{
    const std::filesystem::path p(path);
    const char* dir = std::getenv("EQUICHERN_OUT_DIR");
    if (p.is_absolute() || dir == nullptr || *dir == '\0') return path;
    return (std::filesystem::path(dir) / p).string();
}

// -------------------------------------------------------- random instances

std::mt19937_64 check_rng(std::uint64_t seed, const std::string& id)
{
    // FNV-1a keeps the stream independent of the standard library's hash
    std::uint64_t h = 1469598103934665603ull;
    for (const char ch : id) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

LoopGauge random_phase_gauge(std::mt19937_64& rng, std::size_t n, int winding)
{
    std::array<double, 3> c, phi;
    for (std::size_t k = 0; k < 3; ++k) {
        c[k] = uniform(rng, -0.3, 0.3);
        phi[k] = uniform(rng, 0.0, 2.0 * kPi);
    }
    return LoopGauge::sample(n, [=](double t) {
        double arg = winding * t;
        for (std::size_t k = 0; k < 3; ++k) arg += c[k] * std::sin(double(k + 1) * t + phi[k]);
        Mat m(1, 1);
        m(0, 0) = std::exp(kI * arg);
        return m;
    });
}

LoopGauge random_rank2_gauge(std::mt19937_64& rng, std::size_t n, int winding)
{
    const double c1 = uniform(rng, -0.6, 0.6), c2 = uniform(rng, -0.4, 0.4), phi = uniform(rng, 0.0, 2.0 * kPi);
    const Mat v = random_unitary(rng, 2);
    Mat sx(2, 2), sz(2, 2);
    sx << 0.0, 1.0, 1.0, 0.0;
    sz << 1.0, 0.0, 0.0, -1.0;
    return LoopGauge::sample(n, [=](double t) {
        Mat d = Mat::Identity(2, 2);
        d(0, 0) = std::exp(kI * double(winding) * t);
        const Mat h = kI * (c1 * std::sin(t + phi) * sx + c2 * std::cos(2.0 * t) * sz);
        return Mat(d * h.exp() * v);
    });
}

Mat random_unitary(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> nd;
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = Complex(nd(rng), nd(rng));
    return unitary_projection(m);
}

LoopTangentField random_loop_field(std::mt19937_64& rng, std::size_t n)
{
    const int mode = std::uniform_int_distribution<int>(0, 3)(rng);
    const double a = uniform(rng, -0.4, 0.4), b = uniform(rng, -0.4, 0.4), phi = uniform(rng, 0.0, 2.0 * kPi);
    const double cx = uniform(rng, -0.3, 0.3), cy = uniform(rng, -0.3, 0.3);
    LoopTangentField y(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double t = 2.0 * kPi * double(j) / double(n);
        y[j] = Vec2(a * std::cos(mode * t + phi) + cx, b * std::sin((mode + 1) * t) + cy);
    }
    return y;
}

BundleWithConnection perturb_sphere_bundle(const BundleWithConnection& b, double eps, bool invariant)
{
    const auto base = b.base;
    const int rank = b.rank;
    const auto north = [eps, invariant, rank](const Vec2& x) {
        const double d = 1.0 + x.squaredNorm();
        const double c = invariant ? eps / (d * d) : eps * x.x() / (d * d * d);
        const Mat id = Mat::Identity(rank, rank);
        return std::array<Mat, 2>{Mat(-kI * c * x.y() * id), Mat(kI * c * x.x() * id)};
    };
    return add_one_form(
        b,
        [base, north, rank](int chart, const Vec2& x) {
            if (chart == 0) return north(x);
            if (x.norm() < 1e-12) return std::array<Mat, 2>{Mat::Zero(rank, rank), Mat::Zero(rank, rank)};
            const Point p{chart, x};
            const Point q = base->to_chart(p, 0);
            const Mat2 j = base->change_jacobian(p, 0);
            const auto a = north(q.x);
            return std::array<Mat, 2>{Mat(j(0, 0) * a[0] + j(1, 0) * a[1]), Mat(j(0, 1) * a[0] + j(1, 1) * a[1])};
        },
        invariant ? "+invariant" : "+bump");
}

}  // namespace equichern
