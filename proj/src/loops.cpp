#include "equichern/loops.hpp"

#include "equichern/fourier.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <regex>
#include <sstream>

namespace equichern {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

double wedge(const Vec2& v, const Vec2& w) { return v.x() * w.y() - v.y() * w.x(); }

void require_size(std::size_t got, std::size_t want, const char* what)
{
    if (got != want)
        throw Rejected(std::string(what) + ": expected " + std::to_string(want) + " samples, got " +
                       std::to_string(got));
}

int single_chart(const DiscreteLoop& loop, const char* what)
{
    const int c = loop.chart();
    if (c < 0) throw Rejected(std::string(what) + ": loop must lie in a single chart");
    return c;
}

// Number of grid steps equal to theta0, if it is a grid multiple.
std::optional<long> grid_shift(std::size_t n, double theta0)
{
    const double s = theta0 * double(n) / kTwoPi;
    const double r = std::round(s);
    if (std::abs(s - r) > 1e-9) return std::nullopt;
    const long m = static_cast<long>(r) % static_cast<long>(n);
    return m < 0 ? m + static_cast<long>(n) : m;
}

template <class T>
std::vector<T> cyclic_shift(const std::vector<T>& v, long m)
{
    const std::size_t n = v.size();
    std::vector<T> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = v[(j + static_cast<std::size_t>(m)) % n];
    return out;
}

struct LoopInterpolant {
    int chart = 0;
    TrigInterpolant x, y;

    explicit LoopInterpolant(const DiscreteLoop& loop)
    {
        chart = single_chart(loop, "loop interpolation");
        std::vector<Complex> xs(loop.size()), ys(loop.size());
        for (std::size_t j = 0; j < loop.size(); ++j) {
            xs[j] = loop.points[j].x.x();
            ys[j] = loop.points[j].x.y();
        }
        x = TrigInterpolant(xs);
        y = TrigInterpolant(ys);
    }
    Vec2 value(double t) const { return {x.value(t).real(), y.value(t).real()}; }
    Vec2 derivative(double t) const { return {x.derivative(t).real(), y.derivative(t).real()}; }
};

template <class Fn>
auto stencil4(const Fn& f, double h)
{
    return (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
}

}  // namespace

// -------------------------------------------------------------------- types

double DiscreteLoop::theta(std::size_t j) const { return kTwoPi * double(j) / double(points.size()); }

int DiscreteLoop::chart() const
{
    if (points.empty()) return -1;
    for (const auto& p : points)
        if (p.chart != points[0].chart) return -1;
    return points[0].chart;
}

DiscreteLoop DiscreteLoop::sample(std::size_t n, const std::function<Point(double)>& gamma)
{
    DiscreteLoop l;
    l.points.reserve(n);
    for (std::size_t j = 0; j < n; ++j) l.points.push_back(gamma(kTwoPi * double(j) / double(n)));
    return l;
}

DiscreteLoop DiscreteLoop::constant(std::size_t n, const Point& p)
{
    DiscreteLoop l;
    l.points.assign(n, p);
    return l;
}

LoopGauge LoopGauge::sample(std::size_t n, const std::function<Mat(double)>& a)
{
    LoopGauge g;
    g.values.reserve(n);
    for (std::size_t j = 0; j < n; ++j) g.values.push_back(a(kTwoPi * double(j) / double(n)));
    return g;
}

LoopGauge LoopGauge::identity(std::size_t n, int rank)
{
    LoopGauge g;
    g.values.assign(n, Mat::Identity(rank, rank));
    return g;
}

FrameLoop FrameLoop::canonical(const DiscreteLoop& loop, int rank)
{
    return {loop, LoopGauge::identity(loop.size(), rank)};
}

// ------------------------------------------------------------------ presets

DiscreteLoop loop_preset(const std::string& name, std::size_t n)
{
    std::smatch m;
    static const std::regex latitude(R"(latitude\(([-+0-9.eE]+)\))");
    static const std::regex tilted(R"(tilted\(([-+0-9.eE]+)\))");
    static const std::regex constant(R"(constant\(([-+0-9.eE]+),([-+0-9.eE]+)\))");
    if (name == "equator")
        return DiscreteLoop::sample(n, [](double t) { return Point{0, Vec2(std::cos(t), std::sin(t))}; });
    if (std::regex_match(name, m, latitude)) {
        const double a = std::stod(m[1]);
        if (!(a > 0.0 && a < kPi)) throw Rejected("latitude: colatitude must lie in (0, pi)");
        if (a <= 0.5 * kPi) {
            const double r = std::tan(0.5 * a);
            return DiscreteLoop::sample(n, [r](double t) { return Point{0, Vec2(r * std::cos(t), r * std::sin(t))}; });
        }
        const double rho = 1.0 / std::tan(0.5 * a);
        return DiscreteLoop::sample(n, [rho](double t) {
            return Point{1, Vec2(rho * std::cos(t), -rho * std::sin(t))};
        });
    }
    if (std::regex_match(name, m, tilted)) {
        const double a = std::stod(m[1]);
        if (std::abs(a) >= 0.5 * kPi) throw Rejected("tilted: tilt must be below pi/2");
        return DiscreteLoop::sample(n, [a](double t) {
            const Vec3 q(std::cos(t), std::sin(t) * std::cos(a), std::sin(t) * std::sin(a));
            return Point{0, Vec2(q.x() / (1.0 + q.z()), q.y() / (1.0 + q.z()))};
        });
    }
    if (name == "figure")
        return DiscreteLoop::sample(n, [](double t) {
            return Point{0, Vec2(0.3 + 0.8 * std::sin(t), 0.5 * std::sin(2.0 * t))};
        });
    if (name == "figure-chart(t2)")
        return DiscreteLoop::sample(n, [](double t) {
            return Point{0, Vec2(0.5 + 0.2 * std::cos(t), 0.5 + 0.15 * std::sin(2.0 * t))};
        });
    if (std::regex_match(name, m, constant))
        return DiscreteLoop::constant(n, Point{0, Vec2(std::stod(m[1]), std::stod(m[2]))});
    throw Rejected("unknown loop preset '" + name + "'");
}

// ----------------------------------------------------------------- rotation

DiscreteLoop loop_rotate(const DiscreteLoop& loop, double theta0, bool interpolate)
{
    if (const auto m = grid_shift(loop.size(), theta0)) return {cyclic_shift(loop.points, *m)};
    if (!interpolate) throw Rejected("loop_rotate: angle is not a multiple of 2 pi / N");
    const LoopInterpolant li(loop);
    DiscreteLoop out;
    for (std::size_t j = 0; j < loop.size(); ++j) out.points.push_back({li.chart, li.value(loop.theta(j) + theta0)});
    return out;
}

LoopGauge loop_rotate(const LoopGauge& a, double theta0, bool interpolate)
{
    if (const auto m = grid_shift(a.size(), theta0)) return {cyclic_shift(a.values, *m)};
    if (!interpolate) throw Rejected("loop_rotate: angle is not a multiple of 2 pi / N");
    const MatrixInterpolant mi(a.values);
    LoopGauge out;
    for (std::size_t j = 0; j < a.size(); ++j) out.values.push_back(mi.value(kTwoPi * double(j) / double(a.size()) + theta0));
    return out;
}

FrameLoop loop_rotate(const FrameLoop& f, double theta0, bool interpolate)
{
    return {loop_rotate(f.loop, theta0, interpolate), loop_rotate(f.frame, theta0, interpolate)};
}

LoopSection loop_rotate(const LoopSection& s, double theta0, bool interpolate)
{
    if (const auto m = grid_shift(s.size(), theta0)) return cyclic_shift(s, *m);
    if (!interpolate) throw Rejected("loop_rotate: angle is not a multiple of 2 pi / N");
    const std::size_t n = s.size();
    const Eigen::Index dim = n ? s[0].size() : 0;
    LoopSection out(n, CVec::Zero(dim));
    std::vector<Complex> comp(n);
    for (Eigen::Index c = 0; c < dim; ++c) {
        for (std::size_t j = 0; j < n; ++j) comp[j] = s[j](c);
        const TrigInterpolant ti(comp);
        for (std::size_t j = 0; j < n; ++j) out[j](c) = ti.value(kTwoPi * double(j) / double(n) + theta0);
    }
    return out;
}

FrameLoop right_act(const FrameLoop& f, const LoopGauge& a)
{
    require_size(a.size(), f.loop.size(), "right_act");
    FrameLoop r = f;
    for (std::size_t j = 0; j < a.size(); ++j) r.frame.values[j] = f.frame.values[j] * a.values[j];
    return r;
}

// ----------------------------------------------------------------- velocity

LoopTangentField loop_velocity(const DiscreteLoop& loop)
{
    if (loop.size() < 16) throw Rejected("loop_velocity: need at least 16 samples");
    single_chart(loop, "loop_velocity");
    std::vector<double> xs(loop.size()), ys(loop.size());
    for (std::size_t j = 0; j < loop.size(); ++j) {
        xs[j] = loop.points[j].x.x();
        ys[j] = loop.points[j].x.y();
    }
    const auto dx = spectral_derivative(xs), dy = spectral_derivative(ys);
    LoopTangentField v(loop.size());
    for (std::size_t j = 0; j < loop.size(); ++j) v[j] = Vec2(dx[j], dy[j]);
    return v;
}

LoopTangentField loop_velocity_fd(const DiscreteLoop& loop)
{
    const std::size_t n = loop.size();
    if (n < 16) throw Rejected("loop_velocity_fd: need at least 16 samples");
    single_chart(loop, "loop_velocity_fd");
    const double h = kTwoPi / double(n);
    LoopTangentField v(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& p = loop.points;
        v[j] = (-p[(j + 2) % n].x + 8.0 * p[(j + 1) % n].x - 8.0 * p[(j + n - 1) % n].x + p[(j + n - 2) % n].x) /
               (12.0 * h);
    }
    return v;
}

std::vector<Mat> frame_velocity(const FrameLoop& f) { return spectral_derivative(f.frame.values); }

std::vector<Mat> frame_connection_pairing(const BundleWithConnection& b, const FrameLoop& f)
{
    require_size(f.frame.size(), f.loop.size(), "frame_connection_pairing");
    const auto v = loop_velocity(f.loop);
    const auto gdot = frame_velocity(f);
    std::vector<Mat> out(f.loop.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        const Mat& g = f.frame.values[j];
        const Mat gi = g.inverse();
        out[j] = gi * b.A_on(f.loop.points[j], v[j]) * g + gi * gdot[j];
    }
    return out;
}

double max_step_rotation(const LoopGauge& a)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const Mat step = a.values[j].adjoint() * a.values[(j + 1) % a.size()];
        Eigen::ComplexEigenSolver<Mat> es(step, false);
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            worst = std::max(worst, std::abs(std::arg(es.eigenvalues()(i))));
    }
    return worst;
}

// ---------------------------------------------------------------- pushdown

double tube_distance(const ChartedManifold& m, const DiscreteLoop& gamma0, const DiscreteLoop& gamma)
{
    require_size(gamma.size(), gamma0.size(), "tube_distance");
    double worst = 0.0;
    for (std::size_t j = 0; j < gamma.size(); ++j) {
        const Point& p0 = gamma0.points[j];
        try {
            const Point q = m.to_chart(gamma.points[j], p0.chart);
            worst = std::max(worst, (q.x - p0.x).norm());
        } catch (const Rejected&) {
            return std::numeric_limits<double>::infinity();
        }
    }
    return worst;
}

namespace {

void check_tube(const BundleWithConnection& b, const DiscreteLoop& gamma0, const DiscreteLoop& gamma)
{
    const double d = tube_distance(*b.base, gamma0, gamma);
    if (!(d < b.tube_radius)) {
        std::ostringstream msg;
        msg << "loop leaves the tube of radius " << b.tube_radius << " (max distance " << d << ")";
        throw OutsideTube(msg.str(), d);
    }
}

// Transport along the straight chart segment from p0 to q (q moved into p0's
// chart); returns P with components at q = P * components at p0.
Mat radial_transport(const BundleWithConnection& b, const Point& p0, const Point& q, int segments)
{
    const Point qq = b.base->to_chart(q, p0.chart);
    if ((qq.x - p0.x).norm() == 0.0) return b.identity();
    return parallel_transport(b, straight_curve(p0, qq, segments)).matrix;
}

}  // namespace

LoopSection pushdown_trivialize(const BundleWithConnection& b, const FrameLoop& gamma0,
                                const DiscreteLoop& gamma, const LoopSection& s, int segments)
{
    require_size(s.size(), gamma.size(), "pushdown_trivialize");
    require_size(gamma0.frame.size(), gamma0.loop.size(), "pushdown_trivialize");
    check_tube(b, gamma0.loop, gamma);
    LoopSection out(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        const Point& p0 = gamma0.loop.points[j];
        const Point& q = gamma.points[j];
        const Mat P = radial_transport(b, p0, q, segments);
        // components of s in the chart frame of p0's chart
        CVec f = s[j];
        if (q.chart != p0.chart) f = b.transition_at(b.base->to_chart(q, p0.chart), q.chart) * f;
        out[j] = gamma0.frame.values[j].inverse() * P.adjoint() * f;
    }
    return out;
}

LoopGauge transition_extract(const BundleWithConnection& b, const FrameLoop& gamma0, const FrameLoop& gamma1,
                             const DiscreteLoop& gamma, int segments)
{
    check_tube(b, gamma0.loop, gamma);
    check_tube(b, gamma1.loop, gamma);
    LoopGauge u;
    for (std::size_t j = 0; j < gamma.size(); ++j) {
        const Point& p0 = gamma0.loop.points[j];
        const Point& p1 = gamma1.loop.points[j];
        const Point& q = gamma.points[j];
        const Mat Pc = radial_transport(b, p0, q, segments);
        const Mat Pd = radial_transport(b, p1, q, segments);
        Mat change = b.identity();
        if (p1.chart != p0.chart) change = b.transition_at(b.base->to_chart(q, p0.chart), p1.chart);
        u.values.push_back(Mat(gamma0.frame.values[j].inverse() * Pc.adjoint() * change * Pd *
                               gamma1.frame.values[j]));
    }
    return u;
}

// ------------------------------------------------------------------ winding

std::vector<Mat> maurer_cartan(const LoopGauge& a)
{
    const auto adot = spectral_derivative(a.values);
    std::vector<Mat> out(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) out[j] = a.values[j].inverse() * adot[j];
    return out;
}

Complex leading_trace(const std::vector<Mat>& field)
{
    if (field.empty()) throw Rejected("leading_trace: empty field");
    Complex acc = 0.0;
    for (const auto& m : field) acc += m.trace();
    return acc / double(field.size());
}

WindingReport winding_number(const LoopGauge& a)
{
    const std::size_t n = a.size();
    if (n < 2) throw Rejected("winding_number: need at least two samples");
    WindingReport r;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Complex d0 = a.values[j].determinant(), d1 = a.values[(j + 1) % n].determinant();
        const double step = std::arg(d1 / d0);
        if (std::abs(step) >= 0.75 * kPi) {
            std::ostringstream msg;
            msg << "winding_number: det phase jumps by " << step << " between samples " << j << " and "
                << (j + 1) % n << " (undersampled)";
            throw Rejected(msg.str());
        }
        total += step;
    }
    r.phase_unwrap = total / kTwoPi;
    r.trace_integral = (leading_trace(maurer_cartan(a)) / kI).real();
    r.winding = static_cast<int>(std::lround(r.phase_unwrap));
    r.agreement = std::abs(r.phase_unwrap - r.trace_integral);
    r.non_integrality = std::abs(r.trace_integral - r.winding);
    return r;
}

// ------------------------------------------------------------- loop 2-forms

UScalar equivariant_two_form(const BundleWithConnection& b, const FrameLoop& f, const LoopTangentField& Y,
                             const LoopTangentField& Z)
{
    const std::size_t n = f.loop.size();
    require_size(Y.size(), n, "equivariant_two_form");
    require_size(Z.size(), n, "equivariant_two_form");
    require_size(f.frame.size(), n, "equivariant_two_form");
    const double rot = max_step_rotation(f.frame);
    if (rot >= 0.5)
        throw Rejected("equivariant_two_form: frame rotates by " + std::to_string(rot) + " rad in one step");
    const auto pairing = frame_connection_pairing(b, f);
    Complex curv = 0.0, conn = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        curv += b.F_on(f.loop.points[j], Y[j], Z[j]).trace();
        conn += pairing[j].trace();
    }
    UScalar r;
    r[0] = curv / double(n);
    r[1] = -conn / double(n);
    return r;
}

UScalar equivariant_first_chern_form(const BundleWithConnection& b, const FrameLoop& f,
                                     const LoopTangentField& Y, const LoopTangentField& Z)
{
    const auto w = winding_number(f.frame);
    if (w.winding != 0)
        throw NonzeroWinding("equivariant_first_chern_form: frame loop has winding " + std::to_string(w.winding),
                             w.winding);
    return equivariant_two_form(b, f, Y, Z);
}

UScalar equivariant_first_chern_form(const BundleWithConnection& b, const DiscreteLoop& gamma,
                                     const LoopTangentField& Y, const LoopTangentField& Z)
{
    if (gamma.chart() >= 0) return equivariant_first_chern_form(b, FrameLoop::canonical(gamma, b.rank), Y, Z);
    // Move the loop and its fields into one chart if some chart holds it.
    for (int c = 0; c < b.base->chart_count(); ++c) {
        DiscreteLoop moved;
        LoopTangentField y2, z2;
        bool ok = true;
        for (std::size_t j = 0; j < gamma.size() && ok; ++j) {
            try {
                const Point q = b.base->to_chart(gamma.points[j], c);
                if (!b.base->in_chart(q)) {
                    ok = false;
                    break;
                }
                const Mat2 jac = b.base->change_jacobian(gamma.points[j], c);
                moved.points.push_back(q);
                y2.push_back(jac * Y[j]);
                z2.push_back(jac * Z[j]);
            } catch (const Rejected&) {
                ok = false;
            }
        }
        if (ok) return equivariant_first_chern_form(b, FrameLoop::canonical(moved, b.rank), y2, z2);
    }
    throw Rejected("equivariant_first_chern_form: no chart holds the whole loop, so the chart frame is "
                   "not a closed frame loop");
}

// ------------------------------------------------- non-pointwise operator

namespace {

// Transport along the loop's own trajectory from theta to theta + phi.
Mat flow_transport(const BundleWithConnection& b, const LoopInterpolant& li, double theta, double phi)
{
    const int steps = 4;
    const double h = phi / steps;
    Mat t = b.identity();
    const auto rhs = [&](double s) {
        return Mat(-b.A_on({li.chart, li.value(theta + s)}, li.derivative(theta + s)));
    };
    for (int i = 0; i < steps; ++i) {
        const double s = i * h;
        const Mat m0 = rhs(s), m1 = rhs(s + 0.5 * h), m2 = rhs(s + h);
        const Mat k1 = m0 * t;
        const Mat k2 = m1 * (t + 0.5 * h * k1);
        const Mat k3 = m1 * (t + 0.5 * h * k2);
        const Mat k4 = m2 * (t + h * k3);
        t += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return t;
}

LoopSection section_difference(const LoopSection& a, const LoopSection& b)
{
    LoopSection r(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) r[j] = a[j] - b[j];
    return r;
}

double section_norm(const LoopSection& s)
{
    double m = 0.0;
    for (const auto& v : s) m = std::max(m, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
    return m;
}

// L_X s and nabla_X s at gamma (no averaging).
std::pair<LoopSection, LoopSection> lie_and_covariant(const BundleWithConnection& b, const DiscreteLoop& gamma,
                                                      const LoopSectionField& s, double h)
{
    const std::size_t n = gamma.size();
    const LoopInterpolant li(gamma);
    const std::array<double, 4> phis{h, -h, 2.0 * h, -2.0 * h};
    std::array<LoopSection, 4> lie, cov;
    for (std::size_t k = 0; k < 4; ++k) {
        const double phi = phis[k];
        const LoopSection moved = s(loop_rotate(gamma, phi, true));
        require_size(moved.size(), n, "section functional");
        // s(k_phi gamma)(theta - phi): shift the output back
        lie[k] = loop_rotate(moved, -phi, true);
        cov[k].resize(n);
        for (std::size_t j = 0; j < n; ++j)
            cov[k][j] = flow_transport(b, li, gamma.theta(j), phi).inverse() * moved[j];
    }
    LoopSection dl(n), dc(n);
    for (std::size_t j = 0; j < n; ++j) {
        dl[j] = (8.0 * (lie[0][j] - lie[1][j]) - (lie[2][j] - lie[3][j])) / (12.0 * h);
        dc[j] = (8.0 * (cov[0][j] - cov[1][j]) - (cov[2][j] - cov[3][j])) / (12.0 * h);
    }
    return {dl, dc};
}

}  // namespace

LoopSection D_operator(const BundleWithConnection& b, const DiscreteLoop& gamma, const LoopSectionField& s,
                       const OperatorOptions& opt)
{
    const std::size_t n = gamma.size();
    if (opt.average_nodes < 1 || n % static_cast<std::size_t>(opt.average_nodes) != 0)
        throw Rejected("D_operator: averaging nodes must divide N");
    const auto [lie, cov0] = lie_and_covariant(b, gamma, s, opt.step);
    LoopSection cov = cov0;
    if (opt.average_nodes > 1) {
        // pullback of nabla by the grid rotation theta_q, averaged over q
        for (int q = 1; q < opt.average_nodes; ++q) {
            const double tq = kTwoPi * q / opt.average_nodes;
            const LoopSectionField sq = [&s, tq](const DiscreteLoop& l) {
                return loop_rotate(s(loop_rotate(l, -tq)), tq);
            };
            const auto [unused, cq] = lie_and_covariant(b, loop_rotate(gamma, tq), sq, opt.step);
            (void)unused;
            const LoopSection back = loop_rotate(cq, -tq);
            for (std::size_t j = 0; j < n; ++j) cov[j] += back[j];
        }
        for (auto& v : cov) v /= double(opt.average_nodes);
    }
    return section_difference(lie, cov);
}

CommutatorDefect D_commutator_defect(const BundleWithConnection& b, const DiscreteLoop& gamma,
                                     const LoopFunction& f, const LoopSectionField& s, const OperatorOptions& opt)
{
    const LoopSectionField fs = [&f, &s](const DiscreteLoop& l) {
        LoopSection v = s(l);
        const auto fv = f(l);
        require_size(fv.size(), v.size(), "loop function");
        for (std::size_t j = 0; j < v.size(); ++j) v[j] *= fv[j];
        return v;
    };
    const LoopSection d_fs = D_operator(b, gamma, fs, opt);
    const LoopSection d_s = D_operator(b, gamma, s, opt);
    const auto f0 = f(gamma);
    const auto s0 = s(gamma);
    const auto df = spectral_derivative(f0);

    CommutatorDefect r;
    r.defect.resize(gamma.size());
    r.expected.resize(gamma.size());
    for (std::size_t j = 0; j < gamma.size(); ++j) {
        r.defect[j] = d_fs[j] - f0[j] * d_s[j];
        r.expected[j] = -df[j] * s0[j];
    }
    r.mismatch = section_norm(section_difference(r.defect, r.expected));
    r.size = section_norm(r.defect);
    return r;
}

// ----------------------------------------------------- loop-space calculus

namespace {

// Averages a per-theta UGrassmann (rank-1 after trace) over the loop and
// reads off each u^i piece on the first (total - 2i) generators.
UScalar extract_pieces(const UGrassmann& mean, int total_degree, int generators)
{
    UScalar r;
    for (int i = mean.min_deg(); i <= mean.max_deg(); ++i) {
        const int d = total_degree - 2 * i;
        if (d < 0 || d > generators) continue;
        r[i] = mean.at(i)[(SubsetMask{1} << d) - 1](0, 0);
    }
    return r;
}

GrassmannMatrix curvature_hat(const BundleWithConnection& b, const Point& p,
                              const std::vector<LoopTangentField>& fields, std::size_t j)
{
    const int m = static_cast<int>(fields.size());
    GrassmannMatrix omega(m, b.rank);
    if (m < 2) return omega;
    const Mat f = b.F(p);
    for (int a = 0; a < m; ++a)
        for (int c = a + 1; c < m; ++c)
            omega[(SubsetMask{1} << a) | (SubsetMask{1} << c)] =
                f * wedge(fields[static_cast<std::size_t>(a)][j], fields[static_cast<std::size_t>(c)][j]);
    return omega;
}

UGrassmann upower(const UGrassmann& e, int k)
{
    const auto& proto = e.zero();
    UGrassmann r = lift_to_u(GrassmannMatrix::identity(proto.generators(), proto.rank()), e.min_deg(), e.max_deg());
    for (int i = 0; i < k; ++i) r = r * e;
    return r;
}

void check_fields(const DiscreteLoop& loop, const std::vector<LoopTangentField>& fields)
{
    if (fields.size() > static_cast<std::size_t>(GrassmannMatrix::kMaxGenerators))
        throw Rejected("loop form: at most 6 tangent fields");
    for (const auto& y : fields) require_size(y.size(), loop.size(), "loop form field");
}

std::vector<std::pair<double, double>> gauss_legendre01(int n)
{
    std::vector<std::pair<double, double>> nodes;
    for (int i = 1; i <= n; ++i) {
        double x = std::cos(kPi * (i - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.emplace_back(0.5 * (1.0 - x), 0.5 * w);
    }
    return nodes;
}

}  // namespace

LoopForm loop_chern_weil_form(const BundleWithConnection& b, int k)
{
    if (k < 1) throw Rejected("loop_chern_weil_form: k must be positive");
    return [b, k](const DiscreteLoop& loop, const std::vector<LoopTangentField>& fields) {
        check_fields(loop, fields);
        const int m = static_cast<int>(fields.size());
        const auto v = loop_velocity(loop);
        UGrassmann mean(0, k, GrassmannMatrix(m, 1));
        for (std::size_t j = 0; j < loop.size(); ++j) {
            const Point& p = loop.points[j];
            UGrassmann e(0, k, GrassmannMatrix(m, b.rank));
            e[0] = curvature_hat(b, p, fields, j);
            e[1] = GrassmannMatrix::scalar(m, Mat(-b.A_on(p, v[j])));
            mean += trace(upower(e, k));
        }
        mean *= 1.0 / double(loop.size());
        return extract_pieces(mean, 2 * k, m);
    };
}

LoopForm loop_closedness_obstruction(const BundleWithConnection& b, int k)
{
    if (k < 1) throw Rejected("loop_closedness_obstruction: k must be positive");
    return [b, k](const DiscreteLoop& loop, const std::vector<LoopTangentField>& fields) {
        check_fields(loop, fields);
        const int m = static_cast<int>(fields.size());
        const std::size_t n = loop.size();
        const auto v = loop_velocity(loop);
        std::vector<std::vector<Mat>> lie(fields.size());
        for (std::size_t a = 0; a < fields.size(); ++a) {
            std::vector<Mat> ay(n);
            for (std::size_t j = 0; j < n; ++j) ay[j] = b.A_on(loop.points[j], fields[a][j]);
            lie[a] = spectral_derivative(ay);
        }
        UGrassmann mean(0, k, GrassmannMatrix(m, 1));
        for (std::size_t j = 0; j < n; ++j) {
            const Point& p = loop.points[j];
            UGrassmann e(0, k, GrassmannMatrix(m, b.rank));
            e[0] = curvature_hat(b, p, fields, j);
            e[1] = GrassmannMatrix::scalar(m, Mat(-b.A_on(p, v[j])));
            GrassmannMatrix l(m, b.rank);
            for (int a = 0; a < m; ++a) l[SubsetMask{1} << a] = lie[static_cast<std::size_t>(a)][j];
            UGrassmann ul(0, k, GrassmannMatrix(m, b.rank));
            ul[1] = l;
            UGrassmann term = trace(upower(e, k - 1) * ul);
            term *= -double(k);
            mean += term;
        }
        mean *= 1.0 / double(n);
        return extract_pieces(mean, 2 * k + 1, m);
    };
}

BundleWithConnection interpolate_connection(const BundleWithConnection& b0, const BundleWithConnection& b1,
                                            double t)
{
    if (b0.rank != b1.rank || b0.base != b1.base)
        throw Rejected("interpolate_connection: bundles must share base and rank");
    BundleWithConnection r = b0;
    r.name = b0.name + "~" + b1.name;
    auto c0 = b0.connection, c1 = b1.connection;
    r.connection = [c0, c1, t](int chart, const Vec2& x) {
        auto a = c0(chart, x);
        const auto e = c1(chart, x);
        for (int i = 0; i < 2; ++i) a[static_cast<std::size_t>(i)] =
            (1.0 - t) * a[static_cast<std::size_t>(i)] + t * e[static_cast<std::size_t>(i)];
        return a;
    };
    r.curvature_xy = nullptr;
    return r;
}

LoopForm loop_transgression_form(const BundleWithConnection& b0, const BundleWithConnection& b1, int k,
                                 int gauss_nodes)
{
    if (k < 1) throw Rejected("loop_transgression_form: k must be positive");
    std::vector<std::pair<double, BundleWithConnection>> path;
    for (const auto& [t, w] : gauss_legendre01(gauss_nodes)) path.emplace_back(w, interpolate_connection(b0, b1, t));
    return [b0, b1, k, path](const DiscreteLoop& loop, const std::vector<LoopTangentField>& fields) {
        check_fields(loop, fields);
        const int m = static_cast<int>(fields.size());
        const auto v = loop_velocity(loop);
        UGrassmann mean(0, k, GrassmannMatrix(m, 1));
        for (std::size_t j = 0; j < loop.size(); ++j) {
            const Point& p = loop.points[j];
            GrassmannMatrix alpha(m, b0.rank);
            for (int a = 0; a < m; ++a) {
                const Vec2& y = fields[static_cast<std::size_t>(a)][j];
                alpha[SubsetMask{1} << a] = b1.A_on(p, y) - b0.A_on(p, y);
            }
            const UGrassmann alpha_u = lift_to_u(alpha, 0, k);
            for (const auto& [w, bt] : path) {
                UGrassmann e(0, k, GrassmannMatrix(m, b0.rank));
                e[0] = curvature_hat(bt, p, fields, j);
                e[1] = GrassmannMatrix::scalar(m, Mat(-bt.A_on(p, v[j])));
                UGrassmann term = trace(alpha_u * upower(e, k - 1));
                term *= w * double(k);
                mean += term;
            }
        }
        mean *= 1.0 / double(loop.size());
        return extract_pieces(mean, 2 * k - 1, m);
    };
}

UScalar loopspace_equivariant_d(const LoopForm& form, int total_degree, const DiscreteLoop& gamma,
                                const std::vector<LoopTangentField>& fields, const LoopDOptions& opt)
{
    single_chart(gamma, "loopspace_equivariant_d");
    const auto X = loop_velocity(gamma);
    const auto shifted = [&gamma](const LoopTangentField& y, double eps) {
        DiscreteLoop l = gamma;
        for (std::size_t j = 0; j < l.size(); ++j) l.points[j].x += eps * y[j];
        return l;
    };
    UScalar r;
    for (int j = 0; 2 * j <= total_degree + 1; ++j) {
        const int D = total_degree + 1 - 2 * j;
        if (D > static_cast<int>(fields.size())) continue;
        Complex value = 0.0;
        if (D >= 1 && total_degree - 2 * j >= 0) {
            // d of the u^j piece with loop-independent fields
            for (int i = 0; i < D; ++i) {
                std::vector<LoopTangentField> rest;
                for (int a = 0; a < D; ++a)
                    if (a != i) rest.push_back(fields[static_cast<std::size_t>(a)]);
                const auto along = [&](double eps) {
                    return form(shifted(fields[static_cast<std::size_t>(i)], eps), rest).at(j);
                };
                value += (i % 2 ? -1.0 : 1.0) * stencil4(along, opt.step);
            }
        }
        if (j >= 1) {
            std::vector<LoopTangentField> with_x{X};
            for (int a = 0; a < D; ++a) with_x.push_back(fields[static_cast<std::size_t>(a)]);
            value -= form(gamma, with_x).at(j - 1);
        }
        r[j] = value;
    }
    return r;
}

// ------------------------------------------------------------ transgression

std::vector<std::vector<Vec3>> once_covering_family(std::size_t nt, std::size_t ns)
{
    std::vector<std::vector<Vec3>> grid(nt, std::vector<Vec3>(ns));
    for (std::size_t i = 0; i < nt; ++i) {
        const double t = double(i) / double(nt);
        for (std::size_t j = 0; j < ns; ++j) {
            const double s = double(j) / double(ns);
            double colat = 0.0, lon = 0.0;
            if (2 * i < nt) {
                colat = kPi * 2.0 * t;
                lon = kTwoPi * s;
            } else {
                colat = kPi * (2.0 - 2.0 * t);
            }
            grid[i][j] = Vec3(std::sin(colat) * std::cos(lon), std::sin(colat) * std::sin(lon), std::cos(colat));
        }
    }
    return grid;
}

DegreeReport transgress_loop_family(const std::vector<std::vector<Vec3>>& grid)
{
    DegreeReport r;
    r.map.nt = grid.size();
    if (r.map.nt < 3) throw Rejected("transgress_loop_family: need at least three loops");
    r.map.ns = grid[0].size();
    if (r.map.ns < 3) throw Rejected("transgress_loop_family: need at least three samples per loop");
    for (const auto& row : grid) {
        require_size(row.size(), r.map.ns, "transgress_loop_family");
        for (const auto& p : row) r.map.points.push_back(p.normalized());
    }
    const auto& M = r.map;
    const auto angle = [](const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); };
    const auto solid = [](const Vec3& a, const Vec3& b, const Vec3& c) {
        if (a == b || b == c || a == c) return 0.0;
        return 2.0 * std::atan2(a.dot(b.cross(c)), 1.0 + a.dot(b) + b.dot(c) + c.dot(a));
    };
    double total = 0.0, quad = 0.0;
    const double dt = 1.0 / double(M.nt), ds = 1.0 / double(M.ns);
    for (std::size_t i = 0; i < M.nt; ++i)
        for (std::size_t j = 0; j < M.ns; ++j) {
            const Vec3 &a = M.at(i, j), &b = M.at(i + 1, j), &c = M.at(i + 1, j + 1), &d = M.at(i, j + 1);
            if (angle(a, b) > 0.5 * kPi || angle(a, d) > 0.5 * kPi) {
                std::ostringstream msg;
                msg << "transgress_loop_family: degenerate cell at (" << i << ", " << j << ")";
                throw Rejected(msg.str());
            }
            total += solid(a, b, c) + solid(a, c, d);
            const Vec3 pt = (M.at(i + 1, j) - M.at(i + M.nt - 1, j)) / (2.0 * dt);
            const Vec3 ps = (M.at(i, j + 1) - M.at(i, j + M.ns - 1)) / (2.0 * ds);
            quad += a.dot(pt.cross(ps)) * dt * ds;
        }
    r.raw = total / (4.0 * kPi);
    r.quadrature = quad / (4.0 * kPi);
    r.degree = static_cast<int>(std::lround(r.raw));
    r.non_integrality = std::abs(r.raw - r.degree);
    return r;
}

DegreeReport transgress_loop_family(const ChartedManifold& m, const std::vector<DiscreteLoop>& family)
{
    if (!m.embed) throw Rejected("transgress_loop_family: " + m.name + " has no embedding in R^3");
    std::vector<std::vector<Vec3>> grid;
    for (const auto& loop : family) {
        grid.emplace_back();
        for (const auto& p : loop.points) grid.back().push_back(m.embed(p));
    }
    return transgress_loop_family(grid);
}

// ------------------------------------------------------------ serialization

namespace {

std::vector<std::vector<double>> read_rows(std::istream& in)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void write_table(std::ostream& out, const DiscreteLoop& loop)
{
    out << "# theta chart x y\n" << std::setprecision(17);
    for (std::size_t j = 0; j < loop.size(); ++j)
        out << loop.theta(j) << ' ' << loop.points[j].chart << ' ' << loop.points[j].x.x() << ' '
            << loop.points[j].x.y() << '\n';
}

void write_table(std::ostream& out, const LoopGauge& a)
{
    out << "# theta rank then re/im of each entry, row-major\n" << std::setprecision(17);
    for (std::size_t j = 0; j < a.size(); ++j) {
        out << kTwoPi * double(j) / double(a.size()) << ' ' << a.rank();
        for (Eigen::Index r = 0; r < a.values[j].rows(); ++r)
            for (Eigen::Index c = 0; c < a.values[j].cols(); ++c)
                out << ' ' << a.values[j](r, c).real() << ' ' << a.values[j](r, c).imag();
        out << '\n';
    }
}

void write_table(std::ostream& out, const LoopTangentField& y)
{
    out << "# theta vx vy\n" << std::setprecision(17);
    for (std::size_t j = 0; j < y.size(); ++j)
        out << kTwoPi * double(j) / double(y.size()) << ' ' << y[j].x() << ' ' << y[j].y() << '\n';
}

void write_table(std::ostream& out, const LoopSection& s)
{
    out << "# theta then re/im of each component\n" << std::setprecision(17);
    for (std::size_t j = 0; j < s.size(); ++j) {
        out << kTwoPi * double(j) / double(s.size());
        for (Eigen::Index c = 0; c < s[j].size(); ++c) out << ' ' << s[j](c).real() << ' ' << s[j](c).imag();
        out << '\n';
    }
}

DiscreteLoop read_loop_table(std::istream& in)
{
    DiscreteLoop l;
    for (const auto& row : read_rows(in)) {
        if (row.size() != 4) throw Rejected("read_loop_table: rows need 4 columns");
        l.points.push_back({static_cast<int>(row[1]), Vec2(row[2], row[3])});
    }
    return l;
}

LoopGauge read_gauge_table(std::istream& in)
{
    LoopGauge g;
    for (const auto& row : read_rows(in)) {
        if (row.size() < 2) throw Rejected("read_gauge_table: short row");
        const int n = static_cast<int>(row[1]);
        if (n < 1 || row.size() != static_cast<std::size_t>(2 + 2 * n * n))
            throw Rejected("read_gauge_table: row length does not match the rank");
        Mat m(n, n);
        std::size_t k = 2;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c, k += 2) m(r, c) = Complex(row[k], row[k + 1]);
        g.values.push_back(m);
    }
    return g;
}

}  // namespace equichern
