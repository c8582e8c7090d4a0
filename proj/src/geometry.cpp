#include "equichern/geometry.hpp"

#include "equichern/expr.hpp"
#include "equichern/fourier.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <map>
#include <numbers>
#include <regex>
#include <sstream>

namespace equichern {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

Mat2 rotation_matrix(double theta)
{
    Mat2 r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

Vec2 rotate2(const Vec2& v, double theta)
{
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

Mat scalar_mat(Complex c)
{
    Mat m(1, 1);
    m(0, 0) = c;
    return m;
}

Mat block_diag(const Mat& a, const Mat& b)
{
    Mat m = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    m.topLeftCorner(a.rows(), a.cols()) = a;
    m.bottomRightCorner(b.rows(), b.cols()) = b;
    return m;
}

}  // namespace

// ---------------------------------------------------------------- manifolds

bool ChartedManifold::in_chart(const Point& p) const
{
    if (p.chart < 0 || p.chart >= chart_count()) return false;
    if (!std::isfinite(p.x.x()) || !std::isfinite(p.x.y())) return false;
    return charts[static_cast<std::size_t>(p.chart)].contains(p.x);
}

Point ChartedManifold::to_chart(const Point& p, int to) const
{
    if (to < 0 || to >= chart_count()) throw Rejected(name + ": no chart " + std::to_string(to));
    if (p.chart == to) return p;
    const auto y = change(p.chart, to, p.x);
    if (!y) throw Rejected(name + ": point outside the overlap of charts " +
                           std::to_string(p.chart) + " and " + std::to_string(to));
    return {to, *y};
}

Mat2 ChartedManifold::change_jacobian(const Point& p, int to, double h) const
{
    Mat2 j;
    for (int c = 0; c < 2; ++c) {
        Vec2 e = Vec2::Zero();
        e[c] = h;
        const Point plus = to_chart({p.chart, p.x + e}, to);
        const Point minus = to_chart({p.chart, p.x - e}, to);
        j.col(c) = (plus.x - minus.x) / (2.0 * h);
    }
    return j;
}

Vec2 ChartedManifold::rotate_vector(const Point& p, const Vec2& v, double theta, double h) const
{
    if (act_jacobian) return act_jacobian(p.chart, p.x, theta) * v;
    return (act(p.chart, p.x + h * v, theta) - act(p.chart, p.x - h * v, theta)) / (2.0 * h);
}

std::shared_ptr<const ChartedManifold> make_sphere()
{
    auto m = std::make_shared<ChartedManifold>();
    m->name = "s2";
    // North chart: z = x + iy, the stereographic coordinate with z = 0 at
    // (0,0,1). South chart: w = 1/z. Both are kept bounded so that samples
    // near the opposite pole are pushed to the other chart.
    const auto bounded = [](const Vec2& x) { return x.squaredNorm() < 100.0; };
    m->charts = {{"north", bounded}, {"south", bounded}};
    m->change = [](int from, int to, const Vec2& x) -> std::optional<Vec2> {
        if (from == to) return x;
        const double r2 = x.squaredNorm();
        if (r2 < 1e-24) return std::nullopt;
        return Vec2(x.x() / r2, -x.y() / r2);
    };
    m->act = [](int chart, const Vec2& x, double theta) {
        return rotate2(x, chart == 0 ? theta : -theta);
    };
    m->act_jacobian = [](int chart, const Vec2&, double theta) {
        return rotation_matrix(chart == 0 ? theta : -theta);
    };
    m->generator = [](int chart, const Vec2& x) {
        return chart == 0 ? Vec2(-x.y(), x.x()) : Vec2(x.y(), -x.x());
    };
    m->area_density = [](int, const Vec2& x) {
        const double d = 1.0 + x.squaredNorm();
        return 4.0 / (d * d);
    };
    m->embed = [](const Point& p) {
        const double r2 = p.x.squaredNorm();
        const double d = 1.0 + r2;
        if (p.chart == 0) return Vec3(2.0 * p.x.x() / d, 2.0 * p.x.y() / d, (1.0 - r2) / d);
        return Vec3(2.0 * p.x.x() / d, -2.0 * p.x.y() / d, (r2 - 1.0) / d);
    };
    m->from_embedding = [](const Vec3& q) {
        const Vec3 u = q.normalized();
        if (u.z() >= 0.0) return Point{0, Vec2(u.x() / (1.0 + u.z()), u.y() / (1.0 + u.z()))};
        return Point{1, Vec2(u.x() / (1.0 - u.z()), -u.y() / (1.0 - u.z()))};
    };
    m->square = [](double s, double t) {
        const double vartheta = kPi * s, phi = 2.0 * kPi * t;
        const double c = std::cos(phi), sn = std::sin(phi);
        Mat2 j;
        if (vartheta < 0.5 * kPi) {
            const double r = std::tan(0.5 * vartheta);
            j.col(0) = kPi * 0.5 * (1.0 + r * r) * Vec2(c, sn);
            j.col(1) = 2.0 * kPi * r * Vec2(-sn, c);
            return std::make_pair(Point{0, Vec2(r * c, r * sn)}, j);
        }
        const double rho = 1.0 / std::tan(0.5 * vartheta);
        j.col(0) = -kPi * 0.5 * (1.0 + rho * rho) * Vec2(c, -sn);
        j.col(1) = 2.0 * kPi * rho * Vec2(-sn, -c);
        return std::make_pair(Point{1, Vec2(rho * c, -rho * sn)}, j);
    };
    return m;
}

std::shared_ptr<const ChartedManifold> make_torus()
{
    auto m = std::make_shared<ChartedManifold>();
    m->name = "t2";
    // Covering chart R^2 -> R^2 / Z^2; the fundamental domain is [0,1]^2.
    m->charts = {{"cover", [](const Vec2&) { return true; }}};
    m->change = [](int, int, const Vec2& x) -> std::optional<Vec2> { return x; };
    m->act = [](int, const Vec2& x, double theta) {
        return Vec2(x.x(), x.y() + theta / (2.0 * kPi));
    };
    m->act_jacobian = [](int, const Vec2&, double) { return Mat2(Mat2::Identity()); };
    m->generator = [](int, const Vec2&) { return Vec2(0.0, 1.0 / (2.0 * kPi)); };
    m->area_density = [](int, const Vec2&) { return 1.0; };
    m->square = [](double s, double t) {
        return std::make_pair(Point{0, Vec2(s, t)}, Mat2(Mat2::Identity()));
    };
    return m;
}

namespace {

std::shared_ptr<ChartedManifold> plane_base(bool rotating)
{
    auto m = std::make_shared<ChartedManifold>();
    m->name = rotating ? "plane" : "plane(static)";
    m->charts = {{"plane", [](const Vec2&) { return true; }}};
    m->change = [](int, int, const Vec2& x) -> std::optional<Vec2> { return x; };
    if (rotating) {
        m->act = [](int, const Vec2& x, double theta) { return rotate2(x, theta); };
        m->act_jacobian = [](int, const Vec2&, double theta) { return rotation_matrix(theta); };
        m->generator = [](int, const Vec2& x) { return Vec2(-x.y(), x.x()); };
    } else {
        m->act = [](int, const Vec2& x, double) { return x; };
        m->act_jacobian = [](int, const Vec2&, double) { return Mat2(Mat2::Identity()); };
        m->generator = [](int, const Vec2&) { return Vec2(Vec2::Zero()); };
    }
    m->area_density = [](int, const Vec2&) { return 1.0; };
    return m;
}

}  // namespace

std::shared_ptr<const ChartedManifold> make_plane() { return plane_base(true); }

// ------------------------------------------------------------------ bundles

Mat BundleWithConnection::A_on(const Point& p, const Vec2& v) const
{
    const auto a = A(p);
    return a[0] * v.x() + a[1] * v.y();
}

Mat BundleWithConnection::F_fd(const Point& p) const
{
    const double h = fd_step;
    const auto ax_p = connection(p.chart, p.x + Vec2(h, 0.0));
    const auto ax_m = connection(p.chart, p.x - Vec2(h, 0.0));
    const auto ay_p = connection(p.chart, p.x + Vec2(0.0, h));
    const auto ay_m = connection(p.chart, p.x - Vec2(0.0, h));
    const auto a = A(p);
    const Mat dxAy = (ax_p[1] - ax_m[1]) / (2.0 * h);
    const Mat dyAx = (ay_p[0] - ay_m[0]) / (2.0 * h);
    return dxAy - dyAx + a[0] * a[1] - a[1] * a[0];
}

Mat BundleWithConnection::F(const Point& p) const
{
    if (curvature_xy) return curvature_xy(p.chart, p.x);
    return F_fd(p);
}

Mat BundleWithConnection::F_on(const Point& p, const Vec2& v, const Vec2& w) const
{
    return F(p) * (v.x() * w.y() - v.y() * w.x());
}

Mat BundleWithConnection::transition_at(const Point& p, int to) const
{
    if (p.chart == to) return identity();
    return transition(p.chart, to, p.x);
}

Mat BundleWithConnection::lift_generator_at(int chart) const
{
    if (!lift_generator) throw Rejected(name + ": the circle action has no lift to this bundle");
    return lift_generator(chart);
}

Mat BundleWithConnection::lift(int chart, double theta) const
{
    const Mat g = lift_generator_at(chart);
    if (coeff_norm(g) == 0.0) return identity();
    return Mat(theta * g).exp();
}

Mat BundleWithConnection::omega_X(const Point& p) const
{
    return A_on(p, base->generator(p.chart, p.x)) + lift_generator_at(p.chart);
}

BundleWithConnection bundle_sphere_line(int k)
{
    BundleWithConnection b;
    b.name = "s2/o(" + std::to_string(k) + ")";
    b.base = make_sphere();
    b.rank = 1;
    const double kk = k;
    // A = -ik (x dy - y dx) / (1 + r^2), the same expression in both charts.
    b.connection = [kk](int, const Vec2& x) {
        const double d = 1.0 + x.squaredNorm();
        return std::array<Mat, 2>{scalar_mat(kI * kk * x.y() / d), scalar_mat(-kI * kk * x.x() / d)};
    };
    b.curvature_xy = [kk](int, const Vec2& x) {
        const double d = 1.0 + x.squaredNorm();
        return scalar_mat(-2.0 * kI * kk / (d * d));
    };
    b.transition = [k](int from, int to, const Vec2& x) {
        if (from == to) return scalar_mat(1.0);
        const Complex z(x.x(), x.y());
        return scalar_mat(std::pow(z / std::abs(z), k));
    };
    b.lift_generator = [kk](int chart) { return scalar_mat(chart == 0 ? 0.0 : -kI * kk); };
    b.tube_radius = 0.5;
    return b;
}

BundleWithConnection bundle_sphere_sum(int k1, int k2)
{
    const BundleWithConnection a = bundle_sphere_line(k1), c = bundle_sphere_line(k2);
    BundleWithConnection b;
    b.name = "s2/o(" + std::to_string(k1) + ")+o(" + std::to_string(k2) + ")";
    b.base = a.base;
    b.rank = 2;
    b.connection = [a, c](int chart, const Vec2& x) {
        const auto p = a.connection(chart, x), q = c.connection(chart, x);
        return std::array<Mat, 2>{block_diag(p[0], q[0]), block_diag(p[1], q[1])};
    };
    b.curvature_xy = [a, c](int chart, const Vec2& x) {
        return block_diag(a.curvature_xy(chart, x), c.curvature_xy(chart, x));
    };
    b.transition = [a, c](int from, int to, const Vec2& x) {
        return block_diag(a.transition(from, to, x), c.transition(from, to, x));
    };
    b.lift_generator = [a, c](int chart) {
        return block_diag(a.lift_generator(chart), c.lift_generator(chart));
    };
    return b;
}

BundleWithConnection bundle_torus_theta()
{
    BundleWithConnection b;
    b.name = "t2/theta";
    b.base = make_torus();
    b.rank = 1;
    b.connection = [](int, const Vec2& x) {
        return std::array<Mat, 2>{scalar_mat(0.0), scalar_mat(-2.0 * kPi * kI * x.x())};
    };
    b.curvature_xy = [](int, const Vec2&) { return scalar_mat(-2.0 * kPi * kI); };
    b.transition = [](int, int, const Vec2&) { return scalar_mat(1.0); };
    b.lift_generator = [](int) { return scalar_mat(0.0); };
    b.tube_radius = 0.25;
    return b;
}

BundleWithConnection bundle_trivial(std::shared_ptr<const ChartedManifold> base, int rank,
                                    std::optional<Mat> lift)
{
    if (rank < 1) throw Rejected("bundle_trivial: rank must be positive");
    const Mat g = lift ? *lift : Mat(Mat::Zero(rank, rank));
    if (g.rows() != rank || g.cols() != rank) throw Rejected("bundle_trivial: lift has wrong size");
    BundleWithConnection b;
    b.name = base->name + "/trivial(" + std::to_string(rank) + ")";
    b.base = std::move(base);
    b.rank = rank;
    const Mat zero = Mat::Zero(rank, rank), id = Mat::Identity(rank, rank);
    b.connection = [zero](int, const Vec2&) { return std::array<Mat, 2>{zero, zero}; };
    b.curvature_xy = [zero](int, const Vec2&) { return zero; };
    b.transition = [id](int, int, const Vec2&) { return id; };
    b.lift_generator = [g](int) { return g; };
    return b;
}

BundleWithConnection bundle_plane_su2(double c1, double c2)
{
    Mat sx(2, 2), sy(2, 2), sz(2, 2);
    sx << 0.0, 1.0, 1.0, 0.0;
    sy << 0.0, -kI, kI, 0.0;
    sz << 1.0, 0.0, 0.0, -1.0;
    BundleWithConnection b;
    b.name = "plane/su2";
    b.base = make_plane();
    b.rank = 2;
    b.connection = [=](int, const Vec2& x) {
        const double f = 1.0 / (1.0 + x.squaredNorm());
        const Mat ax = kI * f * (-c1 * x.y() * sz + c2 * x.x() * sx);
        const Mat ay = kI * f * (c1 * x.x() * sz + c2 * x.y() * sx);
        return std::array<Mat, 2>{ax, ay};
    };
    b.curvature_xy = [=](int, const Vec2& x) {
        const double r2 = x.squaredNorm();
        const double f = 1.0 / (1.0 + r2);
        return Mat(2.0 * kI * f * f * (c1 * sz + c1 * c2 * r2 * sy));
    };
    b.transition = [](int, int, const Vec2&) { return Mat(Mat::Identity(2, 2)); };
    b.lift_generator = [](int) { return Mat(Mat::Zero(2, 2)); };
    b.tube_radius = 1.0;
    return b;
}

BundleWithConnection bundle_from_preset(const std::string& name)
{
    std::smatch m;
    static const std::regex line(R"(s2/o\((-?\d+)\))");
    static const std::regex sum(R"(s2/o\((-?\d+)\)\+o\((-?\d+)\))");
    static const std::regex trivial(R"((s2|t2|plane)/trivial\((\d+)\))");
    if (std::regex_match(name, m, line)) return bundle_sphere_line(std::stoi(m[1]));
    if (std::regex_match(name, m, sum)) return bundle_sphere_sum(std::stoi(m[1]), std::stoi(m[2]));
    if (std::regex_match(name, m, trivial)) {
        const std::string base = m[1];
        auto mf = base == "s2" ? make_sphere() : base == "t2" ? make_torus() : make_plane();
        return bundle_trivial(mf, std::stoi(m[2]));
    }
    if (name == "t2/theta") return bundle_torus_theta();
    if (name == "plane/su2") return bundle_plane_su2();
    throw Rejected("unknown bundle preset '" + name + "'");
}

BundleWithConnection bundle_from_description(const std::string& text)
{
    std::string name = "custom", base = "plane", action = "rotation";
    int rank = 1;
    struct Entry {
        int which;  // 0: A_x, 1: A_y, 2: lift
        int row, col;
        Expression re, im;
    };
    std::vector<Entry> entries;

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::string key;
        if (!(ls >> key)) continue;
        const auto where = " (line " + std::to_string(lineno) + ")";
        if (key == "name") ls >> name;
        else if (key == "base") ls >> base;
        else if (key == "action") ls >> action;
        else if (key == "rank") ls >> rank;
        else if (key == "A_x" || key == "A_y" || key == "lift") {
            Entry e{key == "A_x" ? 0 : key == "A_y" ? 1 : 2, 0, 0, {}, {}};
            if (!(ls >> e.row >> e.col)) throw Rejected("bundle description: missing indices" + where);
            std::string rest;
            std::getline(ls, rest);
            const auto eq = rest.find('=');
            if (eq == std::string::npos) throw Rejected("bundle description: missing '='" + where);
            rest = rest.substr(eq + 1);
            const auto bar = rest.find('|');
            e.re = Expression::parse(rest.substr(0, bar));
            e.im = Expression::parse(bar == std::string::npos ? "0" : rest.substr(bar + 1));
            entries.push_back(std::move(e));
        } else {
            throw Rejected("bundle description: unknown key '" + key + "'" + where);
        }
    }
    if (rank < 1 || rank > 8) throw Rejected("bundle description: rank must lie in [1, 8]");
    for (const auto& e : entries)
        if (e.row < 0 || e.row >= rank || e.col < 0 || e.col >= rank)
            throw Rejected("bundle description: entry index outside the rank");

    std::shared_ptr<const ChartedManifold> manifold;
    if (base == "plane") {
        if (action != "rotation" && action != "none")
            throw Rejected("bundle description: action must be rotation or none");
        manifold = plane_base(action == "rotation");
    } else if (base == "torus") {
        manifold = make_torus();
    } else {
        throw Rejected("bundle description: base must be plane or torus");
    }

    BundleWithConnection b;
    b.name = name;
    b.base = manifold;
    b.rank = rank;
    b.connection = [entries, rank](int, const Vec2& x) {
        std::array<Mat, 2> a{Mat::Zero(rank, rank), Mat::Zero(rank, rank)};
        for (const auto& e : entries)
            if (e.which < 2) a[static_cast<std::size_t>(e.which)](e.row, e.col) =
                Complex(e.re(x.x(), x.y()), e.im(x.x(), x.y()));
        return a;
    };
    b.transition = [rank](int, int, const Vec2&) { return Mat(Mat::Identity(rank, rank)); };
    Mat lift = Mat::Zero(rank, rank);
    for (const auto& e : entries)
        if (e.which == 2) lift(e.row, e.col) = Complex(e.re(0.0, 0.0), e.im(0.0, 0.0));
    b.lift_generator = [lift](int) { return lift; };
    return b;
}

BundleWithConnection add_one_form(const BundleWithConnection& b,
                                  std::function<std::array<Mat, 2>(int, const Vec2&)> alpha,
                                  const std::string& suffix)
{
    BundleWithConnection r = b;
    r.name = b.name + suffix;
    auto base_conn = b.connection;
    r.connection = [base_conn, alpha](int chart, const Vec2& x) {
        auto a = base_conn(chart, x);
        const auto d = alpha(chart, x);
        a[0] += d[0];
        a[1] += d[1];
        return a;
    };
    r.curvature_xy = nullptr;
    return r;
}

std::array<Mat, 2> gauge_transform(const std::array<Mat, 2>& A, const GaugeField& g,
                                   const Point& p, double h)
{
    const Mat g0 = g(p.chart, p.x);
    const double defect = unitarity_defect(g0);
    if (defect > 1e-8)
        throw Rejected("gauge_transform: gauge is not unitary (defect " + std::to_string(defect) + ")");
    const Mat gi = g0.adjoint();
    std::array<Mat, 2> out;
    for (int c = 0; c < 2; ++c) {
        Vec2 e = Vec2::Zero();
        e[c] = h;
        const Mat dg = (g(p.chart, p.x + e) - g(p.chart, p.x - e)) / (2.0 * h);
        out[static_cast<std::size_t>(c)] = gi * A[static_cast<std::size_t>(c)] * g0 + gi * dg;
    }
    return out;
}

BundleWithConnection gauge_transform(const BundleWithConnection& b, GaugeField g, double h)
{
    BundleWithConnection r = b;
    r.name = b.name + "/gauged";
    auto conn = b.connection;
    r.connection = [conn, g, h](int chart, const Vec2& x) {
        return gauge_transform(conn(chart, x), g, Point{chart, x}, h);
    };
    r.curvature_xy = nullptr;
    auto trans = b.transition;
    auto base = b.base;
    r.transition = [trans, g, base](int from, int to, const Vec2& x) {
        const Point q = base->to_chart({from, x}, to);
        return Mat(g(from, x).adjoint() * trans(from, to, x) * g(to, q.x));
    };
    // The lift generator is chart-constant only for constant gauges.
    r.lift_generator = nullptr;
    return r;
}

// ---------------------------------------------------------------- transport

DiscreteCurve straight_curve(const Point& a, const Point& b, int segments)
{
    if (a.chart != b.chart) throw Rejected("straight_curve: endpoints in different charts");
    if (segments < 1) throw Rejected("straight_curve: need at least one segment");
    DiscreteCurve c;
    for (int i = 0; i <= segments; ++i) {
        const double s = double(i) / segments;
        c.samples.push_back({a.chart, (1.0 - s) * a.x + s * b.x});
    }
    return c;
}

namespace {

// One RK4 pass with `sub` steps per segment; returns the raw product.
struct TransportPlan {
    const BundleWithConnection* bundle = nullptr;
    std::vector<Point> starts, ends;
    std::vector<Mat> switches;  // applied before segment j (identity if none)
    bool trig = false;
    TrigInterpolant cx, cy;
    int chart = 0;
    std::size_t count = 0;

    Mat rhs(std::size_t seg, double s) const
    {
        if (trig) {
            const double tau = 2.0 * kPi * (double(seg) + s) / double(count);
            const Vec2 x(cx.value(tau).real(), cy.value(tau).real());
            const Vec2 v = (2.0 * kPi / double(count)) *
                           Vec2(cx.derivative(tau).real(), cy.derivative(tau).real());
            return -bundle->A_on({chart, x}, v);
        }
        const Vec2 v = ends[seg].x - starts[seg].x;
        const Vec2 x = starts[seg].x + s * v;
        return -bundle->A_on({ends[seg].chart, x}, v);
    }

    Mat run(int sub) const
    {
        Mat t = bundle->identity();
        const double h = 1.0 / sub;
        for (std::size_t seg = 0; seg < count; ++seg) {
            t = switches[seg] * t;
            for (int i = 0; i < sub; ++i) {
                const double s = i * h;
                const Mat m0 = rhs(seg, s), m1 = rhs(seg, s + 0.5 * h), m2 = rhs(seg, s + h);
                const Mat k1 = m0 * t;
                const Mat k2 = m1 * (t + 0.5 * h * k1);
                const Mat k3 = m1 * (t + 0.5 * h * k2);
                const Mat k4 = m2 * (t + h * k3);
                t += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        return t;
    }
};

}  // namespace

TransportResult parallel_transport(const BundleWithConnection& b, const DiscreteCurve& c,
                                   const TransportOptions& opt)
{
    const auto& m = *b.base;
    const std::size_t n = c.samples.size();
    if (n < 2) throw Rejected("parallel_transport: curve needs at least two samples");
    for (std::size_t j = 0; j < n; ++j)
        if (!m.in_chart(c.samples[j]))
            throw CurveOutsideCharts("parallel_transport: sample " + std::to_string(j) +
                                         " lies outside every chart",
                                     j);

    TransportPlan plan;
    plan.bundle = &b;
    plan.count = c.closed ? n : n - 1;
    const Mat id = b.identity();

    if (c.interpolation == CurveInterpolation::trigonometric) {
        if (!c.closed) throw Rejected("parallel_transport: trigonometric interpolation needs a closed curve");
        std::vector<Complex> xs(n), ys(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (c.samples[j].chart != c.samples[0].chart)
                throw CurveOutsideCharts("parallel_transport: trigonometric curve leaves chart " +
                                             std::to_string(c.samples[0].chart) + " at sample " +
                                             std::to_string(j),
                                         j);
            xs[j] = c.samples[j].x.x();
            ys[j] = c.samples[j].x.y();
        }
        plan.trig = true;
        plan.chart = c.samples[0].chart;
        plan.cx = TrigInterpolant(xs);
        plan.cy = TrigInterpolant(ys);
        plan.switches.assign(plan.count, id);
    } else {
        for (std::size_t j = 0; j < plan.count; ++j) {
            Point a = c.samples[j];
            const Point& e = c.samples[(j + 1) % n];
            Mat sw = id;
            if (a.chart != e.chart) {
                Point moved;
                try {
                    moved = m.to_chart(a, e.chart);
                } catch (const Rejected&) {
                    throw CurveOutsideCharts("parallel_transport: samples " + std::to_string(j) +
                                                 " and " + std::to_string((j + 1) % n) +
                                                 " share no chart",
                                             j);
                }
                if (!m.in_chart(moved))
                    throw CurveOutsideCharts("parallel_transport: sample " + std::to_string(j) +
                                                 " outside chart " + std::to_string(e.chart),
                                             j);
                // s_e = s_a g, so components change by g^{-1}.
                sw = b.transition_at(a, e.chart).inverse();
                a = moved;
            }
            plan.starts.push_back(a);
            plan.ends.push_back(e);
            plan.switches.push_back(sw);
        }
    }

    TransportResult r;
    int sub = 1;
    Mat prev = plan.run(sub);
    Mat cur = prev;
    double err = 0.0;
    for (int d = 0; d < opt.max_doublings; ++d) {
        sub *= 2;
        cur = plan.run(sub);
        err = coeff_norm(Mat(cur - prev));
        prev = cur;
        if (err < opt.tolerance) break;
    }
    r.matrix = unitary_projection(cur);
    r.unitarity_deviation = coeff_norm(Mat(cur - r.matrix));
    r.error_estimate = err;
    r.substeps = sub;
    r.final_chart = c.closed ? c.samples[0].chart : c.samples.back().chart;
    return r;
}

// -------------------------------------------------------------- integration

Complex chern_form(const BundleWithConnection& b, const Point& p)
{
    return kI / (2.0 * kPi) * b.F(p).trace();
}

Complex integrate_two_form(const ChartedManifold& m,
                           const std::function<Complex(const Point&, const Vec2&, const Vec2&)>& beta,
                           const QuadratureGrid& grid)
{
    if (!m.square) throw Rejected("integrate_two_form: " + m.name + " has no global parametrization");
    if (grid.ns < 1 || grid.nt < 1) throw Rejected("integrate_two_form: empty grid");
    Complex acc = 0.0;
    for (int i = 0; i < grid.ns; ++i) {
        const double s = (i + 0.5) / grid.ns;
        Complex row = 0.0;
        for (int j = 0; j < grid.nt; ++j) {
            const double t = (j + 0.5) / grid.nt;
            const auto [p, jac] = m.square(s, t);
            row += beta(p, jac.col(0), jac.col(1));
        }
        acc += row;
    }
    return acc / (double(grid.ns) * double(grid.nt));
}

double integrate_chern(const BundleWithConnection& b, const QuadratureGrid& grid)
{
    const auto beta = [&b](const Point& p, const Vec2& v, const Vec2& w) {
        return kI / (2.0 * kPi) * b.F_on(p, v, w).trace();
    };
    return integrate_two_form(*b.base, beta, grid).real();
}

double skew_hermitian_defect(const BundleWithConnection& b, const Point& p)
{
    const auto a = b.A(p);
    const Mat f = b.F(p);
    return std::max({coeff_norm(Mat(a[0] + a[0].adjoint())), coeff_norm(Mat(a[1] + a[1].adjoint())),
                     coeff_norm(Mat(f + f.adjoint()))});
}

}  // namespace equichern
