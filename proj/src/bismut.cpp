#include "equichern/bismut.hpp"

#include "equichern/fourier.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

namespace equichern {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Off-grid access to the loop data that drives the equation.
class Driver {
public:
    Driver(const BundleWithConnection& b, const FrameLoop& f, const std::vector<LoopTangentField>& fields,
           BismutVariant variant, bool drop_curvature)
        : b_(b), variant_(variant), drop_curvature_(drop_curvature), m_(static_cast<int>(fields.size()))
    {
        chart_ = f.loop.chart();
        if (chart_ < 0) throw Rejected("solve_H: the frame loop must lie in a single chart");
        const std::size_t n = f.loop.size();
        std::vector<Complex> xs(n), ys(n);
        for (std::size_t j = 0; j < n; ++j) {
            xs[j] = f.loop.points[j].x.x();
            ys[j] = f.loop.points[j].x.y();
        }
        x_ = TrigInterpolant(xs);
        y_ = TrigInterpolant(ys);
        frame_ = MatrixInterpolant(f.frame.values);
        for (const auto& field : fields) {
            for (std::size_t j = 0; j < n; ++j) {
                xs[j] = field[j].x();
                ys[j] = field[j].y();
            }
            fx_.emplace_back(xs);
            fy_.emplace_back(ys);
        }
        hi_ = variant == BismutVariant::plain ? 0 : bismut_u_degree(m_);
    }

    int hi() const { return hi_; }

    UGrassmann operator()(double t) const
    {
        const double theta = kTwoPi * t;
        const Point p{chart_, Vec2(x_.value(theta).real(), y_.value(theta).real())};
        const Vec2 v(x_.derivative(theta).real(), y_.derivative(theta).real());
        const Mat g = frame_.value(theta);
        const Mat gi = g.inverse();
        const Mat w = gi * b_.A_on(p, v) * g + gi * frame_.derivative(theta);

        GrassmannMatrix omega(m_, b_.rank);
        if (!drop_curvature_) {
            std::vector<Vec2> y(static_cast<std::size_t>(m_));
            for (int a = 0; a < m_; ++a)
                y[static_cast<std::size_t>(a)] = Vec2(fx_[static_cast<std::size_t>(a)].value(theta).real(),
                                                      fy_[static_cast<std::size_t>(a)].value(theta).real());
            const Mat f = b_.F(p);
            for (int a = 0; a < m_; ++a)
                for (int c = a + 1; c < m_; ++c) {
                    const Vec2 &ya = y[static_cast<std::size_t>(a)], &yc = y[static_cast<std::size_t>(c)];
                    const double area = ya.x() * yc.y() - ya.y() * yc.x();
                    omega[(SubsetMask{1} << a) | (SubsetMask{1} << c)] = gi * f * g * area;
                }
        }
        UGrassmann d(0, hi_, GrassmannMatrix(m_, b_.rank));
        if (variant_ == BismutVariant::plain) {
            d[0] = omega + GrassmannMatrix::scalar(m_, Mat(kTwoPi * w));
        } else {
            d[0] = omega;
            d[1] = GrassmannMatrix::scalar(m_, Mat(-w));
        }
        return d;
    }

private:
    const BundleWithConnection& b_;
    BismutVariant variant_;
    bool drop_curvature_;
    int m_;
    int chart_ = 0;
    int hi_ = 0;
    TrigInterpolant x_, y_;
    MatrixInterpolant frame_;
    std::vector<TrigInterpolant> fx_, fy_;
};

// Solution at t_j = j / samples with `steps` RK4 steps (a multiple of samples).
std::vector<UGrassmann> integrate(const Driver& d, const UGrassmann& id, std::size_t samples, std::size_t steps,
                                  bool& truncated)
{
    const std::size_t per = steps / samples;
    const double h = 1.0 / double(steps);
    std::vector<UGrassmann> out{id};
    UGrassmann H = id;
    UGrassmann d0 = d(0.0);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = double(i) * h;
        const UGrassmann dm = d(t + 0.5 * h);
        const UGrassmann d1 = d(t + h);
        const UGrassmann k1 = H * d0;
        const UGrassmann k2 = (H + Complex(0.5 * h) * k1) * dm;
        const UGrassmann k3 = (H + Complex(0.5 * h) * k2) * dm;
        const UGrassmann k4 = (H + Complex(h) * k3) * d1;
        H += Complex(h / 6.0) * (k1 + Complex(2.0) * k2 + Complex(2.0) * k3 + k4);
        d0 = d1;
        if ((i + 1) % per == 0) out.push_back(H);
    }
    for (const auto& x : out) truncated = truncated || x.truncated();
    return out;
}

double max_difference(const std::vector<UGrassmann>& a, const std::vector<UGrassmann>& b)
{
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, (a[j] - b[j]).norm());
    return m;
}

Complex xi_coefficient(const UGrassmann& e, int power, SubsetMask mask)
{
    return e.at(power)[mask].trace();
}

}  // namespace

PathOrderedSolution solve_H(const BundleWithConnection& b, const FrameLoop& f,
                            const std::vector<LoopTangentField>& fields, BismutVariant variant,
                            const BismutOptions& opt)
{
    const int m = static_cast<int>(fields.size());
    if (m % 2 != 0 || m > 4) throw Rejected("solve_H: the number of fields must be even and at most 4");
    const std::size_t n = f.loop.size();
    if (f.frame.size() != n) throw Rejected("solve_H: frame and loop sample counts differ");
    for (const auto& y : fields)
        if (y.size() != n) throw Rejected("solve_H: field sample count differs from the loop");
    const double rot = max_step_rotation(f.frame);
    if (rot >= 0.5) throw Rejected("solve_H: frame rotates by " + std::to_string(rot) + " rad in one step");
    const Driver d(b, f, fields, variant, opt.drop_curvature);
    std::size_t start = opt.initial_steps;
    if (start == 0) {
        // one step per sample, doubled until h * |driver| <= 0.1
        double size = 0.0;
        for (std::size_t j = 0; j < n; ++j) size = std::max(size, d(double(j) / double(n)).norm());
        start = n;
        while (size / double(start) > 0.1) start *= 2;
    }
    if (start % n != 0) throw Rejected("solve_H: the initial step count must be a multiple of N");

    const UGrassmann id = lift_to_u(GrassmannMatrix::identity(m, b.rank), 0, d.hi());
    UGrassmann one = id;

    PathOrderedSolution s;
    s.variant = variant;
    s.generators = m;
    s.rank = b.rank;
    s.fields = fields;
    for (std::size_t j = 0; j <= n; ++j) s.t.push_back(double(j) / double(n));

    bool truncated = false;
    std::size_t steps = start;
    auto coarse = integrate(d, one, n, steps, truncated);
    double diff = 0.0;
    for (int level = 1; level <= opt.max_halvings; ++level) {
        steps *= 2;
        auto fine = integrate(d, one, n, steps, truncated);
        diff = max_difference(coarse, fine);
        if (diff < opt.tolerance) {
            s.H = std::move(fine);
            s.steps = steps;
            s.halvings = level;
            s.error_estimate = diff / 15.0;
            s.truncated = truncated;
            return s;
        }
        coarse = std::move(fine);
    }
    throw Rejected("solve_H: no convergence after " + std::to_string(opt.max_halvings) +
                   " step halvings (last difference " + std::to_string(diff) + ")");
}

GaugeLawReport verify_gauge_law(const BundleWithConnection& b, const FrameLoop& f, const LoopGauge& a,
                                const std::vector<LoopTangentField>& fields, const BismutOptions& opt)
{
    const FrameLoop fa = right_act(f, a);
    const auto h = solve_H(b, f, fields, BismutVariant::plain, opt);
    const auto ha = solve_H(b, fa, fields, BismutVariant::plain, opt);
    const std::size_t n = f.loop.size();

    GaugeLawReport r;
    const Mat a0i = a.values[0].inverse();
    for (std::size_t j = 0; j <= n; ++j) {
        const Mat& aj = a.values[j % n];
        const GrassmannMatrix expected = h.plain(j).sandwiched(a0i, aj);
        r.law_defect = std::max(r.law_defect, (ha.plain(j) - expected).norm());
    }
    const auto w = frame_connection_pairing(b, f);
    const auto wa = frame_connection_pairing(b, fa);
    const auto mc = maurer_cartan(a);
    for (std::size_t j = 0; j < n; ++j) {
        const Mat& aj = a.values[j];
        const Mat expected = aj.inverse() * w[j] * aj + mc[j];
        r.ingredient_defect = std::max(r.ingredient_defect, coeff_norm(Mat(wa[j] - expected)));
    }
    r.trace_defect = (ha.plain(n).trace() - h.plain(n).trace()).norm();
    return r;
}

Degree2Report degree2_identity(const BundleWithConnection& b, const FrameLoop& f, const LoopTangentField& Y,
                               const LoopTangentField& Z, const BismutOptions& opt)
{
    const auto s = solve_H(b, f, {Y, Z}, BismutVariant::u, opt);
    Degree2Report r;
    r.bismut[0] = xi_coefficient(s.final(), 0, 0b11);
    r.bismut[1] = xi_coefficient(s.final(), 1, 0);
    r.loops = equivariant_two_form(b, f, Y, Z);
    r.defect = std::max(std::abs(r.bismut.at(0) - r.loops.at(0)), std::abs(r.bismut.at(1) - r.loops.at(1)));
    return r;
}

RestrictionReport bch_restriction_check(const BundleWithConnection& b, const Point& p, const Vec2& Y,
                                        const Vec2& Z, std::size_t n)
{
    const auto trace_at = [&](const Point& q) {
        const auto loop = DiscreteLoop::constant(n, q);
        const std::vector<LoopTangentField> fields{LoopTangentField(n, Y), LoopTangentField(n, Z)};
        return solve_H(b, FrameLoop::canonical(loop, b.rank), fields, BismutVariant::plain).final().at(0).trace();
    };
    const GrassmannMatrix tr = trace_at(p);
    const Mat f = b.F_on(p, Y, Z);
    const GrassmannMatrix expected = grassmann_exp(GrassmannMatrix::monomial(2, 0b11, f)).trace();

    RestrictionReport r;
    r.character_defect = (tr - expected).norm();
    r.degree2_defect = std::abs(tr[0b11](0, 0) - f.trace());
    r.rank_defect = std::abs(tr[0](0, 0) - double(b.rank));
    const double h = 1e-4;
    for (const Vec2& e : {Vec2(h, 0.0), Vec2(0.0, h)}) {
        const Complex plus = trace_at({p.chart, p.x + e})[0](0, 0);
        const Complex minus = trace_at({p.chart, p.x - e})[0](0, 0);
        r.closedness_residual = std::max(r.closedness_residual, std::abs(plus - minus) / (2.0 * h));
    }
    return r;
}

void write_table(std::ostream& out, const PathOrderedSolution& s)
{
    out << "# t u_power mask then re/im of each entry, row-major\n" << std::setprecision(17);
    for (std::size_t j = 0; j < s.H.size(); ++j)
        for (int k = s.H[j].min_deg(); k <= s.H[j].max_deg(); ++k) {
            const GrassmannMatrix& g = s.H[j].at(k);
            for (SubsetMask mask = 0; mask < (SubsetMask{1} << g.generators()); ++mask) {
                out << s.t[j] << ' ' << k << ' ' << mask;
                const Mat& c = g[mask];
                for (Eigen::Index r = 0; r < c.rows(); ++r)
                    for (Eigen::Index q = 0; q < c.cols(); ++q) out << ' ' << c(r, q).real() << ' ' << c(r, q).imag();
                out << '\n';
            }
        }
}

}  // namespace equichern
