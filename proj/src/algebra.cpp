#include "equichern/algebra.hpp"

#include <cmath>

namespace equichern {

int subset_sign(SubsetMask s1, SubsetMask s2)
{
    if (s1 & s2) return 0;
    // Each element of s1 must move past every smaller element of s2.
    int inversions = 0;
    for (SubsetMask rest = s1; rest; rest &= rest - 1) {
        const int i = __builtin_ctz(rest);
        inversions += subset_size(s2 & ((SubsetMask{1} << i) - 1));
    }
    return (inversions & 1) ? -1 : 1;
}

GrassmannMatrix::GrassmannMatrix(int generators, int rank) : generators_(generators), rank_(rank)
{
    if (generators < 0 || generators > kMaxGenerators)
        throw Rejected("GrassmannMatrix: generator count " + std::to_string(generators) +
                       " outside [0, 6]");
    if (rank < 1) throw Rejected("GrassmannMatrix: rank must be positive");
    coeffs_.assign(std::size_t{1} << generators, Mat::Zero(rank, rank));
}

GrassmannMatrix GrassmannMatrix::identity(int generators, int rank)
{
    GrassmannMatrix g(generators, rank);
    g.coeffs_[0] = Mat::Identity(rank, rank);
    return g;
}

GrassmannMatrix GrassmannMatrix::scalar(int generators, const Mat& value)
{
    return monomial(generators, 0, value);
}

GrassmannMatrix GrassmannMatrix::monomial(int generators, SubsetMask subset, const Mat& value)
{
    if (value.rows() != value.cols()) throw Rejected("GrassmannMatrix: non-square coefficient");
    GrassmannMatrix g(generators, static_cast<int>(value.rows()));
    g.coeffs_.at(subset) = value;
    return g;
}

namespace {

void check_compatible(const GrassmannMatrix& a, const GrassmannMatrix& b, const char* what)
{
    if (a.generators() != b.generators() || a.rank() != b.rank())
        throw Rejected(std::string(what) + ": dimension mismatch (m=" +
                       std::to_string(a.generators()) + ",n=" + std::to_string(a.rank()) +
                       " vs m=" + std::to_string(b.generators()) +
                       ",n=" + std::to_string(b.rank()) + ")");
}

}  // namespace

GrassmannMatrix& GrassmannMatrix::operator+=(const GrassmannMatrix& o)
{
    if (o.coeffs_.empty()) return *this;
    if (coeffs_.empty()) return *this = o;
    check_compatible(*this, o, "grassmann sum");
    for (std::size_t s = 0; s < coeffs_.size(); ++s) coeffs_[s] += o.coeffs_[s];
    return *this;
}

GrassmannMatrix& GrassmannMatrix::operator-=(const GrassmannMatrix& o)
{
    if (o.coeffs_.empty()) return *this;
    if (coeffs_.empty()) {
        *this = o;
        return *this *= -1.0;
    }
    check_compatible(*this, o, "grassmann difference");
    for (std::size_t s = 0; s < coeffs_.size(); ++s) coeffs_[s] -= o.coeffs_[s];
    return *this;
}

GrassmannMatrix& GrassmannMatrix::operator*=(Complex c)
{
    for (auto& m : coeffs_) m *= c;
    return *this;
}

GrassmannMatrix GrassmannMatrix::degree_part(int d) const
{
    GrassmannMatrix r(generators_, rank_);
    for (SubsetMask s = 0; s < coeffs_.size(); ++s)
        if (subset_size(s) == d) r.coeffs_[s] = coeffs_[s];
    return r;
}

bool GrassmannMatrix::is_even(double tol) const
{
    for (SubsetMask s = 0; s < coeffs_.size(); ++s)
        if ((subset_size(s) & 1) && coeff_norm(coeffs_[s]) > tol) return false;
    return true;
}

double GrassmannMatrix::norm() const
{
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, coeff_norm(c));
    return m;
}

GrassmannMatrix GrassmannMatrix::trace() const
{
    GrassmannMatrix r(generators_, 1);
    for (std::size_t s = 0; s < coeffs_.size(); ++s) r.coeffs_[s](0, 0) = coeffs_[s].trace();
    return r;
}

GrassmannMatrix GrassmannMatrix::sandwiched(const Mat& left, const Mat& right) const
{
    GrassmannMatrix r(generators_, static_cast<int>(left.rows()));
    for (std::size_t s = 0; s < coeffs_.size(); ++s) r.coeffs_[s] = left * coeffs_[s] * right;
    return r;
}

GrassmannMatrix grassmann_product(const GrassmannMatrix& a, const GrassmannMatrix& b)
{
    check_compatible(a, b, "grassmann_product");
    GrassmannMatrix r(a.generators(), a.rank());
    const SubsetMask full = (SubsetMask{1} << a.generators()) - 1;
    for (SubsetMask s1 = 0; s1 <= full; ++s1) {
        if (coeff_norm(a[s1]) == 0.0) continue;
        const SubsetMask free = full & ~s1;
        // Enumerate all subsets s2 of the complement, including the empty one.
        for (SubsetMask s2 = free;; s2 = (s2 - 1) & free) {
            if (coeff_norm(b[s2]) != 0.0) {
                const int sign = subset_sign(s1, s2);
                r[s1 | s2].noalias() += static_cast<double>(sign) * (a[s1] * b[s2]);
            }
            if (s2 == 0) break;
        }
    }
    return r;
}

namespace {

GrassmannMatrix taylor_exp(const GrassmannMatrix& a, bool terminates)
{
    GrassmannMatrix sum = GrassmannMatrix::identity(a.generators(), a.rank());
    GrassmannMatrix term = sum;
    for (int k = 1; k < 64; ++k) {
        term = grassmann_product(term, a);
        term *= 1.0 / k;
        if (term.is_zero()) break;
        sum += term;
        if (!terminates && term.norm() < 1e-18 * sum.norm()) break;
    }
    return sum;
}

}  // namespace

GrassmannMatrix grassmann_exp(const GrassmannMatrix& a)
{
    if (!a.is_even()) throw Rejected("grassmann_exp: odd-degree component present");
    const double n0 = coeff_norm(a[0]);
    if (n0 == 0.0) return taylor_exp(a, true);

    int squarings = 0;
    if (n0 > 0.25) squarings = static_cast<int>(std::ceil(std::log2(n0 / 0.25)));
    GrassmannMatrix scaled = a;
    scaled *= std::ldexp(1.0, -squarings);
    GrassmannMatrix r = taylor_exp(scaled, false);
    for (int i = 0; i < squarings; ++i) r = grassmann_product(r, r);
    return r;
}

UGrassmann exp_nilpotent(const UGrassmann& e, int max_terms)
{
    const GrassmannMatrix& proto = e.zero();
    if (e.min_deg() < 0)
        for (int k = e.min_deg(); k < 0; ++k)
            if (coeff_norm(e.at(k)) != 0.0)
                throw Rejected("exp_nilpotent: negative u-powers are not nilpotent");
    if (coeff_norm(e.at(0)[0]) != 0.0)
        throw Rejected("exp_nilpotent: u^0 xi-free part must vanish");

    UGrassmann one(e.min_deg(), e.max_deg(), proto);
    one[0] = GrassmannMatrix::identity(proto.generators(), proto.rank());
    UGrassmann sum = one;
    UGrassmann term = one;
    for (int k = 1; k <= max_terms; ++k) {
        term = term * e;
        term *= 1.0 / k;
        if (term.norm() == 0.0) return sum;
        sum += term;
    }
    throw Rejected("exp_nilpotent: series did not terminate");
}

UGrassmann trace(const UGrassmann& e)
{
    const GrassmannMatrix& proto = e.zero();
    UGrassmann r(e.min_deg(), e.max_deg(), GrassmannMatrix(proto.generators(), 1));
    for (int k = e.min_deg(); k <= e.max_deg(); ++k) r[k] = e.at(k).trace();
    if (e.truncated()) r.mark_truncated();
    return r;
}

UGrassmann lift_to_u(const GrassmannMatrix& g, int lo, int hi)
{
    UGrassmann r(lo, hi, GrassmannMatrix(g.generators(), g.rank()));
    r[0] = g;
    return r;
}

}  // namespace equichern
