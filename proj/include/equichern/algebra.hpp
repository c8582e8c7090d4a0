#pragma once

// Truncated exterior algebra with matrix coefficients, and truncated Laurent
// polynomials in the equivariant parameter u.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace equichern {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Raised when an operation's precondition does not hold (dimension mismatch,
/// undersampled input, out-of-domain point, ...).
class Rejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using SubsetMask = std::uint32_t;

inline int subset_size(SubsetMask s) { return __builtin_popcount(s); }

/// Sign of the permutation sorting the concatenation of the increasing
/// sequences s1 and s2; zero when they overlap.
int subset_sign(SubsetMask s1, SubsetMask s2);

/// Element of Mat_n(C) (x) Lambda(xi_1..xi_m), stored densely: one n x n
/// coefficient per subset of generators, indexed by bitmask (bit i <-> xi_{i+1}).
class GrassmannMatrix {
public:
    static constexpr int kMaxGenerators = 6;

    GrassmannMatrix() = default;
    GrassmannMatrix(int generators, int rank);

    static GrassmannMatrix identity(int generators, int rank);
    static GrassmannMatrix scalar(int generators, const Mat& value);
    /// value * xi_S for the subset S.
    static GrassmannMatrix monomial(int generators, SubsetMask subset, const Mat& value);

    int generators() const { return generators_; }
    int rank() const { return rank_; }
    std::size_t size() const { return coeffs_.size(); }

    Mat& operator[](SubsetMask s) { return coeffs_.at(s); }
    const Mat& operator[](SubsetMask s) const { return coeffs_.at(s); }

    GrassmannMatrix& operator+=(const GrassmannMatrix& o);
    GrassmannMatrix& operator-=(const GrassmannMatrix& o);
    GrassmannMatrix& operator*=(Complex c);

    /// Part of Grassmann degree exactly d.
    GrassmannMatrix degree_part(int d) const;
    /// True when every odd-degree coefficient vanishes (max-abs <= tol).
    bool is_even(double tol = 0.0) const;
    bool is_zero() const { return norm() == 0.0; }
    /// Max-abs over all coefficient entries.
    double norm() const;

    /// Fibrewise matrix trace; result has rank 1.
    GrassmannMatrix trace() const;
    /// Trace of the coefficient of xi_S.
    Complex trace_coeff(SubsetMask s) const { return coeffs_.at(s).trace(); }

    /// left * X * right coefficientwise (left, right are degree-0 matrices).
    GrassmannMatrix sandwiched(const Mat& left, const Mat& right) const;

private:
    int generators_ = 0;
    int rank_ = 0;
    std::vector<Mat> coeffs_;
};

GrassmannMatrix grassmann_product(const GrassmannMatrix& a, const GrassmannMatrix& b);

inline GrassmannMatrix operator*(const GrassmannMatrix& a, const GrassmannMatrix& b)
{
    return grassmann_product(a, b);
}
inline GrassmannMatrix operator+(GrassmannMatrix a, const GrassmannMatrix& b) { return a += b; }
inline GrassmannMatrix operator-(GrassmannMatrix a, const GrassmannMatrix& b) { return a -= b; }
inline GrassmannMatrix operator*(Complex c, GrassmannMatrix a) { return a *= c; }

/// Exponential of an even element. A vanishing degree-0 part makes the series
/// terminate (exact); otherwise scaling-and-squaring of the Taylor series is used.
GrassmannMatrix grassmann_exp(const GrassmannMatrix& a);

inline double coeff_norm(const Complex& c) { return std::abs(c); }
inline double coeff_norm(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }
inline double coeff_norm(const GrassmannMatrix& g) { return g.norm(); }

/// Truncated Laurent polynomial sum_{k=min..max} u^k c_k. Products that would
/// land outside the bounds are dropped and recorded in truncated().
template <class T>
class ULaurent {
public:
    static constexpr int kDefaultMin = -4;
    static constexpr int kDefaultMax = 4;

    ULaurent() : ULaurent(kDefaultMin, kDefaultMax, T{}) {}
    ULaurent(int min_deg, int max_deg, T zero)
        : min_deg_(min_deg), max_deg_(max_deg), zero_(std::move(zero))
    {
        if (max_deg < min_deg) throw Rejected("ULaurent: empty degree range");
        coeffs_.assign(static_cast<std::size_t>(max_deg - min_deg + 1), zero_);
    }

    /// c * u^0 within the given bounds.
    static ULaurent constant(T c, T zero, int min_deg = kDefaultMin, int max_deg = kDefaultMax)
    {
        ULaurent r(min_deg, max_deg, std::move(zero));
        r[0] = std::move(c);
        return r;
    }

    int min_deg() const { return min_deg_; }
    int max_deg() const { return max_deg_; }
    bool truncated() const { return truncated_; }
    void mark_truncated() { truncated_ = true; }
    const T& zero() const { return zero_; }

    T& operator[](int power)
    {
        if (power < min_deg_ || power > max_deg_)
            throw Rejected("ULaurent: power " + std::to_string(power) + " outside bounds");
        return coeffs_[static_cast<std::size_t>(power - min_deg_)];
    }
    /// Coefficient of u^power; zero outside the stored range.
    const T& at(int power) const
    {
        if (power < min_deg_ || power > max_deg_) return zero_;
        return coeffs_[static_cast<std::size_t>(power - min_deg_)];
    }

    ULaurent& operator+=(const ULaurent& o) { return accumulate(o, 1.0); }
    ULaurent& operator-=(const ULaurent& o) { return accumulate(o, -1.0); }
    ULaurent& operator*=(Complex c)
    {
        for (auto& x : coeffs_) x = c * x;
        return *this;
    }

    friend ULaurent operator+(ULaurent a, const ULaurent& b) { return a += b; }
    friend ULaurent operator-(ULaurent a, const ULaurent& b) { return a -= b; }
    friend ULaurent operator*(Complex c, ULaurent a) { return a *= c; }

    friend ULaurent operator*(const ULaurent& a, const ULaurent& b)
    {
        ULaurent r(std::min(a.min_deg_, b.min_deg_), std::max(a.max_deg_, b.max_deg_), a.zero_);
        r.truncated_ = a.truncated_ || b.truncated_;
        for (int i = a.min_deg_; i <= a.max_deg_; ++i) {
            const T& x = a.at(i);
            if (coeff_norm(x) == 0.0) continue;
            for (int j = b.min_deg_; j <= b.max_deg_; ++j) {
                const T& y = b.at(j);
                if (coeff_norm(y) == 0.0) continue;
                T p = x * y;
                if (i + j < r.min_deg_ || i + j > r.max_deg_) {
                    if (coeff_norm(p) != 0.0) r.truncated_ = true;
                    continue;
                }
                r[i + j] = r.at(i + j) + p;
            }
        }
        return r;
    }

    /// Coefficients agree on the union of ranges (missing ones count as zero).
    friend bool operator==(const ULaurent& a, const ULaurent& b)
    {
        const int lo = std::min(a.min_deg_, b.min_deg_), hi = std::max(a.max_deg_, b.max_deg_);
        for (int k = lo; k <= hi; ++k)
            if (coeff_norm(a.at(k) - b.at(k)) != 0.0) return false;
        return true;
    }

    /// Max over powers of coeff_norm.
    double norm() const
    {
        double m = 0.0;
        for (const auto& x : coeffs_) m = std::max(m, coeff_norm(x));
        return m;
    }

    /// Lowest/highest power carrying a nonzero coefficient; min_deg()/max_deg()
    /// when everything vanishes.
    int lowest_nonzero() const
    {
        for (int k = min_deg_; k <= max_deg_; ++k)
            if (coeff_norm(at(k)) != 0.0) return k;
        return min_deg_;
    }
    int highest_nonzero() const
    {
        for (int k = max_deg_; k >= min_deg_; --k)
            if (coeff_norm(at(k)) != 0.0) return k;
        return max_deg_;
    }

private:
    ULaurent& accumulate(const ULaurent& o, double sign)
    {
        const int lo = std::min(min_deg_, o.min_deg_), hi = std::max(max_deg_, o.max_deg_);
        if (lo < min_deg_ || hi > max_deg_) {
            ULaurent grown(lo, hi, zero_);
            for (int k = min_deg_; k <= max_deg_; ++k) grown[k] = at(k);
            grown.truncated_ = truncated_;
            *this = std::move(grown);
        }
        for (int k = o.min_deg_; k <= o.max_deg_; ++k) (*this)[k] = at(k) + Complex(sign) * o.at(k);
        truncated_ = truncated_ || o.truncated_;
        return *this;
    }

    int min_deg_;
    int max_deg_;
    T zero_;
    std::vector<T> coeffs_;
    bool truncated_ = false;
};

using UScalar = ULaurent<Complex>;
using UGrassmann = ULaurent<GrassmannMatrix>;

/// sum_k s^k c_k.
template <class T>
T u_substitute(const ULaurent<T>& f, Complex s)
{
    T acc = f.zero();
    for (int k = f.min_deg(); k <= f.max_deg(); ++k) {
        const T& c = f.at(k);
        if (coeff_norm(c) == 0.0) continue;
        if (k < 0 && s == Complex(0.0))
            throw Rejected("u_substitute: negative power with s = 0");
        acc = acc + std::pow(s, k) * c;
    }
    return acc;
}

/// Multiplication by u. Coefficients pushed past max_deg() are dropped and
/// flagged.
template <class T>
ULaurent<T> periodicity_shift(const ULaurent<T>& f)
{
    ULaurent<T> r(f.min_deg(), f.max_deg(), f.zero());
    if (f.truncated()) r.mark_truncated();
    for (int k = f.min_deg(); k <= f.max_deg(); ++k) {
        if (k + 1 > f.max_deg()) {
            if (coeff_norm(f.at(k)) != 0.0) r.mark_truncated();
            continue;
        }
        r[k + 1] = f.at(k);
    }
    return r;
}

/// Multiplication by u^{-1}.
template <class T>
ULaurent<T> periodicity_unshift(const ULaurent<T>& f)
{
    ULaurent<T> r(f.min_deg(), f.max_deg(), f.zero());
    if (f.truncated()) r.mark_truncated();
    for (int k = f.min_deg(); k <= f.max_deg(); ++k) {
        if (k - 1 < f.min_deg()) {
            if (coeff_norm(f.at(k)) != 0.0) r.mark_truncated();
            continue;
        }
        r[k - 1] = f.at(k);
    }
    return r;
}

/// Homogeneous pieces keyed by form degree.
template <class T>
using GradedSum = std::map<int, T>;

/// Projection of a homogeneous element of total degree `total_degree` to its
/// form sum (u set to 1): the u^j coefficient becomes the piece of form degree
/// total_degree - 2j. Vanishing coefficients are omitted.
template <class T>
GradedSum<T> q_map(const ULaurent<T>& f, int total_degree)
{
    GradedSum<T> g;
    for (int j = f.min_deg(); j <= f.max_deg(); ++j) {
        const T& c = f.at(j);
        if (coeff_norm(c) == 0.0) continue;
        const int form_deg = total_degree - 2 * j;
        if (form_deg < 0)
            throw Rejected("q_map: u^" + std::to_string(j) + " would carry negative form degree");
        g.emplace(form_deg, c);
    }
    return g;
}

/// Inverse of q_map: omega_{2n} -> u^{k-n} omega_{2n} (total degree 2k), or
/// omega_{2n+1} -> u^{k-n} omega_{2n+1} (total degree 2k+1).
template <class T>
ULaurent<T> r_map(const GradedSum<T>& g, int k, T zero)
{
    if (g.empty()) return ULaurent<T>(ULaurent<T>::kDefaultMin, ULaurent<T>::kDefaultMax, zero);
    const int parity = g.begin()->first % 2;
    int lo = ULaurent<T>::kDefaultMin, hi = ULaurent<T>::kDefaultMax;
    for (const auto& [deg, piece] : g) {
        if (deg < 0) throw Rejected("r_map: negative form degree");
        if (deg % 2 != parity) throw Rejected("r_map: mixed-parity input");
        const int p = k - deg / 2;
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    ULaurent<T> f(lo, hi, zero);
    for (const auto& [deg, piece] : g) f[k - deg / 2] = piece;
    return f;
}

/// Nilpotent exponential in u-truncated Grassmann-matrix algebra: sum_k E^k/k!
/// until the powers vanish. Requires E to have no u^0 xi-free part.
UGrassmann exp_nilpotent(const UGrassmann& e, int max_terms = 64);

/// Fibrewise trace of every coefficient.
UGrassmann trace(const UGrassmann& e);

/// A UGrassmann holding `g` at u^0 with bounds [lo, hi].
UGrassmann lift_to_u(const GrassmannMatrix& g, int lo, int hi);

}  // namespace equichern
