#pragma once

// Periodic-grid helpers: samples f(2 pi j / N), j = 0..N-1.

#include "equichern/algebra.hpp"

#include <vector>

namespace equichern {

/// d/dtheta of the trigonometric interpolant, evaluated on the grid. The
/// Nyquist mode (even N) is dropped.
std::vector<Complex> spectral_derivative(const std::vector<Complex>& samples);
std::vector<double> spectral_derivative(const std::vector<double>& samples);

/// Trigonometric interpolant through equispaced periodic samples, evaluable
/// off-grid. Exact for trigonometric polynomials of degree < N/2.
class TrigInterpolant {
public:
    TrigInterpolant() = default;
    explicit TrigInterpolant(const std::vector<Complex>& samples);

    std::size_t size() const { return n_; }
    Complex value(double theta) const;
    Complex derivative(double theta) const;

private:
    Complex eval(double theta, bool deriv) const;

    std::size_t n_ = 0;
    std::vector<Complex> modes_;  // modes_[k + half] = c_k, k in [-half, half]
    int half_ = 0;
    bool nyquist_ = false;
};

/// Interpolants for every entry of a sampled matrix sequence.
class MatrixInterpolant {
public:
    MatrixInterpolant() = default;
    explicit MatrixInterpolant(const std::vector<Mat>& samples);

    Mat value(double theta) const;
    Mat derivative(double theta) const;

private:
    Eigen::Index rows_ = 0, cols_ = 0;
    std::vector<TrigInterpolant> entries_;
};

std::vector<Mat> spectral_derivative(const std::vector<Mat>& samples);

/// Nearest unitary (polar factor) of a square matrix.
Mat unitary_projection(const Mat& m);

/// max |entry| of m^* m - I.
double unitarity_defect(const Mat& m);

}  // namespace equichern
