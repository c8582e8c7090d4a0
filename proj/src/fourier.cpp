#include "equichern/fourier.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace equichern {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// c_k = (1/N) sum_j f_j e^{-i k theta_j}, k = 0..N-1.
std::vector<Complex> dft(const std::vector<Complex>& f)
{
    const std::size_t n = f.size();
    std::vector<Complex> c(n);
    std::vector<Complex> roots(n);
    for (std::size_t j = 0; j < n; ++j) roots[j] = std::polar(1.0, -kTwoPi * double(j) / double(n));
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += f[j] * roots[(j * k) % n];
        c[k] = acc / double(n);
    }
    return c;
}

}  // namespace

TrigInterpolant::TrigInterpolant(const std::vector<Complex>& samples) : n_(samples.size())
{
    if (n_ == 0) throw Rejected("TrigInterpolant: no samples");
    const auto c = dft(samples);
    half_ = static_cast<int>(n_ / 2);
    nyquist_ = (n_ % 2 == 0);
    modes_.assign(static_cast<std::size_t>(2 * half_ + 1), Complex(0.0));
    for (int k = -half_; k <= half_; ++k) {
        const std::size_t idx = static_cast<std::size_t>((k + static_cast<int>(n_)) % static_cast<int>(n_));
        modes_[static_cast<std::size_t>(k + half_)] = c[idx];
    }
    if (nyquist_) {
        // split the Nyquist coefficient evenly between +N/2 and -N/2
        const Complex cn = c[n_ / 2];
        modes_[0] = 0.5 * cn;
        modes_[static_cast<std::size_t>(2 * half_)] = 0.5 * cn;
    }
}

Complex TrigInterpolant::eval(double theta, bool deriv) const
{
    const Complex step = std::polar(1.0, theta);
    Complex pos = 1.0;  // e^{i k theta}, k >= 0
    Complex acc = 0.0;
    for (int k = 0; k <= half_; ++k) {
        const Complex neg = std::conj(pos);
        const Complex cp = modes_[static_cast<std::size_t>(half_ + k)];
        const Complex cm = modes_[static_cast<std::size_t>(half_ - k)];
        if (k == 0) {
            if (!deriv) acc += cp;
        } else if (deriv) {
            acc += Complex(0.0, double(k)) * (cp * pos - cm * neg);
        } else {
            acc += cp * pos + cm * neg;
        }
        pos *= step;
    }
    return acc;
}

Complex TrigInterpolant::value(double theta) const { return eval(theta, false); }
Complex TrigInterpolant::derivative(double theta) const { return eval(theta, true); }

std::vector<Complex> spectral_derivative(const std::vector<Complex>& samples)
{
    const std::size_t n = samples.size();
    if (n == 0) return {};
    auto c = dft(samples);
    for (std::size_t k = 0; k < n; ++k) {
        long kk = static_cast<long>(k);
        if (2 * k == n) {
            c[k] = 0.0;
            continue;
        }
        if (2 * k > n) kk -= static_cast<long>(n);
        c[k] *= Complex(0.0, double(kk));
    }
    // inverse transform
    std::vector<Complex> out(n, Complex(0.0));
    for (std::size_t j = 0; j < n; ++j) {
        Complex acc = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            acc += c[k] * std::polar(1.0, kTwoPi * double((j * k) % n) / double(n));
        out[j] = acc;
    }
    return out;
}

std::vector<double> spectral_derivative(const std::vector<double>& samples)
{
    std::vector<Complex> z(samples.begin(), samples.end());
    const auto d = spectral_derivative(z);
    std::vector<double> out(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) out[j] = d[j].real();
    return out;
}

MatrixInterpolant::MatrixInterpolant(const std::vector<Mat>& samples)
{
    if (samples.empty()) throw Rejected("MatrixInterpolant: no samples");
    rows_ = samples[0].rows();
    cols_ = samples[0].cols();
    std::vector<Complex> column(samples.size());
    for (Eigen::Index r = 0; r < rows_; ++r)
        for (Eigen::Index c = 0; c < cols_; ++c) {
            for (std::size_t j = 0; j < samples.size(); ++j) column[j] = samples[j](r, c);
            entries_.emplace_back(column);
        }
}

Mat MatrixInterpolant::value(double theta) const
{
    Mat m(rows_, cols_);
    std::size_t e = 0;
    for (Eigen::Index r = 0; r < rows_; ++r)
        for (Eigen::Index c = 0; c < cols_; ++c) m(r, c) = entries_[e++].value(theta);
    return m;
}

Mat MatrixInterpolant::derivative(double theta) const
{
    Mat m(rows_, cols_);
    std::size_t e = 0;
    for (Eigen::Index r = 0; r < rows_; ++r)
        for (Eigen::Index c = 0; c < cols_; ++c) m(r, c) = entries_[e++].derivative(theta);
    return m;
}

std::vector<Mat> spectral_derivative(const std::vector<Mat>& samples)
{
    if (samples.empty()) return {};
    const Eigen::Index rows = samples[0].rows(), cols = samples[0].cols();
    std::vector<Mat> out(samples.size(), Mat::Zero(rows, cols));
    std::vector<Complex> column(samples.size());
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            for (std::size_t j = 0; j < samples.size(); ++j) column[j] = samples[j](r, c);
            const auto d = spectral_derivative(column);
            for (std::size_t j = 0; j < samples.size(); ++j) out[j](r, c) = d[j];
        }
    return out;
}

Mat unitary_projection(const Mat& m)
{
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().adjoint();
}

double unitarity_defect(const Mat& m)
{
    return coeff_norm(Mat(m.adjoint() * m - Mat::Identity(m.cols(), m.cols())));
}

}  // namespace equichern
