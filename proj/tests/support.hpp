#pragma once

#include "equichern/algebra.hpp"

#include <random>

namespace testsupport {

using equichern::Complex;
using equichern::GrassmannMatrix;
using equichern::Mat;

inline Mat random_matrix(std::mt19937_64& rng, int n)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = Complex(u(rng), u(rng));
    return m;
}

inline Mat random_skew(std::mt19937_64& rng, int n)
{
    const Mat m = random_matrix(rng, n);
    return 0.5 * (m - m.adjoint());
}

inline GrassmannMatrix random_grassmann(std::mt19937_64& rng, int m, int n, bool even_only = false)
{
    GrassmannMatrix g(m, n);
    for (equichern::SubsetMask s = 0; s < g.size(); ++s)
        if (!even_only || equichern::subset_size(s) % 2 == 0) g[s] = random_matrix(rng, n);
    return g;
}

}  // namespace testsupport
