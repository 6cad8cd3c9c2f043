#pragma once

// Shared test helpers: reference implementations kept independent of the
// library kernels so they can serve as oracles.

#include <cmath>
#include <random>
#include <vector>

#include "krysp/formats.hpp"

namespace testsupport {

using krysp::CooMatrix;
using krysp::CsrMatrix;
using krysp::DenseMatrix;
using krysp::index_t;
using krysp::Triple;

// Plain row-by-row dense product, sequential summation.
inline std::vector<double> dense_mv(const DenseMatrix& a, const std::vector<double>& x) {
    std::vector<double> y(static_cast<std::size_t>(a.n_rows), 0.0);
    for (index_t r = 0; r < a.n_rows; ++r) {
        double sum = 0.0;
        for (index_t c = 0; c < a.n_cols; ++c) {
            sum += a.at(r, c) * x[c];
        }
        y[r] = sum;
    }
    return y;
}

// Gaussian elimination with partial pivoting; the direct-solve oracle.
inline std::vector<double> direct_solve(DenseMatrix a, std::vector<double> b) {
    index_t n = a.n_rows;
    for (index_t k = 0; k < n; ++k) {
        index_t pivot = k;
        for (index_t i = k + 1; i < n; ++i) {
            if (std::fabs(a.at(i, k)) > std::fabs(a.at(pivot, k))) pivot = i;
        }
        if (pivot != k) {
            for (index_t c = 0; c < n; ++c) std::swap(a.at(k, c), a.at(pivot, c));
            std::swap(b[k], b[pivot]);
        }
        for (index_t i = k + 1; i < n; ++i) {
            double f = a.at(i, k) / a.at(k, k);
            for (index_t c = k; c < n; ++c) a.at(i, c) -= f * a.at(k, c);
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (index_t i = n - 1; i >= 0; --i) {
        double sum = b[i];
        for (index_t c = i + 1; c < n; ++c) sum -= a.at(i, c) * x[c];
        x[i] = sum / a.at(i, i);
    }
    return x;
}

// The worked 5x5 example used across the format golden tests:
//   [ -5 14  0  0  0 ]
//   [  0  8  1  0  0 ]
//   [  2  0 10  0  0 ]
//   [  0  4  0  2  9 ]
//   [  0  0 15  0  7 ]
inline CooMatrix worked_example() {
    std::vector<Triple> t = {
        {0, 0, -5}, {0, 1, 14}, {1, 1, 8}, {1, 2, 1},  {2, 0, 2}, {2, 2, 10},
        {3, 1, 4},  {3, 3, 2},  {3, 4, 9}, {4, 2, 15}, {4, 4, 7},
    };
    return krysp::build_coo(t, 5, 5);
}

inline CooMatrix random_sparse(std::mt19937_64& rng, index_t n_rows, index_t n_cols,
                               double density, double value_scale = 10.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_real_distribution<double> val(-value_scale, value_scale);
    std::vector<Triple> triples;
    for (index_t r = 0; r < n_rows; ++r) {
        for (index_t c = 0; c < n_cols; ++c) {
            if (coin(rng) < density) triples.emplace_back(r, c, val(rng));
        }
    }
    return krysp::build_coo(triples, n_rows, n_cols);
}

// Random symmetric positive definite matrix: strictly diagonally dominant
// symmetric pattern.
inline CsrMatrix random_spd(std::mt19937_64& rng, index_t n, double density) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    DenseMatrix d;
    d.n_rows = d.n_cols = n;
    d.values.assign(static_cast<std::size_t>(n * n), 0.0);
    for (index_t r = 0; r < n; ++r) {
        for (index_t c = r + 1; c < n; ++c) {
            if (coin(rng) < density) {
                double v = val(rng);
                d.at(r, c) = v;
                d.at(c, r) = v;
            }
        }
    }
    for (index_t r = 0; r < n; ++r) {
        double off = 0.0;
        for (index_t c = 0; c < n; ++c) {
            if (c != r) off += std::fabs(d.at(r, c));
        }
        d.at(r, r) = off + 1.0;
    }
    return krysp::dense_to_csr(d);
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n,
                                         double scale = 1.0) {
    std::uniform_real_distribution<double> val(-scale, scale);
    std::vector<double> v(n);
    for (double& x : v) x = val(rng);
    return v;
}

inline double rel_err(double got, double want) {
    return std::fabs(got - want) / (1.0 + std::fabs(want));
}

inline double max_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        worst = std::max(worst, rel_err(got[i], want[i]));
    }
    return worst;
}

// ||b - A x|| / ||b|| with plain sequential arithmetic.
inline double true_relative_residual(const DenseMatrix& a, const std::vector<double>& b,
                                     const std::vector<double>& x) {
    std::vector<double> ax = dense_mv(a, x);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        double d = b[i] - ax[i];
        num += d * d;
        den += b[i] * b[i];
    }
    return std::sqrt(num) / (den > 0.0 ? std::sqrt(den) : 1.0);
}

}  // namespace testsupport
