#pragma once

#include <string>

#include "krysp/formats.hpp"

namespace krysp {

/// Five-point Laplacian on an n x n grid (n^2 equations, 4 on the diagonal,
/// -1 to the grid neighbors). Symmetric positive definite.
CooMatrix poisson2d(index_t n);

/// Tridiagonal second-difference matrix of size n (2 on the diagonal, -1 off).
CooMatrix laplace1d(index_t n);

/// Upwind convection-diffusion on an n x n grid with mesh Peclet number pe;
/// nonsymmetric for pe > 0.
CooMatrix convdiff2d(index_t n, double peclet = 0.5);

/// Writes one of the generators ("poisson2d", "laplace1d", "convdiff2d") as a
/// Matrix Market file.
void generate_test_matrix(const std::string& kind, index_t n, const std::string& out_path);

}  // namespace krysp
