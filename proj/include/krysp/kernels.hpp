#pragma once

#include <span>
#include <vector>

#include "krysp/exec.hpp"
#include "krysp/formats.hpp"

namespace krysp {

// Vector kernels. All of them partition work into contiguous chunks of
// policy.block_size elements; summation orders depend only on the policy, so
// repeated runs are bit-identical for a fixed policy.

/// y[i] = alpha * x[i] + y[i]
void daxpy(double alpha, std::span<const double> x, std::span<double> y,
           const ExecPolicy& policy);

/// a[i] = a[i] * b[i]
void scal_elementwise(std::span<double> a, std::span<const double> b, const ExecPolicy& policy);

/// Two-phase reduction: per-chunk partial sums, then a strict left-to-right
/// fold of the partials.
double dot(std::span<const double> x, std::span<const double> y, const ExecPolicy& policy);

double norm2(std::span<const double> x, const ExecPolicy& policy);

// Plumbing used by the solvers; same chunking discipline as daxpy.
void copy_vec(std::span<const double> src, std::span<double> dst, const ExecPolicy& policy);
void scale_vec(double alpha, std::span<double> x, const ExecPolicy& policy);
/// y = a*x + b*y
void axpby(double a, std::span<const double> x, double b, std::span<double> y,
           const ExecPolicy& policy);
void fill_vec(double value, std::span<double> x, const ExecPolicy& policy);

// SpMV. CSR rows are handled by groups of workers_per_row lanes: lane l sums
// entries l, l+tw, l+2tw, ... of its row and the lane partials collapse in a
// binary tree. ELL walks the slab column-major with one lane per row; HYB
// adds the COO overflow on top.

void spmv_into(const CooMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy);
void spmv_into(const CsrMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy);
void spmv_into(const EllMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy);
void spmv_into(const HybMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy);
void spmv_into(const SparseMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy);

std::vector<double> spmv(const SparseMatrix& m, std::span<const double> x,
                         const ExecPolicy& policy);

}  // namespace krysp
