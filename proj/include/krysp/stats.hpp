#pragma once

#include <string>

#include "krysp/formats.hpp"

namespace krysp {

/// Shape metrics of a sparse matrix: dimension, nonzero count, density as a
/// raw ratio and as a percentage, densest-row count, bandwidth, and the
/// mean/stddev of the per-row nonzero counts.
struct MatrixStats {
    index_t h = 0;
    index_t nz = 0;
    double density = 0.0;          // nz / h^2
    double density_percent = 0.0;  // 100 * nz / h^2
    index_t max_row = 0;
    index_t bandwidth = 0;  // max |col - row|
    double nz_per_h_mean = 0.0;
    double nz_per_h_stddev = 0.0;  // population stddev of row counts
};

MatrixStats compute_stats(const SparseMatrix& m);

std::string stats_json(const MatrixStats& s, const std::string& matrix_name);
std::string stats_text(const MatrixStats& s, const std::string& matrix_name);

}  // namespace krysp
