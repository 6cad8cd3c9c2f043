#include "krysp/stats.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace krysp {

MatrixStats compute_stats(const SparseMatrix& m) {
    CsrMatrix csr = to_csr(m);
    MatrixStats s;
    s.h = csr.n_rows;
    s.nz = csr.nnz();
    if (s.h > 0) {
        double denom = static_cast<double>(s.h) * static_cast<double>(s.h);
        s.density = static_cast<double>(s.nz) / denom;
        s.density_percent = 100.0 * s.density;
        s.nz_per_h_mean = static_cast<double>(s.nz) / static_cast<double>(s.h);
    }
    double var = 0.0;
    for (index_t r = 0; r < csr.n_rows; ++r) {
        index_t count = csr.row_ptr[r + 1] - csr.row_ptr[r];
        s.max_row = std::max(s.max_row, count);
        double d = static_cast<double>(count) - s.nz_per_h_mean;
        var += d * d;
        for (index_t k = csr.row_ptr[r]; k < csr.row_ptr[r + 1]; ++k) {
            index_t dist = csr.col_idx[k] > r ? csr.col_idx[k] - r : r - csr.col_idx[k];
            s.bandwidth = std::max(s.bandwidth, dist);
        }
    }
    if (s.h > 0) {
        s.nz_per_h_stddev = std::sqrt(var / static_cast<double>(s.h));
    }
    return s;
}

std::string stats_json(const MatrixStats& s, const std::string& matrix_name) {
    nlohmann::json j{
        {"matrix", matrix_name},
        {"h", s.h},
        {"nz", s.nz},
        {"density", s.density},
        {"density_percent", s.density_percent},
        {"max_row", s.max_row},
        {"bandwidth", s.bandwidth},
        {"nz_per_h", s.nz_per_h_mean},
        {"nz_per_h_stddev", s.nz_per_h_stddev},
    };
    return j.dump(2);
}

std::string stats_text(const MatrixStats& s, const std::string& matrix_name) {
    std::ostringstream out;
    out << "matrix            " << matrix_name << '\n'
        << "h                 " << s.h << '\n'
        << "nz                " << s.nz << '\n'
        << "density           " << s.density << '\n'
        << "density (%)       " << s.density_percent << '\n'
        << "max row           " << s.max_row << '\n'
        << "bandwidth         " << s.bandwidth << '\n'
        << "nz/h              " << s.nz_per_h_mean << '\n'
        << "nz/h stddev       " << s.nz_per_h_stddev << '\n';
    return out.str();
}

}  // namespace krysp
