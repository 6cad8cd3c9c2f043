#include "krysp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace krysp {

namespace {

void check_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": lengths " + std::to_string(a) + " vs " +
                                std::to_string(b));
    }
}

void check_spmv_dims(index_t m_rows, index_t m_cols, std::size_t x_len, std::size_t y_len) {
    if (static_cast<std::size_t>(m_cols) != x_len) {
        throw DimensionMismatch("spmv: matrix has " + std::to_string(m_cols) + " cols, x has " +
                                std::to_string(x_len));
    }
    if (static_cast<std::size_t>(m_rows) != y_len) {
        throw DimensionMismatch("spmv: matrix has " + std::to_string(m_rows) + " rows, y has " +
                                std::to_string(y_len));
    }
}

// Runs chunk(c) for c in [0, n_chunks) on the pool.
template <typename Fn>
void for_each_chunk(index_t n_chunks, const ExecPolicy& policy, Fn&& chunk) {
    if (policy.block_size < 1) {
        throw Error("block_size must be positive");
    }
    std::function<void(index_t)> task = chunk;
    WorkerPool::instance().run(n_chunks, policy.effective_workers(), task);
}

}  // namespace

void daxpy(double alpha, std::span<const double> x, std::span<double> y,
           const ExecPolicy& policy) {
    check_same_length(x.size(), y.size(), "daxpy");
    index_t n = static_cast<index_t>(x.size());
    index_t bs = policy.block_size;
    for_each_chunk(grid_vector_blocks(n, policy), policy, [&](index_t c) {
        index_t end = std::min(n, (c + 1) * bs);
        for (index_t i = c * bs; i < end; ++i) {
            y[i] = alpha * x[i] + y[i];
        }
    });
}

void scal_elementwise(std::span<double> a, std::span<const double> b, const ExecPolicy& policy) {
    check_same_length(a.size(), b.size(), "scal_elementwise");
    index_t n = static_cast<index_t>(a.size());
    index_t bs = policy.block_size;
    for_each_chunk(grid_vector_blocks(n, policy), policy, [&](index_t c) {
        index_t end = std::min(n, (c + 1) * bs);
        for (index_t i = c * bs; i < end; ++i) {
            a[i] = a[i] * b[i];
        }
    });
}

double dot(std::span<const double> x, std::span<const double> y, const ExecPolicy& policy) {
    check_same_length(x.size(), y.size(), "dot");
    index_t n = static_cast<index_t>(x.size());
    index_t bs = policy.block_size;
    index_t n_chunks = grid_vector_blocks(n, policy);
    std::vector<double> partials(static_cast<std::size_t>(n_chunks), 0.0);
    for_each_chunk(n_chunks, policy, [&](index_t c) {
        index_t end = std::min(n, (c + 1) * bs);
        double sum = 0.0;
        for (index_t i = c * bs; i < end; ++i) {
            sum += x[i] * y[i];
        }
        partials[c] = sum;
    });
    // strict left-to-right; never pairwise
    double total = 0.0;
    for (double p : partials) total += p;
    return total;
}

double norm2(std::span<const double> x, const ExecPolicy& policy) {
    return std::sqrt(dot(x, x, policy));
}

void copy_vec(std::span<const double> src, std::span<double> dst, const ExecPolicy& policy) {
    check_same_length(src.size(), dst.size(), "copy");
    index_t n = static_cast<index_t>(src.size());
    index_t bs = policy.block_size;
    for_each_chunk(grid_vector_blocks(n, policy), policy, [&](index_t c) {
        index_t end = std::min(n, (c + 1) * bs);
        for (index_t i = c * bs; i < end; ++i) dst[i] = src[i];
    });
}

void scale_vec(double alpha, std::span<double> x, const ExecPolicy& policy) {
    index_t n = static_cast<index_t>(x.size());
    index_t bs = policy.block_size;
    for_each_chunk(grid_vector_blocks(n, policy), policy, [&](index_t c) {
        index_t end = std::min(n, (c + 1) * bs);
        for (index_t i = c * bs; i < end; ++i) x[i] *= alpha;
    });
}

void axpby(double a, std::span<const double> x, double b, std::span<double> y,
           const ExecPolicy& policy) {
    check_same_length(x.size(), y.size(), "axpby");
    index_t n = static_cast<index_t>(x.size());
    index_t bs = policy.block_size;
    for_each_chunk(grid_vector_blocks(n, policy), policy, [&](index_t c) {
        index_t end = std::min(n, (c + 1) * bs);
        for (index_t i = c * bs; i < end; ++i) y[i] = a * x[i] + b * y[i];
    });
}

void fill_vec(double value, std::span<double> x, const ExecPolicy& policy) {
    index_t n = static_cast<index_t>(x.size());
    index_t bs = policy.block_size;
    for_each_chunk(grid_vector_blocks(n, policy), policy, [&](index_t c) {
        index_t end = std::min(n, (c + 1) * bs);
        for (index_t i = c * bs; i < end; ++i) x[i] = value;
    });
}

namespace {

// Adds the (canonical, row-sorted) COO entries to y. Batches cover disjoint
// row ranges so every y[i] has exactly one writer; entry order within a row is
// the canonical column order.
void coo_accumulate(const CooMatrix& m, std::span<const double> x, std::span<double> y,
                    const ExecPolicy& policy) {
    if (m.nnz() == 0) return;
    index_t bs = policy.block_size;
    index_t n_batches = grid_vector_blocks(m.n_rows, policy);
    for_each_chunk(n_batches, policy, [&](index_t b) {
        index_t row_begin = b * bs;
        index_t row_end = std::min(m.n_rows, (b + 1) * bs);
        auto lo = std::lower_bound(m.row_idx.begin(), m.row_idx.end(), row_begin);
        auto hi = std::lower_bound(m.row_idx.begin(), m.row_idx.end(), row_end);
        for (auto it = lo; it != hi; ++it) {
            index_t k = static_cast<index_t>(it - m.row_idx.begin());
            y[m.row_idx[k]] += m.values[k] * x[m.col_idx[k]];
        }
    });
}

}  // namespace

void spmv_into(const CooMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy) {
    check_spmv_dims(m.n_rows, m.n_cols, x.size(), y.size());
    fill_vec(0.0, y, policy);
    coo_accumulate(m, x, y, policy);
}

void spmv_into(const CsrMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy) {
    check_spmv_dims(m.n_rows, m.n_cols, x.size(), y.size());
    validate_policy(policy);  // the lane buffer relies on workers_per_row <= 32
    index_t tw = policy.workers_per_row;
    index_t rows_per_block = policy.block_size / tw;  // both powers of two, >= 1
    index_t n_blocks = grid_spmv_blocks(m.n_rows, policy);
    for_each_chunk(n_blocks, policy, [&](index_t b) {
        double lane[32];
        index_t row_end = std::min(m.n_rows, (b + 1) * rows_per_block);
        for (index_t r = b * rows_per_block; r < row_end; ++r) {
            index_t begin = m.row_ptr[r];
            index_t end = m.row_ptr[r + 1];
            // lane l takes entries begin+l, begin+l+tw, ...; surplus lanes
            // contribute the additive identity
            for (index_t l = 0; l < tw; ++l) {
                double sum = 0.0;
                for (index_t k = begin + l; k < end; k += tw) {
                    sum += m.values[k] * x[m.col_idx[k]];
                }
                lane[l] = sum;
            }
            for (index_t offset = tw / 2; offset >= 1; offset /= 2) {
                for (index_t l = 0; l < offset; ++l) {
                    lane[l] += lane[l + offset];
                }
            }
            y[r] = lane[0];
        }
    });
}

void spmv_into(const EllMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy) {
    check_spmv_dims(m.n_rows, m.n_cols, x.size(), y.size());
    index_t bs = policy.block_size;
    index_t sentinel = m.padding_sentinel();
    index_t n_batches = grid_vector_blocks(m.n_rows, policy);
    for_each_chunk(n_batches, policy, [&](index_t b) {
        index_t row_end = std::min(m.n_rows, (b + 1) * bs);
        for (index_t r = b * bs; r < row_end; ++r) {
            double sum = 0.0;
            for (index_t slot = 0; slot < m.width; ++slot) {
                index_t c = m.jcoef[slot * m.n_rows + r];
                if (c != sentinel) {
                    sum += m.coef[slot * m.n_rows + r] * x[c];
                }
            }
            y[r] = sum;
        }
    });
}

void spmv_into(const HybMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy) {
    check_spmv_dims(m.n_rows(), m.n_cols(), x.size(), y.size());
    spmv_into(m.ell_part, x, y, policy);
    coo_accumulate(m.coo_part, x, y, policy);
}

void spmv_into(const SparseMatrix& m, std::span<const double> x, std::span<double> y,
               const ExecPolicy& policy) {
    std::visit([&](const auto& mm) { spmv_into(mm, x, y, policy); }, m);
}

std::vector<double> spmv(const SparseMatrix& m, std::span<const double> x,
                         const ExecPolicy& policy) {
    std::vector<double> y(static_cast<std::size_t>(n_rows(m)));
    spmv_into(m, x, y, policy);
    return y;
}

}  // namespace krysp
