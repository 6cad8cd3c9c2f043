#pragma once

#include <tuple>
#include <variant>
#include <vector>

#include "krysp/types.hpp"

namespace krysp {

/// Coordinate format: three parallel arrays of length nnz, entries sorted
/// row-major then by column, duplicates summed at build time.
struct CooMatrix {
    index_t n_rows = 0;
    index_t n_cols = 0;
    std::vector<index_t> row_idx;
    std::vector<index_t> col_idx;
    std::vector<double> values;

    index_t nnz() const { return static_cast<index_t>(values.size()); }
};

/// Compressed sparse row: row_ptr has length n_rows+1, row_ptr[0] == 0,
/// row_ptr[n_rows] == nnz; within a row column indices strictly increase.
struct CsrMatrix {
    index_t n_rows = 0;
    index_t n_cols = 0;
    std::vector<index_t> row_ptr;
    std::vector<index_t> col_idx;
    std::vector<double> values;

    index_t nnz() const { return static_cast<index_t>(values.size()); }
};

/// ELLPACK: n_rows x width slab stored column-major (coef[slot*n_rows + row]).
/// Unused slots carry value 0.0 and the sentinel column index n_cols, so a
/// padded slot contributes exactly zero to an SpMV.
struct EllMatrix {
    index_t n_rows = 0;
    index_t n_cols = 0;
    index_t width = 0;
    std::vector<double> coef;    // column-major, n_rows * width
    std::vector<index_t> jcoef;  // column-major, n_rows * width

    index_t padding_sentinel() const { return n_cols; }
    index_t nnz() const;
};

/// Hybrid: the first min(width, row_nnz) entries of every row live in the
/// ELL part, the remainder overflows into the COO part.
struct HybMatrix {
    EllMatrix ell_part;
    CooMatrix coo_part;

    index_t n_rows() const { return ell_part.n_rows; }
    index_t n_cols() const { return ell_part.n_cols; }
    index_t nnz() const { return ell_part.nnz() + coo_part.nnz(); }
};

/// Row-major dense matrix; the expansion target used as oracle in tests.
struct DenseMatrix {
    index_t n_rows = 0;
    index_t n_cols = 0;
    std::vector<double> values;  // row-major, n_rows * n_cols

    double at(index_t r, index_t c) const { return values[r * n_cols + c]; }
    double& at(index_t r, index_t c) { return values[r * n_cols + c]; }
};

enum class Format { Coo, Csr, Ell, Hyb };

using SparseMatrix = std::variant<CooMatrix, CsrMatrix, EllMatrix, HybMatrix>;

using Triple = std::tuple<index_t, index_t, double>;

/// Slot cap for csr_to_ell: a conversion that would allocate more than this
/// many n_rows*width slots throws EllBlowup instead.
inline constexpr index_t kDefaultEllSlotCap = index_t(1) << 26;

/// Sentinel width value requesting the automatic HYB split (smallest width
/// that fully covers at least two thirds of the rows).
inline constexpr index_t kHybAutoWidth = -1;

CooMatrix build_coo(const std::vector<Triple>& triples, index_t n_rows, index_t n_cols);

CsrMatrix coo_to_csr(const CooMatrix& m);
CooMatrix csr_to_coo(const CsrMatrix& m);
EllMatrix csr_to_ell(const CsrMatrix& m, index_t slot_cap = kDefaultEllSlotCap);
HybMatrix csr_to_hyb(const CsrMatrix& m, index_t width = kHybAutoWidth);
CsrMatrix ell_to_csr(const EllMatrix& m);
CsrMatrix hyb_to_csr(const HybMatrix& m);

DenseMatrix to_dense(const CooMatrix& m);
DenseMatrix to_dense(const CsrMatrix& m);
DenseMatrix to_dense(const EllMatrix& m);
DenseMatrix to_dense(const HybMatrix& m);
DenseMatrix to_dense(const SparseMatrix& m);

CsrMatrix dense_to_csr(const DenseMatrix& m);

SparseMatrix convert(const SparseMatrix& m, Format target, index_t hyb_width = kHybAutoWidth);
CsrMatrix to_csr(const SparseMatrix& m);

index_t n_rows(const SparseMatrix& m);
index_t n_cols(const SparseMatrix& m);
index_t nnz(const SparseMatrix& m);

/// Structural transpose of a CSR matrix (exact: moves values only).
CsrMatrix csr_transpose(const CsrMatrix& m);

}  // namespace krysp
