#include "krysp/formats.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace krysp {

index_t EllMatrix::nnz() const {
    index_t count = 0;
    for (index_t k = 0; k < static_cast<index_t>(jcoef.size()); ++k) {
        if (jcoef[k] != padding_sentinel()) ++count;
    }
    return count;
}

CooMatrix build_coo(const std::vector<Triple>& triples, index_t n_rows, index_t n_cols) {
    for (const auto& [r, c, v] : triples) {
        if (r < 0 || r >= n_rows || c < 0 || c >= n_cols) {
            throw IndexOutOfRange("coo entry (" + std::to_string(r) + ", " + std::to_string(c) +
                                  ") outside " + std::to_string(n_rows) + "x" +
                                  std::to_string(n_cols));
        }
    }

    std::vector<Triple> sorted = triples;
    std::sort(sorted.begin(), sorted.end(), [](const Triple& a, const Triple& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });

    CooMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_idx.reserve(sorted.size());
    m.col_idx.reserve(sorted.size());
    m.values.reserve(sorted.size());
    for (const auto& [r, c, v] : sorted) {
        if (!m.values.empty() && m.row_idx.back() == r && m.col_idx.back() == c) {
            m.values.back() += v;  // duplicates are summed
        } else {
            m.row_idx.push_back(r);
            m.col_idx.push_back(c);
            m.values.push_back(v);
        }
    }
    return m;
}

CsrMatrix coo_to_csr(const CooMatrix& m) {
    CsrMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.row_ptr.assign(m.n_rows + 1, 0);
    for (index_t k = 0; k < m.nnz(); ++k) {
        ++out.row_ptr[m.row_idx[k] + 1];
    }
    for (index_t r = 0; r < m.n_rows; ++r) {
        out.row_ptr[r + 1] += out.row_ptr[r];
    }
    out.col_idx = m.col_idx;
    out.values = m.values;
    return out;
}

CooMatrix csr_to_coo(const CsrMatrix& m) {
    CooMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.row_idx.reserve(m.nnz());
    out.col_idx = m.col_idx;
    out.values = m.values;
    for (index_t r = 0; r < m.n_rows; ++r) {
        for (index_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
            out.row_idx.push_back(r);
        }
    }
    return out;
}

EllMatrix csr_to_ell(const CsrMatrix& m, index_t slot_cap) {
    index_t width = 0;
    for (index_t r = 0; r < m.n_rows; ++r) {
        width = std::max(width, m.row_ptr[r + 1] - m.row_ptr[r]);
    }
    if (m.n_rows > 0 && width > slot_cap / m.n_rows) {
        throw EllBlowup("ell slab of " + std::to_string(m.n_rows) + "x" + std::to_string(width) +
                        " slots exceeds cap " + std::to_string(slot_cap));
    }

    EllMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.width = width;
    out.coef.assign(static_cast<std::size_t>(m.n_rows * width), 0.0);
    out.jcoef.assign(static_cast<std::size_t>(m.n_rows * width), out.padding_sentinel());
    for (index_t r = 0; r < m.n_rows; ++r) {
        index_t slot = 0;
        for (index_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k, ++slot) {
            out.coef[slot * m.n_rows + r] = m.values[k];
            out.jcoef[slot * m.n_rows + r] = m.col_idx[k];
        }
    }
    return out;
}

namespace {

// Smallest width covering at least 2/3 of the rows fully.
index_t hyb_auto_width(const CsrMatrix& m) {
    if (m.n_rows == 0) return 0;
    std::vector<index_t> row_nnz(m.n_rows);
    for (index_t r = 0; r < m.n_rows; ++r) {
        row_nnz[r] = m.row_ptr[r + 1] - m.row_ptr[r];
    }
    std::sort(row_nnz.begin(), row_nnz.end());
    // need ceil(2n/3) rows with row_nnz <= w
    index_t needed = (2 * m.n_rows + 2) / 3;
    return row_nnz[needed - 1];
}

}  // namespace

HybMatrix csr_to_hyb(const CsrMatrix& m, index_t width) {
    if (width == kHybAutoWidth) {
        width = hyb_auto_width(m);
    }

    HybMatrix out;
    out.ell_part.n_rows = m.n_rows;
    out.ell_part.n_cols = m.n_cols;
    out.ell_part.width = width;
    out.ell_part.coef.assign(static_cast<std::size_t>(m.n_rows * width), 0.0);
    out.ell_part.jcoef.assign(static_cast<std::size_t>(m.n_rows * width),
                              out.ell_part.padding_sentinel());
    out.coo_part.n_rows = m.n_rows;
    out.coo_part.n_cols = m.n_cols;

    for (index_t r = 0; r < m.n_rows; ++r) {
        index_t slot = 0;
        for (index_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
            if (slot < width) {
                out.ell_part.coef[slot * m.n_rows + r] = m.values[k];
                out.ell_part.jcoef[slot * m.n_rows + r] = m.col_idx[k];
                ++slot;
            } else {
                out.coo_part.row_idx.push_back(r);
                out.coo_part.col_idx.push_back(m.col_idx[k]);
                out.coo_part.values.push_back(m.values[k]);
            }
        }
    }
    return out;
}

CsrMatrix ell_to_csr(const EllMatrix& m) {
    CsrMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.row_ptr.assign(m.n_rows + 1, 0);
    for (index_t r = 0; r < m.n_rows; ++r) {
        for (index_t slot = 0; slot < m.width; ++slot) {
            if (m.jcoef[slot * m.n_rows + r] != m.padding_sentinel()) {
                ++out.row_ptr[r + 1];
            }
        }
    }
    for (index_t r = 0; r < m.n_rows; ++r) {
        out.row_ptr[r + 1] += out.row_ptr[r];
    }
    out.col_idx.reserve(out.row_ptr[m.n_rows]);
    out.values.reserve(out.row_ptr[m.n_rows]);
    for (index_t r = 0; r < m.n_rows; ++r) {
        for (index_t slot = 0; slot < m.width; ++slot) {
            index_t c = m.jcoef[slot * m.n_rows + r];
            if (c != m.padding_sentinel()) {
                out.col_idx.push_back(c);
                out.values.push_back(m.coef[slot * m.n_rows + r]);
            }
        }
    }
    return out;
}

CsrMatrix hyb_to_csr(const HybMatrix& m) {
    // The two parts are disjoint by the partition invariant, so the merge only
    // moves values.
    std::vector<Triple> triples;
    triples.reserve(static_cast<std::size_t>(m.nnz()));
    const EllMatrix& e = m.ell_part;
    for (index_t r = 0; r < e.n_rows; ++r) {
        for (index_t slot = 0; slot < e.width; ++slot) {
            index_t c = e.jcoef[slot * e.n_rows + r];
            if (c != e.padding_sentinel()) {
                triples.emplace_back(r, c, e.coef[slot * e.n_rows + r]);
            }
        }
    }
    for (index_t k = 0; k < m.coo_part.nnz(); ++k) {
        triples.emplace_back(m.coo_part.row_idx[k], m.coo_part.col_idx[k], m.coo_part.values[k]);
    }
    return coo_to_csr(build_coo(triples, m.n_rows(), m.n_cols()));
}

DenseMatrix to_dense(const CooMatrix& m) {
    DenseMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.values.assign(static_cast<std::size_t>(m.n_rows * m.n_cols), 0.0);
    for (index_t k = 0; k < m.nnz(); ++k) {
        out.at(m.row_idx[k], m.col_idx[k]) = m.values[k];
    }
    return out;
}

DenseMatrix to_dense(const CsrMatrix& m) {
    DenseMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.values.assign(static_cast<std::size_t>(m.n_rows * m.n_cols), 0.0);
    for (index_t r = 0; r < m.n_rows; ++r) {
        for (index_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
            out.at(r, m.col_idx[k]) = m.values[k];
        }
    }
    return out;
}

DenseMatrix to_dense(const EllMatrix& m) {
    DenseMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.values.assign(static_cast<std::size_t>(m.n_rows * m.n_cols), 0.0);
    for (index_t r = 0; r < m.n_rows; ++r) {
        for (index_t slot = 0; slot < m.width; ++slot) {
            index_t c = m.jcoef[slot * m.n_rows + r];
            if (c != m.padding_sentinel()) {
                out.at(r, c) = m.coef[slot * m.n_rows + r];
            }
        }
    }
    return out;
}

DenseMatrix to_dense(const HybMatrix& m) {
    DenseMatrix out = to_dense(m.ell_part);
    for (index_t k = 0; k < m.coo_part.nnz(); ++k) {
        out.at(m.coo_part.row_idx[k], m.coo_part.col_idx[k]) = m.coo_part.values[k];
    }
    return out;
}

DenseMatrix to_dense(const SparseMatrix& m) {
    return std::visit([](const auto& mm) { return to_dense(mm); }, m);
}

CsrMatrix dense_to_csr(const DenseMatrix& m) {
    std::vector<Triple> triples;
    for (index_t r = 0; r < m.n_rows; ++r) {
        for (index_t c = 0; c < m.n_cols; ++c) {
            if (m.at(r, c) != 0.0) triples.emplace_back(r, c, m.at(r, c));
        }
    }
    return coo_to_csr(build_coo(triples, m.n_rows, m.n_cols));
}

CsrMatrix to_csr(const SparseMatrix& m) {
    if (const auto* csr = std::get_if<CsrMatrix>(&m)) return *csr;
    if (const auto* coo = std::get_if<CooMatrix>(&m)) return coo_to_csr(*coo);
    if (const auto* ell = std::get_if<EllMatrix>(&m)) return ell_to_csr(*ell);
    return hyb_to_csr(std::get<HybMatrix>(m));
}

SparseMatrix convert(const SparseMatrix& m, Format target, index_t hyb_width) {
    CsrMatrix csr = to_csr(m);
    switch (target) {
        case Format::Coo:
            return csr_to_coo(csr);
        case Format::Csr:
            return csr;
        case Format::Ell:
            return csr_to_ell(csr);
        case Format::Hyb:
            return csr_to_hyb(csr, hyb_width);
    }
    throw Error("unknown format");
}

index_t n_rows(const SparseMatrix& m) {
    return std::visit([](const auto& mm) -> index_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(mm)>, HybMatrix>) {
            return mm.n_rows();
        } else {
            return mm.n_rows;
        }
    }, m);
}

index_t n_cols(const SparseMatrix& m) {
    return std::visit([](const auto& mm) -> index_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(mm)>, HybMatrix>) {
            return mm.n_cols();
        } else {
            return mm.n_cols;
        }
    }, m);
}

index_t nnz(const SparseMatrix& m) {
    return std::visit([](const auto& mm) { return mm.nnz(); }, m);
}

CsrMatrix csr_transpose(const CsrMatrix& m) {
    CsrMatrix out;
    out.n_rows = m.n_cols;
    out.n_cols = m.n_rows;
    out.row_ptr.assign(m.n_cols + 1, 0);
    for (index_t c : m.col_idx) {
        ++out.row_ptr[c + 1];
    }
    for (index_t r = 0; r < out.n_rows; ++r) {
        out.row_ptr[r + 1] += out.row_ptr[r];
    }
    out.col_idx.assign(m.nnz(), 0);
    out.values.assign(m.nnz(), 0.0);
    std::vector<index_t> next(out.row_ptr.begin(), out.row_ptr.end() - 1);
    for (index_t r = 0; r < m.n_rows; ++r) {
        for (index_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
            index_t pos = next[m.col_idx[k]]++;
            out.col_idx[pos] = r;  // row-major scan keeps each output row sorted
            out.values[pos] = m.values[k];
        }
    }
    return out;
}

}  // namespace krysp
