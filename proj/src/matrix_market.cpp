#include "krysp/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace krysp {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

CooMatrix read_matrix_market(std::istream& in) {
    std::string line;
    long line_no = 0;

    if (!std::getline(in, line)) {
        throw ParseError("empty file", 1);
    }
    ++line_no;
    std::istringstream header(line);
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") {
        throw ParseError("missing %%MatrixMarket banner", line_no);
    }
    object = lower(object);
    format = lower(format);
    field = lower(field);
    symmetry = lower(symmetry);
    if (object != "matrix" || format != "coordinate") {
        throw UnsupportedField("only coordinate matrices are supported, got '" + object + " " +
                               format + "'");
    }
    if (field == "complex" || field == "pattern") {
        throw UnsupportedField("field '" + field + "' is not supported");
    }
    if (field != "real" && field != "integer") {
        throw UnsupportedField("unknown field '" + field + "'");
    }
    bool symmetric = false;
    if (symmetry == "symmetric") {
        symmetric = true;
    } else if (symmetry != "general") {
        throw UnsupportedField("symmetry '" + symmetry + "' is not supported");
    }

    // size line, after comments
    index_t rows = 0, cols = 0;
    long declared_nnz = 0;
    for (;;) {
        if (!std::getline(in, line)) {
            throw ParseError("missing size line", line_no + 1);
        }
        ++line_no;
        if (!line.empty() && line[0] == '%') continue;
        bool blank = std::all_of(line.begin(), line.end(),
                                 [](unsigned char c) { return std::isspace(c); });
        if (blank) continue;
        std::istringstream size_line(line);
        if (!(size_line >> rows >> cols >> declared_nnz) || rows < 0 || cols < 0 ||
            declared_nnz < 0) {
            throw ParseError("malformed size line", line_no);
        }
        break;
    }

    std::vector<Triple> triples;
    triples.reserve(static_cast<std::size_t>(symmetric ? 2 * declared_nnz : declared_nnz));
    long seen = 0;
    while (seen < declared_nnz) {
        if (!std::getline(in, line)) {
            throw ParseError("file ends after " + std::to_string(seen) + " of " +
                                 std::to_string(declared_nnz) + " entries",
                             line_no);
        }
        ++line_no;
        if (!line.empty() && line[0] == '%') continue;
        bool blank = std::all_of(line.begin(), line.end(),
                                 [](unsigned char c) { return std::isspace(c); });
        if (blank) continue;
        std::istringstream entry(line);
        index_t r, c;
        double v;
        if (!(entry >> r >> c >> v)) {
            throw ParseError("malformed entry", line_no);
        }
        if (r < 1 || r > rows || c < 1 || c > cols) {
            throw ParseError("index (" + std::to_string(r) + ", " + std::to_string(c) +
                                 ") outside " + std::to_string(rows) + "x" + std::to_string(cols),
                             line_no);
        }
        triples.emplace_back(r - 1, c - 1, v);
        if (symmetric && r != c) {
            triples.emplace_back(c - 1, r - 1, v);
        }
        ++seen;
    }
    return build_coo(triples, rows, cols);
}

CooMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path + "'");
    }
    return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const CooMatrix& m) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.n_rows << ' ' << m.n_cols << ' ' << m.nnz() << '\n';
    char buf[64];
    for (index_t k = 0; k < m.nnz(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.values[k]);
        out << (m.row_idx[k] + 1) << ' ' << (m.col_idx[k] + 1) << ' ' << buf << '\n';
    }
}

void write_matrix_market(const std::string& path, const CooMatrix& m) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write '" + path + "'");
    }
    write_matrix_market(out, m);
    if (!out) {
        throw Error("write to '" + path + "' failed");
    }
}

}  // namespace krysp
