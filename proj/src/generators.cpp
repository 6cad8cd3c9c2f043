#include "krysp/generators.hpp"

#include "krysp/matrix_market.hpp"

namespace krysp {

namespace {

void require_n(index_t n) {
    if (n < 2) throw Error("generator needs n >= 2");
}

}  // namespace

CooMatrix poisson2d(index_t n) {
    require_n(n);
    index_t dim = n * n;
    std::vector<Triple> triples;
    triples.reserve(static_cast<std::size_t>(5 * dim));
    auto id = [n](index_t i, index_t j) { return i * n + j; };
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) {
            index_t e = id(i, j);
            triples.emplace_back(e, e, 4.0);
            if (i > 0) triples.emplace_back(e, id(i - 1, j), -1.0);
            if (i + 1 < n) triples.emplace_back(e, id(i + 1, j), -1.0);
            if (j > 0) triples.emplace_back(e, id(i, j - 1), -1.0);
            if (j + 1 < n) triples.emplace_back(e, id(i, j + 1), -1.0);
        }
    }
    return build_coo(triples, dim, dim);
}

CooMatrix laplace1d(index_t n) {
    require_n(n);
    std::vector<Triple> triples;
    triples.reserve(static_cast<std::size_t>(3 * n));
    for (index_t i = 0; i < n; ++i) {
        triples.emplace_back(i, i, 2.0);
        if (i > 0) triples.emplace_back(i, i - 1, -1.0);
        if (i + 1 < n) triples.emplace_back(i, i + 1, -1.0);
    }
    return build_coo(triples, n, n);
}

CooMatrix convdiff2d(index_t n, double peclet) {
    require_n(n);
    index_t dim = n * n;
    std::vector<Triple> triples;
    triples.reserve(static_cast<std::size_t>(5 * dim));
    auto id = [n](index_t i, index_t j) { return i * n + j; };
    // upwind differencing for a flow toward increasing i and j: the upstream
    // neighbors carry the convective weight
    double up = 1.0 + peclet;
    double down = 1.0;
    double diag = 2.0 * up + 2.0 * down;
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) {
            index_t e = id(i, j);
            triples.emplace_back(e, e, diag);
            if (i > 0) triples.emplace_back(e, id(i - 1, j), -up);
            if (i + 1 < n) triples.emplace_back(e, id(i + 1, j), -down);
            if (j > 0) triples.emplace_back(e, id(i, j - 1), -up);
            if (j + 1 < n) triples.emplace_back(e, id(i, j + 1), -down);
        }
    }
    return build_coo(triples, dim, dim);
}

void generate_test_matrix(const std::string& kind, index_t n, const std::string& out_path) {
    CooMatrix m;
    if (kind == "poisson2d") {
        m = poisson2d(n);
    } else if (kind == "laplace1d") {
        m = laplace1d(n);
    } else if (kind == "convdiff2d") {
        m = convdiff2d(n);
    } else {
        throw Error("unknown matrix kind '" + kind + "'");
    }
    write_matrix_market(out_path, m);
}

}  // namespace krysp
