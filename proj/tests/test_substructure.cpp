#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "krysp/generators.hpp"
#include "krysp/kernels.hpp"
#include "krysp/substructure.hpp"
#include "support.hpp"

using namespace krysp;

namespace {

// Lift every local matrix back to global coordinates and sum.
DenseMatrix lift_and_sum(const PartitionResult& pr, index_t n) {
    DenseMatrix acc;
    acc.n_rows = acc.n_cols = n;
    acc.values.assign(static_cast<std::size_t>(n * n), 0.0);
    for (index_t s = 0; s < pr.partition.n_subdomains; ++s) {
        const auto& l2g = pr.partition.local_to_global[s];
        DenseMatrix local = to_dense(pr.locals[s].K_local);
        for (index_t i = 0; i < local.n_rows; ++i) {
            for (index_t j = 0; j < local.n_cols; ++j) {
                acc.at(l2g[i], l2g[j]) += local.at(i, j);
            }
        }
    }
    return acc;
}

std::vector<std::vector<double>> restrict_all(const PartitionResult& pr,
                                              const std::vector<double>& global) {
    std::vector<std::vector<double>> locals;
    for (index_t s = 0; s < pr.partition.n_subdomains; ++s) {
        locals.push_back(restrict_to_local(pr, s, global));
    }
    return locals;
}

}  // namespace

TEST_CASE("three-equation system splits into the two-subdomain block form") {
    // K = [[2, 0, -1], [0, 3, -1], [-1, -1, 4]]; eq2 is the shared equation
    CsrMatrix K = coo_to_csr(build_coo(
        {{0, 0, 2}, {0, 2, -1}, {1, 1, 3}, {1, 2, -1}, {2, 0, -1}, {2, 1, -1}, {2, 2, 4}}, 3, 3));
    PartitionResult pr = partition_matrix(K, std::vector<index_t>{0, 1, kInterfaceEquation});

    REQUIRE(pr.partition.n_subdomains == 2);
    CHECK(pr.partition.owners[0] == std::vector<index_t>{0});
    CHECK(pr.partition.owners[1] == std::vector<index_t>{1});
    CHECK(pr.partition.owners[2] == std::vector<index_t>{0, 1});
    CHECK(pr.partition.local_to_global[0] == std::vector<index_t>{0, 2});
    CHECK(pr.partition.local_to_global[1] == std::vector<index_t>{1, 2});

    // K1 = [[K00, K02], [K20, K22/2]], K2 = [[K11, K12], [K21, K22/2]]
    DenseMatrix k1 = to_dense(pr.locals[0].K_local);
    DenseMatrix k2 = to_dense(pr.locals[1].K_local);
    CHECK(k1.at(0, 0) == 2.0);
    CHECK(k1.at(0, 1) == -1.0);
    CHECK(k1.at(1, 0) == -1.0);
    CHECK(k1.at(1, 1) == 2.0);  // half of K22
    CHECK(k2.at(0, 0) == 3.0);
    CHECK(k2.at(0, 1) == -1.0);
    CHECK(k2.at(1, 0) == -1.0);
    CHECK(k2.at(1, 1) == 2.0);
    CHECK(k1.at(1, 1) + k2.at(1, 1) == 4.0);  // interface block reassembles

    CHECK(pr.locals[0].weights == std::vector<double>{1.0, 0.5});
    CHECK(pr.locals[1].weights == std::vector<double>{1.0, 0.5});

    // exact reassembly
    CHECK(lift_and_sum(pr, 3).values == to_dense(K).values);
}

TEST_CASE("single subdomain is the identity partition") {
    CsrMatrix A = coo_to_csr(laplace1d(10));
    std::vector<double> b(10, 2.5);
    PartitionResult pr = partition_matrix(A, index_t(1), b);
    REQUIRE(pr.partition.n_subdomains == 1);
    CHECK(pr.partition.interfaces[0].empty());
    CHECK(pr.locals[0].weights == std::vector<double>(10, 1.0));
    CHECK(pr.locals[0].b_local == b);
    CHECK(to_dense(pr.locals[0].K_local).values == to_dense(A).values);
    CHECK(pr.locals[0].K_local.row_ptr == A.row_ptr);
    CHECK(pr.locals[0].K_local.values == A.values);
}

TEST_CASE("1d laplacian split 5/5 shares one interface pair") {
    CsrMatrix A = coo_to_csr(laplace1d(10));
    PartitionResult pr = partition_matrix(A, index_t(2));

    auto stats = partition_stats(pr);
    REQUIRE(stats.size() == 2);
    CHECK(stats[0].dof == 6);
    CHECK(stats[1].dof == 6);

    REQUIRE(pr.partition.interfaces[0].size() == 1);
    REQUIRE(pr.partition.interfaces[1].size() == 1);
    CHECK(pr.partition.interfaces[0][0].neighbor_id == 1);
    CHECK(pr.partition.interfaces[1][0].neighbor_id == 0);
    // both lists address the same global equations {4, 5} in the same order
    const auto& l0 = pr.partition.interfaces[0][0].equation_list;
    const auto& l1 = pr.partition.interfaces[1][0].equation_list;
    REQUIRE(l0.size() == 2);
    REQUIRE(l1.size() == 2);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(pr.partition.local_to_global[0][l0[j]] == pr.partition.local_to_global[1][l1[j]]);
    }

    CHECK(lift_and_sum(pr, 10).values == to_dense(A).values);
}

TEST_CASE("partition validation errors") {
    CsrMatrix A = coo_to_csr(laplace1d(6));
    SUBCASE("assignment length must match") {
        CHECK_THROWS_AS(partition_matrix(A, std::vector<index_t>{0, 1}), DimensionMismatch);
    }
    SUBCASE("empty subdomains are rejected") {
        // id 2 never appears although ids run up to 3
        std::vector<index_t> a{0, 0, 1, 1, 3, 3};
        CHECK_THROWS_AS(partition_matrix(A, a), EmptySubdomain);
    }
    SUBCASE("more parts than equations are rejected") {
        CHECK_THROWS_AS(band_row_assignment(3, 7), Error);
    }
}

TEST_CASE("lift-and-sum and assembled products agree on random SPD matrices") {
    std::mt19937_64 rng(51);
    ExecPolicy pol;
    for (int trial = 0; trial < 50; ++trial) {
        index_t n = 16 + static_cast<index_t>(rng() % 113);  // up to 128
        CsrMatrix A = testsupport::random_spd(rng, n, 0.08);
        index_t parts = 2 + static_cast<index_t>(rng() % 7);  // 2..8
        // random (non-contiguous) assignment, each part non-empty
        std::vector<index_t> assignment(static_cast<std::size_t>(n));
        for (index_t e = 0; e < n; ++e) {
            assignment[e] = e < parts ? e : static_cast<index_t>(rng() % parts);
        }
        PartitionResult pr = partition_matrix(A, assignment);
        CHECK(lift_and_sum(pr, n).values == to_dense(A).values);

        // every interface list is mirrored
        for (index_t s = 0; s < parts; ++s) {
            for (const auto& iface : pr.partition.interfaces[s]) {
                bool found = false;
                for (const auto& back : pr.partition.interfaces[iface.neighbor_id]) {
                    if (back.neighbor_id == s) {
                        found = true;
                        CHECK(back.equation_list.size() == iface.equation_list.size());
                    }
                }
                CHECK(found);
            }
        }

        // assembled local products restrict the global product
        std::vector<double> x = testsupport::random_vector(rng, static_cast<std::size_t>(n));
        auto y_locals = assemble_spmv_all(pr, restrict_all(pr, x), pol);
        std::vector<double> expected = spmv(SparseMatrix(A), x, pol);
        double worst = 0.0;
        for (index_t s = 0; s < parts; ++s) {
            const auto& l2g = pr.partition.local_to_global[s];
            for (std::size_t i = 0; i < l2g.size(); ++i) {
                worst = std::max(worst, std::fabs(y_locals[s][i] - expected[l2g[i]]) /
                                            (1.0 + std::fabs(expected[l2g[i]])));
            }
        }
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("weighted lifted rhs reassembles the global rhs") {
    std::mt19937_64 rng(53);
    CsrMatrix A = coo_to_csr(poisson2d(6));
    auto b = testsupport::random_vector(rng, 36, 2.0);
    PartitionResult pr = partition_matrix(A, index_t(4), b);
    std::vector<double> acc(36, 0.0);
    for (index_t s = 0; s < 4; ++s) {
        const auto& l2g = pr.partition.local_to_global[s];
        for (std::size_t i = 0; i < l2g.size(); ++i) {
            acc[l2g[i]] += pr.locals[s].weights[i] * pr.locals[s].b_local[i];
        }
    }
    for (index_t e = 0; e < 36; ++e) {
        CHECK(std::fabs(acc[e] - b[e]) <= 1e-15);
    }
}

TEST_CASE("assembled local products equal the global product") {
    ExecPolicy pol;
    SUBCASE("two-subdomain three-equation system with ones") {
        CsrMatrix K = coo_to_csr(build_coo(
            {{0, 0, 2}, {0, 2, -1}, {1, 1, 3}, {1, 2, -1}, {2, 0, -1}, {2, 1, -1}, {2, 2, 4}}, 3,
            3));
        PartitionResult pr = partition_matrix(K, std::vector<index_t>{0, 1, 0});
        std::vector<double> ones(3, 1.0);
        auto y_locals = assemble_spmv_all(pr, restrict_all(pr, ones), pol);
        std::vector<double> expected = spmv(SparseMatrix(K), ones, pol);
        for (index_t s = 0; s < 2; ++s) {
            const auto& l2g = pr.partition.local_to_global[s];
            for (std::size_t i = 0; i < l2g.size(); ++i) {
                CHECK(y_locals[s][i] == doctest::Approx(expected[l2g[i]]).epsilon(1e-12));
            }
        }
    }
    SUBCASE("subdomain without neighbors sends no messages") {
        // block-diagonal matrix: two decoupled halves
        std::vector<Triple> t;
        for (index_t i = 0; i < 8; ++i) t.emplace_back(i, i, 2.0);
        t.emplace_back(0, 1, -1.0);
        t.emplace_back(1, 0, -1.0);
        t.emplace_back(6, 7, -1.0);
        t.emplace_back(7, 6, -1.0);
        CsrMatrix A = coo_to_csr(build_coo(t, 8, 8));
        PartitionResult pr = partition_matrix(A, index_t(2));
        CHECK(pr.partition.interfaces[0].empty());
        CHECK(pr.partition.interfaces[1].empty());
        std::mt19937_64 rng(55);
        std::vector<double> x = testsupport::random_vector(rng, 8);
        auto y_locals = assemble_spmv_all(pr, restrict_all(pr, x), pol);
        std::vector<double> expected = spmv(SparseMatrix(A), x, pol);
        for (index_t s = 0; s < 2; ++s) {
            const auto& l2g = pr.partition.local_to_global[s];
            for (std::size_t i = 0; i < l2g.size(); ++i) {
                CHECK(y_locals[s][i] == expected[l2g[i]]);
            }
        }
    }
    SUBCASE("four-subdomain 16x16 grid matches on all 256 equations") {
        CsrMatrix A = coo_to_csr(poisson2d(16));
        PartitionResult pr = partition_matrix(A, index_t(4));
        std::mt19937_64 rng(57);
        std::vector<double> x = testsupport::random_vector(rng, 256);
        auto y_locals = assemble_spmv_all(pr, restrict_all(pr, x), pol);
        std::vector<double> expected = spmv(SparseMatrix(A), x, pol);
        for (index_t s = 0; s < 4; ++s) {
            const auto& l2g = pr.partition.local_to_global[s];
            for (std::size_t i = 0; i < l2g.size(); ++i) {
                CHECK(std::fabs(y_locals[s][i] - expected[l2g[i]]) <=
                      1e-12 * (1.0 + std::fabs(expected[l2g[i]])));
            }
        }
    }
    SUBCASE("interface values are bit-identical on every owner") {
        CsrMatrix A = coo_to_csr(poisson2d(8));
        PartitionResult pr = partition_matrix(A, index_t(4));
        std::mt19937_64 rng(59);
        std::vector<double> x = testsupport::random_vector(rng, 64);
        auto y_locals = assemble_spmv_all(pr, restrict_all(pr, x), pol);
        for (index_t e = 0; e < 64; ++e) {
            const auto& owners = pr.partition.owners[e];
            if (owners.size() < 2) continue;
            double first = 0.0;
            bool have = false;
            for (index_t s : owners) {
                const auto& l2g = pr.partition.local_to_global[s];
                for (std::size_t i = 0; i < l2g.size(); ++i) {
                    if (l2g[i] == e) {
                        if (!have) {
                            first = y_locals[s][i];
                            have = true;
                        } else {
                            CHECK(y_locals[s][i] == first);  // bitwise
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("distributed dot") {
    ExecPolicy pol;
    SUBCASE("ones with weights telescope to the dimension") {
        CsrMatrix A = coo_to_csr(laplace1d(100));
        for (index_t parts : {2, 3, 5, 8}) {
            PartitionResult pr = partition_matrix(A, parts);
            std::vector<double> ones(100, 1.0);
            auto locals = restrict_all(pr, ones);
            auto results = distributed_dot_all(pr, locals, locals, pol);
            for (double r : results) {
                CHECK(r == doctest::Approx(100.0).epsilon(1e-12));
            }
            // bitwise identical on every subdomain
            for (double r : results) CHECK(r == results[0]);
        }
    }
    SUBCASE("single subdomain equals the kernel dot exactly") {
        CsrMatrix A = coo_to_csr(laplace1d(40));
        PartitionResult pr = partition_matrix(A, index_t(1));
        std::mt19937_64 rng(61);
        auto x = testsupport::random_vector(rng, 40);
        auto y = testsupport::random_vector(rng, 40);
        auto results = distributed_dot_all(pr, {x}, {y}, pol);
        CHECK(results[0] == dot(x, y, pol));
    }
    SUBCASE("eight subdomains match the global dot") {
        CsrMatrix A = coo_to_csr(laplace1d(64));
        PartitionResult pr = partition_matrix(A, index_t(8));
        std::mt19937_64 rng(63);
        auto x = testsupport::random_vector(rng, 64);
        auto y = testsupport::random_vector(rng, 64);
        auto results = distributed_dot_all(pr, restrict_all(pr, x), restrict_all(pr, y), pol);
        double global = dot(x, y, pol);
        for (double r : results) {
            CHECK(testsupport::rel_err(r, global) <= 1e-12);
        }
    }
}

TEST_CASE("substructured cg with one part reproduces the classic report") {
    CsrMatrix A = coo_to_csr(poisson2d(8));
    std::vector<double> b(64, 1.0), x0(64, 0.0);
    for (auto precond : {Preconditioner::None, Preconditioner::Jacobi}) {
        SolverConfig cfg;
        cfg.preconditioner = precond;
        SolveReport classic = solve_cg_classic(SparseMatrix(A), b, x0, cfg);
        SolveReport par = solve_cg_substructured(SparseMatrix(A), b, x0, index_t(1), cfg);
        CHECK(par.converged == classic.converged);
        CHECK(par.iterations == classic.iterations);
        CHECK(par.residual_history == classic.residual_history);  // bitwise
        CHECK(par.solution == classic.solution);                  // bitwise
    }
}

TEST_CASE("substructured cg trajectories match sequential cg across part counts") {
    SparseMatrix A(coo_to_csr(poisson2d(16)));  // 256 equations
    std::vector<double> b(256, 1.0), x0(256, 0.0);
    SolverConfig cfg;
    cfg.preconditioner = Preconditioner::None;
    SolveReport sequential = solve_cg_classic(A, b, x0, cfg);
    REQUIRE(sequential.converged);

    for (index_t parts : {2, 4, 8}) {
        CAPTURE(parts);
        SolveReport par = solve_cg_substructured(A, b, x0, parts, cfg);
        CHECK(par.converged);
        CHECK(par.iterations == sequential.iterations);
        REQUIRE(par.residual_history.size() == sequential.residual_history.size());
        for (std::size_t k = 0; k < par.residual_history.size(); ++k) {
            CHECK(std::fabs(par.residual_history[k] - sequential.residual_history[k]) <=
                  1e-10 * (1.0 + sequential.residual_history[k]));
        }
        for (std::size_t i = 0; i < b.size(); ++i) {
            CHECK(std::fabs(par.solution[i] - sequential.solution[i]) <= 1e-8);
        }
    }
}

TEST_CASE("trajectory equivalence holds up the poisson family to 4096 equations") {
    SparseMatrix A(coo_to_csr(poisson2d(64)));  // 4096 equations
    std::vector<double> b(4096, 1.0), x0(4096, 0.0);
    SolverConfig cfg;
    cfg.preconditioner = Preconditioner::None;
    SolveReport sequential = solve_cg_classic(A, b, x0, cfg);
    REQUIRE(sequential.converged);
    SolveReport par = solve_cg_substructured(A, b, x0, index_t(8), cfg);
    CHECK(par.converged);
    CHECK(par.iterations == sequential.iterations);
    REQUIRE(par.residual_history.size() == sequential.residual_history.size());
    for (std::size_t k = 0; k < par.residual_history.size(); ++k) {
        CHECK(std::fabs(par.residual_history[k] - sequential.residual_history[k]) <=
              1e-10 * (1.0 + sequential.residual_history[k]));
    }
}

TEST_CASE("no deadlock on chain, star and fully connected neighbor graphs") {
    ExecPolicy pol;
    std::mt19937_64 rng(65);

    SUBCASE("chain: band rows of a 1d laplacian") {
        CsrMatrix A = coo_to_csr(laplace1d(64));
        PartitionResult pr = partition_matrix(A, index_t(8));
        auto x = testsupport::random_vector(rng, 64);
        CHECK_NOTHROW(assemble_spmv_all(pr, restrict_all(pr, x), pol));
    }
    SUBCASE("star: one hub equation touching every part") {
        // arrow matrix: equation 0 couples to everything
        std::vector<Triple> t;
        index_t n = 25;
        for (index_t i = 0; i < n; ++i) t.emplace_back(i, i, 4.0);
        for (index_t i = 1; i < n; ++i) {
            t.emplace_back(0, i, -0.1);
            t.emplace_back(i, 0, -0.1);
        }
        CsrMatrix A = coo_to_csr(build_coo(t, n, n));
        std::vector<index_t> assignment(static_cast<std::size_t>(n));
        for (index_t i = 0; i < n; ++i) assignment[i] = i % 5;
        PartitionResult pr = partition_matrix(A, assignment);
        auto x = testsupport::random_vector(rng, static_cast<std::size_t>(n));
        auto y_locals = assemble_spmv_all(pr, restrict_all(pr, x), pol);
        std::vector<double> expected = spmv(SparseMatrix(A), x, pol);
        for (index_t s = 0; s < 5; ++s) {
            const auto& l2g = pr.partition.local_to_global[s];
            for (std::size_t i = 0; i < l2g.size(); ++i) {
                CHECK(std::fabs(y_locals[s][i] - expected[l2g[i]]) <= 1e-12);
            }
        }
    }
    SUBCASE("fully connected: dense coupling across all parts") {
        index_t n = 12;
        std::vector<Triple> t;
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = 0; j < n; ++j) {
                t.emplace_back(i, j, i == j ? static_cast<double>(n) : -0.5);
            }
        }
        CsrMatrix A = coo_to_csr(build_coo(t, n, n));
        std::vector<index_t> assignment(static_cast<std::size_t>(n));
        for (index_t i = 0; i < n; ++i) assignment[i] = i % 4;
        PartitionResult pr = partition_matrix(A, assignment);
        auto x = testsupport::random_vector(rng, static_cast<std::size_t>(n));
        auto y_locals = assemble_spmv_all(pr, restrict_all(pr, x), pol);
        std::vector<double> expected = spmv(SparseMatrix(A), x, pol);
        for (index_t s = 0; s < 4; ++s) {
            const auto& l2g = pr.partition.local_to_global[s];
            for (std::size_t i = 0; i < l2g.size(); ++i) {
                CHECK(std::fabs(y_locals[s][i] - expected[l2g[i]]) <=
                      1e-12 * (1.0 + std::fabs(expected[l2g[i]])));
            }
        }
    }
}

TEST_CASE("channel recv times out as a protocol deadlock") {
    ChannelMesh mesh(2, std::chrono::milliseconds(50));
    CHECK_THROWS_AS(mesh.recv(1, 0), ProtocolDeadlock);
}

TEST_CASE("assignment file round trip and validation") {
    std::string path = "/tmp/krysp_test_assignment.txt";
    {
        std::ofstream out(path);
        out << "0\n0\n1\n1\n";
    }
    auto a = read_assignment_file(path, 4);
    CHECK(a == std::vector<index_t>{0, 0, 1, 1});
    CHECK_THROWS_AS(read_assignment_file(path, 5), DimensionMismatch);
}
