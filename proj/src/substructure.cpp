#include "krysp/substructure.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "krysp/kernels.hpp"

namespace krysp {

std::vector<index_t> band_row_assignment(index_t n, index_t n_parts) {
    if (n_parts < 1 || n_parts > n) {
        throw Error("band-row split needs 1 <= parts <= n");
    }
    std::vector<index_t> assignment(static_cast<std::size_t>(n));
    index_t base = n / n_parts;
    for (index_t e = 0; e < n; ++e) {
        index_t s = base > 0 ? e / base : n_parts - 1;
        assignment[e] = std::min(s, n_parts - 1);  // last band takes the remainder
    }
    return assignment;
}

namespace {

std::vector<std::vector<index_t>> compute_owners(const CsrMatrix& A,
                                                 const std::vector<index_t>& assignment) {
    index_t n = A.n_rows;
    std::vector<std::set<index_t>> owner_sets(static_cast<std::size_t>(n));
    auto marked = [&](index_t e) { return assignment[e] == kInterfaceEquation; };
    for (index_t e = 0; e < n; ++e) {
        if (!marked(e)) owner_sets[e].insert(assignment[e]);
    }
    // any coefficient coupling equations assigned apart makes both interface;
    // couplings through explicitly marked equations do not propagate
    for (index_t r = 0; r < n; ++r) {
        for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) {
            index_t c = A.col_idx[k];
            if (marked(r) || marked(c)) continue;
            if (assignment[r] != assignment[c]) {
                owner_sets[r].insert(assignment[c]);
                owner_sets[c].insert(assignment[r]);
            }
        }
    }
    // marked equations belong to every subdomain they touch, transitively
    // through chains of marked equations
    bool changed = true;
    while (changed) {
        changed = false;
        for (index_t r = 0; r < n; ++r) {
            for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) {
                index_t c = A.col_idx[k];
                if (r == c || (!marked(r) && !marked(c))) continue;
                if (marked(r)) {
                    for (index_t s : owner_sets[c]) {
                        changed |= owner_sets[r].insert(s).second;
                    }
                }
                if (marked(c)) {
                    for (index_t s : owner_sets[r]) {
                        changed |= owner_sets[c].insert(s).second;
                    }
                }
            }
        }
    }
    for (index_t e = 0; e < n; ++e) {
        if (owner_sets[e].empty()) {
            throw DisconnectedAssignment("interface equation " + std::to_string(e) +
                                         " touches no subdomain");
        }
    }
    std::vector<std::vector<index_t>> owners(static_cast<std::size_t>(n));
    for (index_t e = 0; e < n; ++e) {
        owners[e].assign(owner_sets[e].begin(), owner_sets[e].end());
    }
    return owners;
}

}  // namespace

PartitionResult partition_matrix(const CsrMatrix& A, const std::vector<index_t>& assignment,
                                 std::span<const double> b) {
    if (A.n_rows != A.n_cols) {
        throw DimensionMismatch("partitioning expects a square matrix");
    }
    index_t n = A.n_rows;
    if (static_cast<index_t>(assignment.size()) != n) {
        throw DimensionMismatch("assignment covers " + std::to_string(assignment.size()) +
                                " equations, matrix has " + std::to_string(n));
    }
    if (!b.empty() && static_cast<index_t>(b.size()) != n) {
        throw DimensionMismatch("rhs length does not match the matrix");
    }

    index_t n_parts = 0;
    for (index_t id : assignment) {
        if (id < 0 && id != kInterfaceEquation) {
            throw Error("subdomain ids must be non-negative (or -1 for a shared equation)");
        }
        n_parts = std::max(n_parts, id + 1);
    }
    if (n_parts == 0) {
        throw EmptySubdomain("assignment names no subdomain");
    }
    std::vector<index_t> load(static_cast<std::size_t>(n_parts), 0);
    for (index_t id : assignment) {
        if (id != kInterfaceEquation) ++load[id];
    }
    for (index_t s = 0; s < n_parts; ++s) {
        if (load[s] == 0) {
            throw EmptySubdomain("subdomain " + std::to_string(s) + " has no equations");
        }
    }

    PartitionResult pr;
    Partition& part = pr.partition;
    part.n_subdomains = n_parts;
    part.owners = compute_owners(A, assignment);

    // local numbering: interior equations first, then interface equations,
    // both ascending by global id
    part.local_to_global.assign(static_cast<std::size_t>(n_parts), {});
    for (index_t e = 0; e < n; ++e) {
        if (part.owners[e].size() == 1) {
            part.local_to_global[part.owners[e][0]].push_back(e);
        }
    }
    for (index_t e = 0; e < n; ++e) {
        if (part.owners[e].size() > 1) {
            for (index_t s : part.owners[e]) {
                part.local_to_global[s].push_back(e);
            }
        }
    }

    std::vector<std::map<index_t, index_t>> global_to_local(static_cast<std::size_t>(n_parts));
    for (index_t s = 0; s < n_parts; ++s) {
        const auto& l2g = part.local_to_global[s];
        for (index_t i = 0; i < static_cast<index_t>(l2g.size()); ++i) {
            global_to_local[s][l2g[i]] = i;
        }
    }

    // interface lists: shared equations per neighbor pair, ascending global id
    part.interfaces.assign(static_cast<std::size_t>(n_parts), {});
    std::map<std::pair<index_t, index_t>, std::vector<index_t>> shared;  // (s,t) -> global eqs
    for (index_t e = 0; e < n; ++e) {
        const auto& own = part.owners[e];
        for (std::size_t a = 0; a < own.size(); ++a) {
            for (std::size_t c = a + 1; c < own.size(); ++c) {
                shared[{own[a], own[c]}].push_back(e);
            }
        }
    }
    for (const auto& [key, eqs] : shared) {
        auto [s, t] = key;
        InterfaceDescriptor from_s;
        from_s.neighbor_id = t;
        InterfaceDescriptor from_t;
        from_t.neighbor_id = s;
        for (index_t e : eqs) {
            from_s.equation_list.push_back(global_to_local[s].at(e));
            from_t.equation_list.push_back(global_to_local[t].at(e));
        }
        part.interfaces[s].push_back(std::move(from_s));
        part.interfaces[t].push_back(std::move(from_t));
    }
    for (auto& list : part.interfaces) {
        std::sort(list.begin(), list.end(), [](const auto& a, const auto& b_) {
            return a.neighbor_id < b_.neighbor_id;
        });
    }

    // coefficient distribution
    std::vector<std::vector<Triple>> triples(static_cast<std::size_t>(n_parts));
    for (index_t r = 0; r < n; ++r) {
        for (index_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) {
            index_t c = A.col_idx[k];
            double v = A.values[k];
            std::vector<index_t> common;
            std::set_intersection(part.owners[r].begin(), part.owners[r].end(),
                                  part.owners[c].begin(), part.owners[c].end(),
                                  std::back_inserter(common));
            if (common.empty()) {
                throw DisconnectedAssignment("coefficient (" + std::to_string(r) + ", " +
                                             std::to_string(c) +
                                             ") couples equations with no common subdomain");
            }
            if (common.size() == 1) {
                index_t s = common[0];
                triples[s].emplace_back(global_to_local[s].at(r), global_to_local[s].at(c), v);
            } else {
                // equal shares; the last one absorbs the rounding so the
                // lifted sum reproduces v exactly
                double share = v / static_cast<double>(common.size());
                double given = 0.0;
                for (std::size_t i = 0; i < common.size(); ++i) {
                    index_t s = common[i];
                    double piece = (i + 1 < common.size()) ? share : v - given;
                    given += piece;
                    triples[s].emplace_back(global_to_local[s].at(r), global_to_local[s].at(c),
                                            piece);
                }
            }
        }
    }

    pr.locals.resize(static_cast<std::size_t>(n_parts));
    for (index_t s = 0; s < n_parts; ++s) {
        index_t local_n = static_cast<index_t>(part.local_to_global[s].size());
        pr.locals[s].K_local = coo_to_csr(build_coo(triples[s], local_n, local_n));
        pr.locals[s].weights.assign(static_cast<std::size_t>(local_n), 1.0);
        for (index_t i = 0; i < local_n; ++i) {
            index_t e = part.local_to_global[s][i];
            if (part.owners[e].size() > 1) {
                pr.locals[s].weights[i] = 1.0 / static_cast<double>(part.owners[e].size());
            }
        }
        if (!b.empty()) {
            pr.locals[s].b_local.resize(static_cast<std::size_t>(local_n));
            for (index_t i = 0; i < local_n; ++i) {
                pr.locals[s].b_local[i] = b[part.local_to_global[s][i]];
            }
        }
    }
    return pr;
}

PartitionResult partition_matrix(const CsrMatrix& A, index_t n_parts, std::span<const double> b) {
    return partition_matrix(A, band_row_assignment(A.n_rows, n_parts), b);
}

std::vector<index_t> read_assignment_file(const std::string& path, index_t expected_n) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open assignment file '" + path + "'");
    }
    std::vector<index_t> assignment;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        index_t id;
        if (!(is >> id) || (id < 0 && id != kInterfaceEquation)) {
            throw ParseError("expected a subdomain id (or -1 for a shared equation)", line_no);
        }
        assignment.push_back(id);
    }
    if (static_cast<index_t>(assignment.size()) != expected_n) {
        throw DimensionMismatch("assignment file lists " + std::to_string(assignment.size()) +
                                " equations, matrix has " + std::to_string(expected_n));
    }
    return assignment;
}

std::vector<SubdomainStats> partition_stats(const PartitionResult& pr) {
    std::vector<SubdomainStats> stats;
    for (index_t s = 0; s < pr.partition.n_subdomains; ++s) {
        stats.push_back({s, static_cast<index_t>(pr.partition.local_to_global[s].size()),
                         pr.locals[s].K_local.nnz()});
    }
    return stats;
}

std::vector<double> restrict_to_local(const PartitionResult& pr, index_t s,
                                      std::span<const double> global) {
    const auto& l2g = pr.partition.local_to_global[s];
    std::vector<double> local(l2g.size());
    for (std::size_t i = 0; i < l2g.size(); ++i) {
        local[i] = global[l2g[i]];
    }
    return local;
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

struct ChannelMesh::Queue {
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<std::vector<double>> messages;
};

ChannelMesh::ChannelMesh(index_t n_subdomains, std::chrono::milliseconds timeout)
    : n_(n_subdomains), timeout_(timeout) {
    queues_.resize(static_cast<std::size_t>(n_ * n_));
    for (auto& q : queues_) q = std::make_unique<Queue>();
}

ChannelMesh::~ChannelMesh() = default;

void ChannelMesh::send(index_t from, index_t to, std::vector<double> message) {
    Queue& q = *queues_[static_cast<std::size_t>(from * n_ + to)];
    {
        std::lock_guard<std::mutex> lock(q.mutex);
        q.messages.push_back(std::move(message));
    }
    q.ready.notify_one();
}

std::vector<double> ChannelMesh::recv(index_t from, index_t to) {
    Queue& q = *queues_[static_cast<std::size_t>(from * n_ + to)];
    std::unique_lock<std::mutex> lock(q.mutex);
    if (!q.ready.wait_for(lock, timeout_, [&] { return !q.messages.empty(); })) {
        throw ProtocolDeadlock("timed out waiting for message " + std::to_string(from) + " -> " +
                               std::to_string(to));
    }
    std::vector<double> msg = std::move(q.messages.front());
    q.messages.pop_front();
    return msg;
}

// ---------------------------------------------------------------------------
// Collective operations (subdomain-worker view)
// ---------------------------------------------------------------------------

void local_spmv_assemble(const PartitionResult& pr, index_t s, std::span<const double> x_local,
                         std::span<double> y_local, ChannelMesh& mesh, const ExecPolicy& policy) {
    const LocalSystem& local = pr.locals[s];
    const auto& my_interfaces = pr.partition.interfaces[s];
    if (x_local.size() != static_cast<std::size_t>(local.K_local.n_cols)) {
        throw DimensionMismatch("x_local length does not match the local matrix");
    }

    spmv_into(local.K_local, x_local, y_local, policy);

    // post every send before any receive; neighbors in ascending id order
    for (const auto& iface : my_interfaces) {
        std::vector<double> buffer(iface.equation_list.size());
        for (std::size_t j = 0; j < iface.equation_list.size(); ++j) {
            buffer[j] = y_local[iface.equation_list[j]];
        }
        mesh.send(s, iface.neighbor_id, std::move(buffer));
    }

    std::vector<std::vector<double>> received(static_cast<std::size_t>(pr.partition.n_subdomains));
    for (const auto& iface : my_interfaces) {
        std::vector<double> buffer = mesh.recv(iface.neighbor_id, s);
        if (buffer.size() != iface.equation_list.size()) {
            throw BufferLengthMismatch("interface buffer from " +
                                       std::to_string(iface.neighbor_id) + " has " +
                                       std::to_string(buffer.size()) + " entries, expected " +
                                       std::to_string(iface.equation_list.size()));
        }
        received[iface.neighbor_id] = std::move(buffer);
    }

    // Fold each shared equation in ascending owner order, own contribution
    // included at its own rank, so every owner computes the identical sum.
    std::vector<std::size_t> cursor(static_cast<std::size_t>(pr.partition.n_subdomains), 0);
    const auto& l2g = pr.partition.local_to_global[s];
    for (std::size_t i = 0; i < l2g.size(); ++i) {
        const auto& own = pr.partition.owners[l2g[i]];
        if (own.size() == 1) continue;
        double own_part = y_local[i];
        double sum = 0.0;
        for (index_t owner : own) {
            if (owner == s) {
                sum += own_part;
            } else {
                sum += received[owner][cursor[owner]++];
            }
        }
        y_local[i] = sum;
    }
}

double distributed_dot(const PartitionResult& pr, index_t s, std::span<const double> x_local,
                       std::span<const double> y_local, ChannelMesh& mesh,
                       const ExecPolicy& policy) {
    const LocalSystem& local = pr.locals[s];
    if (x_local.size() != y_local.size() || x_local.size() != local.weights.size()) {
        throw DimensionMismatch("distributed dot operands do not match the local system");
    }
    std::vector<double> weighted(y_local.begin(), y_local.end());
    scal_elementwise(weighted, local.weights, policy);
    double partial = dot(x_local, weighted, policy);

    index_t n_parts = pr.partition.n_subdomains;
    if (n_parts == 1) return partial;

    if (s == 0) {
        double total = partial;
        for (index_t t = 1; t < n_parts; ++t) {
            std::vector<double> msg = mesh.recv(t, 0);
            if (msg.size() != 1) throw BufferLengthMismatch("reduction message must hold 1 value");
            total += msg[0];
        }
        for (index_t t = 1; t < n_parts; ++t) {
            mesh.send(0, t, {total});
        }
        return total;
    }
    mesh.send(s, 0, {partial});
    std::vector<double> msg = mesh.recv(0, s);
    if (msg.size() != 1) throw BufferLengthMismatch("reduction message must hold 1 value");
    return msg[0];
}

namespace {

// Runs fn(s) on one thread per subdomain; joins everyone and rethrows the
// lowest-subdomain error.
void run_subdomain_workers(index_t n_parts, const std::function<void(index_t)>& fn) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_parts));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(n_parts));
    for (index_t s = 0; s < n_parts; ++s) {
        workers.emplace_back([&, s] {
            try {
                fn(s);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

std::vector<std::vector<double>> assemble_spmv_all(const PartitionResult& pr,
                                                   const std::vector<std::vector<double>>& x_locals,
                                                   const ExecPolicy& policy) {
    index_t n_parts = pr.partition.n_subdomains;
    ChannelMesh mesh(n_parts);
    std::vector<std::vector<double>> y_locals(static_cast<std::size_t>(n_parts));
    for (index_t s = 0; s < n_parts; ++s) {
        y_locals[s].resize(x_locals[s].size());
    }
    run_subdomain_workers(n_parts, [&](index_t s) {
        local_spmv_assemble(pr, s, x_locals[s], y_locals[s], mesh, policy);
    });
    return y_locals;
}

std::vector<double> distributed_dot_all(const PartitionResult& pr,
                                        const std::vector<std::vector<double>>& x_locals,
                                        const std::vector<std::vector<double>>& y_locals,
                                        const ExecPolicy& policy) {
    index_t n_parts = pr.partition.n_subdomains;
    ChannelMesh mesh(n_parts);
    std::vector<double> results(static_cast<std::size_t>(n_parts));
    run_subdomain_workers(n_parts, [&](index_t s) {
        results[s] = distributed_dot(pr, s, x_locals[s], y_locals[s], mesh, policy);
    });
    return results;
}

// ---------------------------------------------------------------------------
// Sub-structured CG
// ---------------------------------------------------------------------------

SolveReport solve_cg_substructured(const SparseMatrix& A, std::span<const double> b,
                                   std::span<const double> x0,
                                   const std::vector<index_t>& assignment,
                                   const SolverConfig& cfg) {
    if (n_rows(A) != n_cols(A)) {
        throw DimensionMismatch("solver expects a square matrix");
    }
    if (b.size() != static_cast<std::size_t>(n_rows(A)) || b.size() != x0.size()) {
        throw DimensionMismatch("rhs / initial guess length does not match the matrix");
    }
    if (!(cfg.tolerance > 0.0) || cfg.max_iterations < 1) {
        throw Error("solver config requires tolerance > 0 and max_iterations >= 1");
    }
    auto start = std::chrono::steady_clock::now();

    CsrMatrix csr = to_csr(A);
    PartitionResult pr = partition_matrix(csr, assignment, b);
    index_t n_parts = pr.partition.n_subdomains;
    const ExecPolicy& pol = cfg.policy;

    // Jacobi uses the global diagonal; local splitting must not dilute it.
    std::vector<double> inv_diag_global;
    if (cfg.preconditioner == Preconditioner::Jacobi) {
        inv_diag_global = make_jacobi(A).inv_diag;
    }

    ChannelMesh mesh(n_parts);
    std::vector<std::vector<double>> x_locals(static_cast<std::size_t>(n_parts));
    SolveReport report;
    std::mutex report_mutex;

    run_subdomain_workers(n_parts, [&](index_t s) {
        const LocalSystem& local = pr.locals[s];
        const std::size_t ln = local.weights.size();

        std::vector<double> x = restrict_to_local(pr, s, x0);
        std::vector<double> inv_diag;
        if (!inv_diag_global.empty()) {
            inv_diag = restrict_to_local(pr, s, inv_diag_global);
        }

        auto ddot = [&](std::span<const double> u, std::span<const double> v) {
            return distributed_dot(pr, s, u, v, mesh, pol);
        };
        auto precond = [&](std::span<const double> in, std::span<double> out) {
            copy_vec(in, out, pol);
            if (!inv_diag.empty()) scal_elementwise(out, inv_diag, pol);
        };

        std::vector<double> g(ln), z(ln), w(ln), kw(ln);
        // g = K x - b, assembled across interfaces
        local_spmv_assemble(pr, s, x, g, mesh, pol);
        daxpy(-1.0, local.b_local, g, pol);

        double norm_g0 = std::sqrt(ddot(g, g));
        std::vector<double> history;
        index_t iterations = 0;
        bool converged = false;
        double measure = 1.0;

        if (norm_g0 == 0.0) {
            converged = true;
            measure = 0.0;
        } else {
            precond(g, z);
            copy_vec(z, w, pol);
            while (iterations < cfg.max_iterations && !converged) {
                local_spmv_assemble(pr, s, w, kw, mesh, pol);
                double denom = ddot(kw, w);
                if (!std::isfinite(denom)) throw NonFinite("descent denominator non-finite");
                if (std::fabs(denom) < 1e-300) {
                    throw Breakdown("substructured cg: <Kw, w> vanished");
                }
                double rho = -ddot(g, w) / denom;
                if (!std::isfinite(rho)) throw NonFinite("rho non-finite");
                daxpy(rho, w, x, pol);
                daxpy(rho, kw, g, pol);

                precond(g, z);
                double gamma = -ddot(z, kw) / denom;
                if (!std::isfinite(gamma)) throw NonFinite("gamma non-finite");
                axpby(1.0, z, gamma, w, pol);

                measure = std::sqrt(ddot(g, g)) / norm_g0;
                if (!std::isfinite(measure)) throw NonFinite("residual measure non-finite");
                history.push_back(measure);
                ++iterations;
                if (measure <= cfg.tolerance) converged = true;
            }
        }

        x_locals[s] = std::move(x);
        if (s == 0) {
            std::lock_guard<std::mutex> lock(report_mutex);
            report.converged = converged;
            report.iterations = iterations;
            report.residual_history = std::move(history);
            report.final_residual_measure = measure;
        }
    });

    // reassemble: the lowest owner of each equation provides its value
    report.solution.assign(b.size(), 0.0);
    for (index_t s = n_parts - 1; s >= 0; --s) {
        const auto& l2g = pr.partition.local_to_global[s];
        for (std::size_t i = 0; i < l2g.size(); ++i) {
            report.solution[l2g[i]] = x_locals[s][i];
        }
    }

    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

SolveReport solve_cg_substructured(const SparseMatrix& A, std::span<const double> b,
                                   std::span<const double> x0, index_t n_parts,
                                   const SolverConfig& cfg) {
    return solve_cg_substructured(A, b, x0, band_row_assignment(n_rows(A), n_parts), cfg);
}

}  // namespace krysp
