#pragma once

#include <chrono>
#include <memory>
#include <span>
#include <vector>

#include "krysp/formats.hpp"
#include "krysp/solvers.hpp"

namespace krysp {

/// One interface of a subdomain: the neighbor and the local equation indices
/// shared with it. Both sides list the same global equations in the same
/// (ascending global) order.
struct InterfaceDescriptor {
    index_t neighbor_id = -1;
    std::vector<index_t> equation_list;  // local indices
};

struct Partition {
    index_t n_subdomains = 0;
    /// Sorted owner set per global equation; interior equations have exactly
    /// one owner.
    std::vector<std::vector<index_t>> owners;
    std::vector<std::vector<index_t>> local_to_global;       // per subdomain
    std::vector<std::vector<InterfaceDescriptor>> interfaces;  // per subdomain, ascending neighbor
};

/// Local block of the split system. The lifted sum of K_local over all
/// subdomains reproduces the global matrix coefficient-for-coefficient;
/// weights are 1 on interior equations and 1/#owners on interface equations
/// so that weighted sums do not double-count shared entries.
struct LocalSystem {
    CsrMatrix K_local;
    std::vector<double> b_local;
    std::vector<double> weights;
};

struct PartitionResult {
    Partition partition;
    std::vector<LocalSystem> locals;
};

/// Assignment value marking an equation as explicitly shared: it joins every
/// subdomain it couples to instead of being owned by one.
inline constexpr index_t kInterfaceEquation = -1;

/// Contiguous band-row assignment of n equations to n_parts subdomains.
std::vector<index_t> band_row_assignment(index_t n, index_t n_parts);

/// Splits A (and optionally b) by an explicit per-equation assignment. An
/// equation becomes interface as soon as it couples to an equation assigned
/// elsewhere; coefficients between shared equations are divided over the
/// common owners with an exactly-compensated last share.
PartitionResult partition_matrix(const CsrMatrix& A, const std::vector<index_t>& assignment,
                                 std::span<const double> b = {});
PartitionResult partition_matrix(const CsrMatrix& A, index_t n_parts,
                                 std::span<const double> b = {});

struct SubdomainStats {
    index_t subdomain = 0;
    index_t dof = 0;
    index_t nnz = 0;
};

/// Assignment file: one subdomain id per line, one line per equation.
std::vector<index_t> read_assignment_file(const std::string& path, index_t expected_n);

std::vector<SubdomainStats> partition_stats(const PartitionResult& pr);

std::vector<double> restrict_to_local(const PartitionResult& pr, index_t s,
                                      std::span<const double> global);

/// Message mesh between subdomain workers: one FIFO queue per (from, to)
/// pair. recv blocks up to the timeout and then reports a deadlock.
class ChannelMesh {
public:
    explicit ChannelMesh(index_t n_subdomains,
                         std::chrono::milliseconds timeout = std::chrono::milliseconds(10000));
    ~ChannelMesh();

    void send(index_t from, index_t to, std::vector<double> message);
    std::vector<double> recv(index_t from, index_t to);

    index_t size() const { return n_; }

private:
    index_t n_;
    std::chrono::milliseconds timeout_;
    struct Queue;
    std::vector<std::unique_ptr<Queue>> queues_;
};

/// Local product plus interface assembly, called concurrently by every
/// subdomain worker. Sends the interface restriction of K_local * x_local to
/// each neighbor, receives theirs, and folds every shared equation in
/// ascending owner order so all owners end up with bit-identical values.
void local_spmv_assemble(const PartitionResult& pr, index_t s, std::span<const double> x_local,
                         std::span<double> y_local, ChannelMesh& mesh, const ExecPolicy& policy);

/// Weighted dot product over the split vectors: local partials are gathered
/// in subdomain order on subdomain 0 and the folded value is broadcast, so
/// every worker returns the same double.
double distributed_dot(const PartitionResult& pr, index_t s, std::span<const double> x_local,
                       std::span<const double> y_local, ChannelMesh& mesh,
                       const ExecPolicy& policy);

/// Conveniences that spawn one worker per subdomain (used by tests).
std::vector<std::vector<double>> assemble_spmv_all(const PartitionResult& pr,
                                                   const std::vector<std::vector<double>>& x_locals,
                                                   const ExecPolicy& policy);
std::vector<double> distributed_dot_all(const PartitionResult& pr,
                                        const std::vector<std::vector<double>>& x_locals,
                                        const std::vector<std::vector<double>>& y_locals,
                                        const ExecPolicy& policy);

/// Sub-structured CG: one worker per subdomain running the optimal-descent
/// recurrences with assembled local products and distributed dots. With a
/// single subdomain the report coincides with solve_cg_classic.
SolveReport solve_cg_substructured(const SparseMatrix& A, std::span<const double> b,
                                   std::span<const double> x0,
                                   const std::vector<index_t>& assignment,
                                   const SolverConfig& cfg);
SolveReport solve_cg_substructured(const SparseMatrix& A, std::span<const double> b,
                                   std::span<const double> x0, index_t n_parts,
                                   const SolverConfig& cfg);

}  // namespace krysp
