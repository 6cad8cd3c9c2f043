#pragma once

#include <span>
#include <vector>

#include "krysp/exec.hpp"
#include "krysp/formats.hpp"

namespace krysp {

enum class Preconditioner { None, Jacobi };

struct SolverConfig {
    double tolerance = 1e-6;
    index_t max_iterations = 30000;
    Preconditioner preconditioner = Preconditioner::Jacobi;
    index_t restart = 50;  // GCR basis length
    index_t stab_l = 1;    // BiCGStab(l) polynomial degree, 1..9
    ExecPolicy policy;
};

struct SolveReport {
    bool converged = false;
    index_t iterations = 0;
    double final_residual_measure = 0.0;
    std::vector<double> residual_history;  // one measure per iteration
    double wall_time = 0.0;                // seconds
    std::vector<double> solution;
};

/// Diagonal (Jacobi) preconditioner; construction fails on a zero diagonal.
struct JacobiPreconditioner {
    std::vector<double> inv_diag;
};

JacobiPreconditioner make_jacobi(const SparseMatrix& A);

/// Diagonal of A, any storage format.
std::vector<double> diagonal_of(const SparseMatrix& A);

/// Per-iteration scalars of the preconditioned-CG recurrence, recordable for
/// step-trace comparison against an independent straight-line run.
struct CgTraceEntry {
    double rho;
    double beta;
    double sigma;
    double alpha;
};
using CgTrace = std::vector<CgTraceEntry>;

/// Preconditioned conjugate gradient. Convergence measure is rho / norm_r0
/// with rho = <r, z> and norm_r0 = ||b - A x0|| (1 if zero), evaluated on the
/// freshest residual of each iteration.
SolveReport solve_pcg(const SparseMatrix& A, std::span<const double> b,
                      std::span<const double> x0, const SolverConfig& cfg,
                      CgTrace* trace = nullptr);

/// Optimal-descent formulation of CG: tracks the gradient g = Ax - b and a
/// direction w re-orthogonalized against the previous one in the A-inner
/// product. Convergence on ||g|| / ||g0||. The reference for the
/// sub-structured solver.
SolveReport solve_cg_classic(const SparseMatrix& A, std::span<const double> b,
                             std::span<const double> x0, const SolverConfig& cfg);

/// Restarted generalized conjugate residual, basis length cfg.restart.
SolveReport solve_gcr(const SparseMatrix& A, std::span<const double> b,
                      std::span<const double> x0, const SolverConfig& cfg);

/// BiCGStab with shadow residual fixed to the initial residual.
SolveReport solve_bicgstab(const SparseMatrix& A, std::span<const double> b,
                           std::span<const double> x0, const SolverConfig& cfg);

/// BiCGStab(l): l BiCG steps per cycle followed by a degree-l minimal-residual
/// polynomial update; l = 1 coincides with BiCGStab up to roundoff.
/// Reported iterations are completed cycles.
SolveReport solve_bicgstab_l(const SparseMatrix& A, std::span<const double> b,
                             std::span<const double> x0, const SolverConfig& cfg);

/// Transpose-free QMR; one iteration covers the even/odd half-step pair.
SolveReport solve_tfqmr(const SparseMatrix& A, std::span<const double> b,
                        std::span<const double> x0, const SolverConfig& cfg);

/// Shadow-residual conjugate residual method. With a symmetric matrix the
/// shadow sequence collapses onto the primal one and the method is plain CR,
/// tracking CG iteration counts on SPD systems.
SolveReport solve_bicgcr(const SparseMatrix& A, std::span<const double> b,
                         std::span<const double> x0, const SolverConfig& cfg);

}  // namespace krysp
