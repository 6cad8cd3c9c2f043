#include "krysp/solvers.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <utility>

#include "krysp/kernels.hpp"

namespace krysp {

namespace {

constexpr double kBreakdownEps = 1e-300;

void check_system(const SparseMatrix& A, std::span<const double> b, std::span<const double> x0,
                  const SolverConfig& cfg) {
    if (n_rows(A) != n_cols(A)) {
        throw DimensionMismatch("solver expects a square matrix");
    }
    if (b.size() != static_cast<std::size_t>(n_rows(A)) || b.size() != x0.size()) {
        throw DimensionMismatch("rhs / initial guess length does not match the matrix");
    }
    if (!(cfg.tolerance > 0.0) || cfg.max_iterations < 1 || cfg.restart < 1 || cfg.stab_l < 1) {
        throw Error("solver config requires tolerance > 0, max_iterations >= 1, restart >= 1, "
                    "stab_l >= 1");
    }
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw NonFinite(std::string(what) + " became non-finite");
    }
}

bool vanishes(double v) { return std::fabs(v) < kBreakdownEps; }

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

// z = M^{-1} r, or a plain copy when unpreconditioned.
void apply_precond(const std::vector<double>& inv_diag, std::span<const double> r,
                   std::span<double> z, const ExecPolicy& policy) {
    copy_vec(r, z, policy);
    if (!inv_diag.empty()) {
        scal_elementwise(z, inv_diag, policy);
    }
}

std::vector<double> maybe_jacobi(const SparseMatrix& A, const SolverConfig& cfg) {
    if (cfg.preconditioner == Preconditioner::Jacobi) {
        return make_jacobi(A).inv_diag;
    }
    return {};
}

// r = b - A x
void initial_residual(const SparseMatrix& A, std::span<const double> b,
                      std::span<const double> x, std::vector<double>& r,
                      const ExecPolicy& policy) {
    spmv_into(A, x, r, policy);
    scale_vec(-1.0, r, policy);
    daxpy(1.0, b, r, policy);
}

}  // namespace

std::vector<double> diagonal_of(const SparseMatrix& A) {
    index_t n = std::min(n_rows(A), n_cols(A));
    std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
    if (const auto* coo = std::get_if<CooMatrix>(&A)) {
        for (index_t k = 0; k < coo->nnz(); ++k) {
            if (coo->row_idx[k] == coo->col_idx[k]) diag[coo->row_idx[k]] += coo->values[k];
        }
    } else if (const auto* csr = std::get_if<CsrMatrix>(&A)) {
        for (index_t r = 0; r < csr->n_rows; ++r) {
            for (index_t k = csr->row_ptr[r]; k < csr->row_ptr[r + 1]; ++k) {
                if (csr->col_idx[k] == r) diag[r] = csr->values[k];
            }
        }
    } else if (const auto* ell = std::get_if<EllMatrix>(&A)) {
        for (index_t r = 0; r < ell->n_rows; ++r) {
            for (index_t slot = 0; slot < ell->width; ++slot) {
                if (ell->jcoef[slot * ell->n_rows + r] == r) {
                    diag[r] = ell->coef[slot * ell->n_rows + r];
                }
            }
        }
    } else {
        const auto& hyb = std::get<HybMatrix>(A);
        auto ell_diag = diagonal_of(SparseMatrix(hyb.ell_part));
        auto coo_diag = diagonal_of(SparseMatrix(hyb.coo_part));
        for (index_t i = 0; i < n; ++i) diag[i] = ell_diag[i] + coo_diag[i];
    }
    return diag;
}

JacobiPreconditioner make_jacobi(const SparseMatrix& A) {
    JacobiPreconditioner p;
    p.inv_diag = diagonal_of(A);
    for (std::size_t i = 0; i < p.inv_diag.size(); ++i) {
        if (p.inv_diag[i] == 0.0) {
            throw Breakdown("zero diagonal entry at row " + std::to_string(i) +
                            "; Jacobi preconditioner undefined");
        }
        p.inv_diag[i] = 1.0 / p.inv_diag[i];
    }
    return p;
}

// ---------------------------------------------------------------------------
// Preconditioned CG
// ---------------------------------------------------------------------------

SolveReport solve_pcg(const SparseMatrix& A, std::span<const double> b,
                      std::span<const double> x0, const SolverConfig& cfg, CgTrace* trace) {
    check_system(A, b, x0, cfg);
    Timer timer;
    const ExecPolicy& pol = cfg.policy;
    const std::size_t n = b.size();
    std::vector<double> inv_diag = maybe_jacobi(A, cfg);

    SolveReport report;
    report.solution.assign(x0.begin(), x0.end());
    std::span<double> x(report.solution);

    std::vector<double> r(n), z(n), p(n), ap(n);
    initial_residual(A, b, x, r, pol);

    double norm_r0 = norm2(r, pol);
    if (norm_r0 == 0.0) norm_r0 = 1.0;

    apply_precond(inv_diag, r, z, pol);
    double rho = dot(r, z, pol);
    double rho_1 = 0.0;
    double norm_r = rho / norm_r0;
    if (norm_r <= cfg.tolerance) {
        report.converged = true;
        report.final_residual_measure = norm_r;
        report.wall_time = timer.seconds();
        return report;
    }

    bool first = true;
    while (report.iterations < cfg.max_iterations && !report.converged) {
        double beta = 0.0;
        if (first) {
            first = false;
        } else {
            beta = rho / rho_1;
            daxpy(beta, p, z, pol);  // z = z + beta*p
        }
        std::swap(z, p);  // p takes over z's storage; z is rebuilt below

        spmv_into(A, p, ap, pol);
        double sigma = dot(p, ap, pol);
        check_finite(sigma, "sigma");
        if (vanishes(sigma)) {
            throw Breakdown("pcg: <p, Ap> vanished before convergence");
        }
        double alpha = rho / sigma;
        check_finite(alpha, "alpha");
        daxpy(alpha, p, x, pol);    // x = x + alpha*p
        daxpy(-alpha, ap, r, pol);  // r = r - alpha*Ap
        rho_1 = rho;

        if (trace) trace->push_back({rho, beta, sigma, alpha});

        apply_precond(inv_diag, r, z, pol);
        rho = dot(r, z, pol);
        check_finite(rho, "rho");
        norm_r = rho / norm_r0;
        report.residual_history.push_back(norm_r);
        ++report.iterations;
        if (norm_r <= cfg.tolerance) {
            report.converged = true;
        }
    }

    report.final_residual_measure = norm_r;
    report.wall_time = timer.seconds();
    return report;
}

// ---------------------------------------------------------------------------
// CG in optimal-descent form
// ---------------------------------------------------------------------------

SolveReport solve_cg_classic(const SparseMatrix& A, std::span<const double> b,
                             std::span<const double> x0, const SolverConfig& cfg) {
    check_system(A, b, x0, cfg);
    Timer timer;
    const ExecPolicy& pol = cfg.policy;
    const std::size_t n = b.size();
    std::vector<double> inv_diag = maybe_jacobi(A, cfg);

    SolveReport report;
    report.solution.assign(x0.begin(), x0.end());
    std::span<double> x(report.solution);

    std::vector<double> g(n), z(n), w(n), kw(n);
    // g = A x - b
    spmv_into(A, x, g, pol);
    daxpy(-1.0, b, g, pol);

    double norm_g0 = norm2(g, pol);
    if (norm_g0 == 0.0) {
        report.converged = true;
        report.wall_time = timer.seconds();
        return report;
    }

    apply_precond(inv_diag, g, z, pol);
    copy_vec(z, w, pol);

    double measure = 1.0;
    while (report.iterations < cfg.max_iterations && !report.converged) {
        spmv_into(A, w, kw, pol);
        double denom = dot(kw, w, pol);
        check_finite(denom, "descent denominator");
        if (vanishes(denom)) {
            throw Breakdown("cg: <Kw, w> vanished before convergence");
        }
        double rho = -dot(g, w, pol) / denom;  // optimal step along w
        check_finite(rho, "rho");
        daxpy(rho, w, x, pol);   // x = x + rho*w
        daxpy(rho, kw, g, pol);  // g = g + rho*Kw

        apply_precond(inv_diag, g, z, pol);
        double gamma = -dot(z, kw, pol) / denom;  // A-orthogonalize against w
        check_finite(gamma, "gamma");
        axpby(1.0, z, gamma, w, pol);  // w = z + gamma*w

        measure = norm2(g, pol) / norm_g0;
        check_finite(measure, "residual measure");
        report.residual_history.push_back(measure);
        ++report.iterations;
        if (measure <= cfg.tolerance) {
            report.converged = true;
        }
    }

    report.final_residual_measure = measure;
    report.wall_time = timer.seconds();
    return report;
}

// ---------------------------------------------------------------------------
// Restarted GCR
// ---------------------------------------------------------------------------

SolveReport solve_gcr(const SparseMatrix& A, std::span<const double> b,
                      std::span<const double> x0, const SolverConfig& cfg) {
    check_system(A, b, x0, cfg);
    Timer timer;
    const ExecPolicy& pol = cfg.policy;
    const std::size_t n = b.size();
    std::vector<double> inv_diag = maybe_jacobi(A, cfg);

    SolveReport report;
    report.solution.assign(x0.begin(), x0.end());
    std::span<double> x(report.solution);

    std::vector<double> raw(n), r(n), w(n), tmp(n);
    initial_residual(A, b, x, raw, pol);
    apply_precond(inv_diag, raw, r, pol);

    double norm_r0 = norm2(r, pol);
    if (norm_r0 == 0.0) {
        report.converged = true;
        report.wall_time = timer.seconds();
        return report;
    }

    // preconditioned operator applied to v
    auto op = [&](std::span<const double> v, std::span<double> out) {
        spmv_into(A, v, tmp, pol);
        apply_precond(inv_diag, tmp, out, pol);
    };

    std::vector<std::vector<double>> dirs;     // p_0..p_{m-1}
    std::vector<std::vector<double>> op_dirs;  // A p_0..A p_{m-1} (preconditioned)
    double measure = 1.0;

    while (report.iterations < cfg.max_iterations && !report.converged) {
        dirs.clear();
        op_dirs.clear();
        dirs.emplace_back(r.begin(), r.end());
        op_dirs.emplace_back(n);
        op(dirs[0], op_dirs[0]);

        for (index_t j = 0; j < cfg.restart; ++j) {
            const auto& p = dirs[j];
            const auto& ap = op_dirs[j];
            double d = dot(ap, ap, pol);
            check_finite(d, "direction norm");
            if (vanishes(d)) {
                throw Breakdown("gcr: direction norm vanished");
            }
            double alpha = dot(r, ap, pol) / d;
            check_finite(alpha, "alpha");
            daxpy(alpha, p, x, pol);
            daxpy(-alpha, ap, r, pol);

            measure = norm2(r, pol) / norm_r0;
            check_finite(measure, "residual measure");
            report.residual_history.push_back(measure);
            ++report.iterations;
            if (measure <= cfg.tolerance) {
                report.converged = true;
                break;
            }
            if (report.iterations >= cfg.max_iterations) break;
            if (j + 1 == cfg.restart) break;  // restart: drop the basis

            // next direction: r orthogonalized against the kept basis in the
            // <A., A.> inner product; its operator image tracked alongside
            op(r, w);
            std::vector<double> p_next(r.begin(), r.end());
            std::vector<double> ap_next(w.begin(), w.end());
            for (index_t i = 0; i <= j; ++i) {
                double beta = dot(w, op_dirs[i], pol) / dot(op_dirs[i], op_dirs[i], pol);
                daxpy(-beta, dirs[i], p_next, pol);
                daxpy(-beta, op_dirs[i], ap_next, pol);
            }
            dirs.push_back(std::move(p_next));
            op_dirs.push_back(std::move(ap_next));
        }
    }

    report.final_residual_measure = measure;
    report.wall_time = timer.seconds();
    return report;
}

// ---------------------------------------------------------------------------
// BiCGStab
// ---------------------------------------------------------------------------

SolveReport solve_bicgstab(const SparseMatrix& A, std::span<const double> b,
                           std::span<const double> x0, const SolverConfig& cfg) {
    check_system(A, b, x0, cfg);
    Timer timer;
    const ExecPolicy& pol = cfg.policy;
    const std::size_t n = b.size();
    std::vector<double> inv_diag = maybe_jacobi(A, cfg);

    SolveReport report;
    report.solution.assign(x0.begin(), x0.end());
    std::span<double> x(report.solution);

    std::vector<double> raw(n), r(n), r_hat(n), p(n), v(n), s(n), t(n), tmp(n);
    initial_residual(A, b, x, raw, pol);
    apply_precond(inv_diag, raw, r, pol);

    double norm_r0 = norm2(r, pol);
    if (norm_r0 == 0.0) {
        report.converged = true;
        report.wall_time = timer.seconds();
        return report;
    }

    auto op = [&](std::span<const double> in, std::span<double> out) {
        spmv_into(A, in, tmp, pol);
        apply_precond(inv_diag, tmp, out, pol);
    };

    copy_vec(r, r_hat, pol);  // shadow residual
    copy_vec(r, p, pol);
    double rho = dot(r_hat, r, pol);
    double measure = 1.0;

    while (report.iterations < cfg.max_iterations && !report.converged) {
        op(p, v);
        double denom = dot(r_hat, v, pol);
        check_finite(denom, "<r_hat, v>");
        if (vanishes(denom)) {
            throw Breakdown("bicgstab: <r_hat, v> vanished");
        }
        double alpha = rho / denom;
        check_finite(alpha, "alpha");

        copy_vec(r, s, pol);
        daxpy(-alpha, v, s, pol);  // s = r - alpha*v
        measure = norm2(s, pol) / norm_r0;
        check_finite(measure, "residual measure");
        if (measure <= cfg.tolerance) {
            daxpy(alpha, p, x, pol);
            report.residual_history.push_back(measure);
            ++report.iterations;
            report.converged = true;
            break;
        }

        op(s, t);
        double tt = dot(t, t, pol);
        if (vanishes(tt)) {
            throw Breakdown("bicgstab: <t, t> vanished");
        }
        double omega = dot(t, s, pol) / tt;
        check_finite(omega, "omega");
        if (vanishes(omega)) {
            throw Breakdown("bicgstab: omega vanished");
        }

        daxpy(alpha, p, x, pol);
        daxpy(omega, s, x, pol);
        copy_vec(s, r, pol);
        daxpy(-omega, t, r, pol);  // r = s - omega*t

        measure = norm2(r, pol) / norm_r0;
        check_finite(measure, "residual measure");
        report.residual_history.push_back(measure);
        ++report.iterations;
        if (measure <= cfg.tolerance) {
            report.converged = true;
            break;
        }

        double rho_new = dot(r_hat, r, pol);
        if (vanishes(rho_new)) {
            throw Breakdown("bicgstab: <r_hat, r> vanished");
        }
        double beta = (rho_new / rho) * (alpha / omega);
        check_finite(beta, "beta");
        daxpy(-omega, v, p, pol);      // p = p - omega*v
        axpby(1.0, r, beta, p, pol);   // p = r + beta*p
        rho = rho_new;
    }

    report.final_residual_measure = measure;
    report.wall_time = timer.seconds();
    return report;
}

// ---------------------------------------------------------------------------
// BiCGStab(l)
// ---------------------------------------------------------------------------

SolveReport solve_bicgstab_l(const SparseMatrix& A, std::span<const double> b,
                             std::span<const double> x0, const SolverConfig& cfg) {
    check_system(A, b, x0, cfg);
    Timer timer;
    const ExecPolicy& pol = cfg.policy;
    const index_t L = cfg.stab_l;
    const std::size_t n = b.size();
    std::vector<double> inv_diag = maybe_jacobi(A, cfg);

    SolveReport report;
    report.solution.assign(x0.begin(), x0.end());
    std::span<double> x(report.solution);

    std::vector<double> raw(n), r_shadow(n), tmp(n);
    std::vector<std::vector<double>> rr(L + 1, std::vector<double>(n));
    std::vector<std::vector<double>> uu(L + 1, std::vector<double>(n, 0.0));

    initial_residual(A, b, x, raw, pol);
    apply_precond(inv_diag, raw, rr[0], pol);

    double norm_r0 = norm2(rr[0], pol);
    if (norm_r0 == 0.0) {
        report.converged = true;
        report.wall_time = timer.seconds();
        return report;
    }
    copy_vec(rr[0], r_shadow, pol);

    auto op = [&](std::span<const double> in, std::span<double> out) {
        spmv_into(A, in, tmp, pol);
        apply_precond(inv_diag, tmp, out, pol);
    };

    double rho0 = 1.0, alpha = 0.0, omega = 1.0;
    double measure = 1.0;
    std::vector<double> sigma(L + 1), gamma_p(L + 1), gamma(L + 1), gamma_pp(L + 1);
    std::vector<std::vector<double>> tau(L + 1, std::vector<double>(L + 1, 0.0));

    while (report.iterations < cfg.max_iterations && !report.converged) {
        rho0 = -omega * rho0;

        // BiCG part: l coupled two-term recurrences driven by the shadow;
        // the residual is checked each step so an exact solve does not push
        // a zero vector into the next recurrence
        for (index_t j = 0; j < L && !report.converged; ++j) {
            double rho1 = dot(rr[j], r_shadow, pol);
            check_finite(rho1, "rho");
            if (vanishes(rho0)) {
                throw Breakdown("bicgstab(l): rho vanished");
            }
            double beta = alpha * rho1 / rho0;
            check_finite(beta, "beta");
            rho0 = rho1;
            for (index_t i = 0; i <= j; ++i) {
                axpby(1.0, rr[i], -beta, uu[i], pol);  // u_i = r_i - beta*u_i
            }
            op(uu[j], uu[j + 1]);
            double g = dot(uu[j + 1], r_shadow, pol);
            if (vanishes(g)) {
                throw Breakdown("bicgstab(l): <u, r_shadow> vanished");
            }
            alpha = rho0 / g;
            check_finite(alpha, "alpha");
            for (index_t i = 0; i <= j; ++i) {
                daxpy(-alpha, uu[i + 1], rr[i], pol);
            }
            op(rr[j], rr[j + 1]);
            daxpy(alpha, uu[0], x, pol);

            measure = norm2(rr[0], pol) / norm_r0;
            check_finite(measure, "residual measure");
            if (measure <= cfg.tolerance) {
                report.converged = true;
            }
        }
        if (report.converged) {
            report.residual_history.push_back(measure);
            ++report.iterations;
            break;
        }

        // Minimal-residual polynomial: modified Gram-Schmidt on r_1..r_l,
        // then back-substitution for the polynomial coefficients.
        for (index_t j = 1; j <= L; ++j) {
            for (index_t i = 1; i < j; ++i) {
                tau[i][j] = dot(rr[j], rr[i], pol) / sigma[i];
                daxpy(-tau[i][j], rr[i], rr[j], pol);
            }
            sigma[j] = dot(rr[j], rr[j], pol);
            if (vanishes(sigma[j])) {
                throw Breakdown("bicgstab(l): minimal-residual system singular");
            }
            gamma_p[j] = dot(rr[0], rr[j], pol) / sigma[j];
        }
        gamma[L] = gamma_p[L];
        omega = gamma[L];
        for (index_t j = L - 1; j >= 1; --j) {
            double s = 0.0;
            for (index_t i = j + 1; i <= L; ++i) s += tau[j][i] * gamma[i];
            gamma[j] = gamma_p[j] - s;
        }
        for (index_t j = 1; j < L; ++j) {
            double s = 0.0;
            for (index_t i = j + 1; i < L; ++i) s += tau[j][i] * gamma[i + 1];
            gamma_pp[j] = gamma[j + 1] + s;
        }

        daxpy(gamma[1], rr[0], x, pol);
        daxpy(-gamma_p[L], rr[L], rr[0], pol);
        daxpy(-gamma[L], uu[L], uu[0], pol);
        for (index_t j = 1; j < L; ++j) {
            daxpy(-gamma[j], uu[j], uu[0], pol);
            daxpy(gamma_pp[j], rr[j], x, pol);
            daxpy(-gamma_p[j], rr[j], rr[0], pol);
        }

        measure = norm2(rr[0], pol) / norm_r0;
        check_finite(measure, "residual measure");
        report.residual_history.push_back(measure);
        ++report.iterations;
        if (measure <= cfg.tolerance) {
            report.converged = true;
        }
    }

    report.final_residual_measure = measure;
    report.wall_time = timer.seconds();
    return report;
}

// ---------------------------------------------------------------------------
// Transpose-free QMR
// ---------------------------------------------------------------------------

SolveReport solve_tfqmr(const SparseMatrix& A, std::span<const double> b,
                        std::span<const double> x0, const SolverConfig& cfg) {
    check_system(A, b, x0, cfg);
    Timer timer;
    const ExecPolicy& pol = cfg.policy;
    const std::size_t n = b.size();
    std::vector<double> inv_diag = maybe_jacobi(A, cfg);

    SolveReport report;
    report.solution.assign(x0.begin(), x0.end());
    std::span<double> x(report.solution);

    std::vector<double> raw(n), r0(n), w(n), u(n), u_next(n), v(n), d(n, 0.0);
    std::vector<double> bu(n), bu_next(n), tmp(n), res(n);

    initial_residual(A, b, x, raw, pol);
    apply_precond(inv_diag, raw, r0, pol);

    double norm_r0 = norm2(r0, pol);
    if (norm_r0 == 0.0) {
        report.converged = true;
        report.wall_time = timer.seconds();
        return report;
    }

    auto op = [&](std::span<const double> in, std::span<double> out) {
        spmv_into(A, in, tmp, pol);
        apply_precond(inv_diag, tmp, out, pol);
    };
    auto true_measure = [&]() {
        spmv_into(A, x, tmp, pol);
        scale_vec(-1.0, tmp, pol);
        daxpy(1.0, b, tmp, pol);
        apply_precond(inv_diag, tmp, res, pol);
        return norm2(res, pol) / norm_r0;
    };

    copy_vec(r0, w, pol);
    copy_vec(r0, u, pol);
    op(u, v);
    copy_vec(v, bu, pol);  // v == B*u at startup
    double tau = norm_r0;
    double theta = 0.0, eta = 0.0;
    double rho = dot(r0, r0, pol);
    double alpha = 0.0;
    double measure = 1.0;

    for (index_t m = 0; report.iterations < cfg.max_iterations && !report.converged; ++m) {
        bool even = (m % 2 == 0);
        if (even) {
            double denom = dot(v, r0, pol);
            if (vanishes(denom)) {
                throw Breakdown("tfqmr: <v, r_shadow> vanished");
            }
            alpha = rho / denom;
            check_finite(alpha, "alpha");
            copy_vec(u, u_next, pol);
            daxpy(-alpha, v, u_next, pol);  // u_{m+1} = u_m - alpha*v
        } else {
            op(u, bu);
        }
        daxpy(-alpha, bu, w, pol);  // w = w - alpha*B*u_m

        // d = u_m + (theta^2 * eta / alpha) * d
        double scale = (theta * theta * eta) / alpha;
        check_finite(scale, "direction scale");
        axpby(1.0, u, scale, d, pol);

        theta = norm2(w, pol) / tau;
        double c = 1.0 / std::sqrt(1.0 + theta * theta);
        tau = tau * theta * c;
        eta = c * c * alpha;
        check_finite(tau, "tau");
        daxpy(eta, d, x, pol);

        // Quasi-residual bound; confirm with the true residual before
        // declaring convergence.
        double bound = tau * std::sqrt(static_cast<double>(m + 2)) / norm_r0;
        if (bound <= cfg.tolerance) {
            measure = true_measure();
            if (measure <= cfg.tolerance) {
                report.residual_history.push_back(measure);
                ++report.iterations;
                report.converged = true;
                break;
            }
        }

        if (!even) {
            double rho_new = dot(w, r0, pol);
            if (vanishes(rho_new)) {
                throw Breakdown("tfqmr: rho vanished");
            }
            double beta = rho_new / rho;
            check_finite(beta, "beta");
            rho = rho_new;
            copy_vec(w, u_next, pol);
            daxpy(beta, u, u_next, pol);  // u_{m+1} = w + beta*u_m
            op(u_next, bu_next);
            // v = B*u_{m+1} + beta*(B*u_m + beta*v)
            axpby(beta, bu, beta * beta, v, pol);
            daxpy(1.0, bu_next, v, pol);
            std::swap(bu, bu_next);

            measure = true_measure();
            check_finite(measure, "residual measure");
            report.residual_history.push_back(measure);
            ++report.iterations;
            if (measure <= cfg.tolerance) {
                report.converged = true;
            }
        }
        std::swap(u, u_next);
    }

    report.final_residual_measure = measure;
    report.wall_time = timer.seconds();
    return report;
}

// ---------------------------------------------------------------------------
// Shadow-residual conjugate residual
// ---------------------------------------------------------------------------

SolveReport solve_bicgcr(const SparseMatrix& A, std::span<const double> b,
                         std::span<const double> x0, const SolverConfig& cfg) {
    check_system(A, b, x0, cfg);
    Timer timer;
    const ExecPolicy& pol = cfg.policy;
    const std::size_t n = b.size();
    std::vector<double> inv_diag = maybe_jacobi(A, cfg);

    SolveReport report;
    report.solution.assign(x0.begin(), x0.end());
    std::span<double> x(report.solution);

    // The shadow recurrences run on the transposed operator; for a symmetric
    // matrix they reproduce the primal ones bit-for-bit and the method is CR.
    CsrMatrix at = csr_transpose(to_csr(A));
    SparseMatrix at_m(std::move(at));

    std::vector<double> raw(n), z(n), zt(n), p(n), pt(n), bz(n), bp(n), btpt(n), tmp(n);
    initial_residual(A, b, x, raw, pol);
    apply_precond(inv_diag, raw, z, pol);

    double norm_z0 = norm2(z, pol);
    if (norm_z0 == 0.0) {
        report.converged = true;
        report.wall_time = timer.seconds();
        return report;
    }

    auto op = [&](std::span<const double> in, std::span<double> out) {
        spmv_into(A, in, tmp, pol);
        apply_precond(inv_diag, tmp, out, pol);
    };
    auto op_t = [&](std::span<const double> in, std::span<double> out) {
        spmv_into(at_m, in, tmp, pol);
        apply_precond(inv_diag, tmp, out, pol);
    };

    copy_vec(z, zt, pol);
    copy_vec(z, p, pol);
    copy_vec(z, pt, pol);
    op(z, bz);
    copy_vec(bz, bp, pol);
    double num = dot(zt, bz, pol);
    double measure = 1.0;

    while (report.iterations < cfg.max_iterations && !report.converged) {
        op_t(pt, btpt);
        double denom = dot(btpt, bp, pol);
        check_finite(denom, "<B'p', Bp>");
        if (vanishes(denom)) {
            throw Breakdown("bicgcr: direction denominator vanished");
        }
        double alpha = num / denom;
        check_finite(alpha, "alpha");

        daxpy(alpha, p, x, pol);
        daxpy(-alpha, bp, z, pol);
        daxpy(-alpha, btpt, zt, pol);

        measure = norm2(z, pol) / norm_z0;
        check_finite(measure, "residual measure");
        report.residual_history.push_back(measure);
        ++report.iterations;
        if (measure <= cfg.tolerance) {
            report.converged = true;
            break;
        }

        op(z, bz);
        double num_new = dot(zt, bz, pol);
        check_finite(num_new, "<z', Bz>");
        if (vanishes(num)) {
            throw Breakdown("bicgcr: <z', Bz> vanished");
        }
        double beta = num_new / num;
        check_finite(beta, "beta");
        axpby(1.0, z, beta, p, pol);     // p  = z  + beta*p
        axpby(1.0, zt, beta, pt, pol);   // p' = z' + beta*p'
        axpby(1.0, bz, beta, bp, pol);   // Bp = Bz + beta*Bp
        num = num_new;
    }

    report.final_residual_measure = measure;
    report.wall_time = timer.seconds();
    return report;
}

}  // namespace krysp
