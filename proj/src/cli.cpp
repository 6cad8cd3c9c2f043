#include "krysp/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "krysp/autotune.hpp"
#include "krysp/formats.hpp"
#include "krysp/generators.hpp"
#include "krysp/kernels.hpp"
#include "krysp/matrix_market.hpp"
#include "krysp/solvers.hpp"
#include "krysp/stats.hpp"
#include "krysp/substructure.hpp"

namespace krysp {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

std::string basename_of(const std::string& path) {
    auto pos = path.find_last_of("/\\");
    std::string name = (pos == std::string::npos) ? path : path.substr(pos + 1);
    auto dot = name.rfind(".mtx");
    if (dot != std::string::npos && dot + 4 == name.size()) name = name.substr(0, dot);
    return name;
}

Format parse_format(const std::string& name) {
    if (name == "coo") return Format::Coo;
    if (name == "csr") return Format::Csr;
    if (name == "ell") return Format::Ell;
    if (name == "hyb") return Format::Hyb;
    throw Error("unknown format '" + name + "'");
}

const char* format_name(Format f) {
    switch (f) {
        case Format::Coo: return "coo";
        case Format::Csr: return "csr";
        case Format::Ell: return "ell";
        case Format::Hyb: return "hyb";
    }
    return "?";
}

GridStrategy parse_strategy(const std::string& name) {
    if (name == "flat") return GridStrategy::FlatX;
    if (name == "square") return GridStrategy::Square;
    throw Error("unknown grid strategy '" + name + "'");
}

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

nlohmann::json policy_json(const ExecPolicy& p) {
    return {
        {"block_size", p.block_size},
        {"workers_per_row", p.workers_per_row},
        {"strategy", p.grid_strategy == GridStrategy::FlatX ? "flat" : "square"},
        {"worker_count", p.effective_workers()},
    };
}

// Everything needed to replay a run.
nlohmann::json manifest_json(int argc, const char* const* argv, const std::string& matrix_path,
                             const std::string& format, const ExecPolicy& policy,
                             const nlohmann::json& solver_cfg) {
    std::ostringstream cmd;
    for (int i = 0; i < argc; ++i) {
        if (i) cmd << ' ';
        cmd << argv[i];
    }
    return {
        {"command", cmd.str()},       {"matrix", matrix_path},
        {"format", format},           {"policy", policy_json(policy)},
        {"solver", solver_cfg},       {"seed", 0},
        {"version", kVersion},        {"timestamp", timestamp_utc()},
    };
}

nlohmann::json report_json(const SolveReport& report) {
    return {
        {"converged", report.converged},
        {"iterations", report.iterations},
        {"final_residual_measure", report.final_residual_measure},
        {"residual_history", report.residual_history},
        {"wall_time_s", report.wall_time},
    };
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
    if (!out) throw Error("write to '" + path + "' failed");
}

std::vector<double> make_rhs(const std::string& rhs_spec, index_t n) {
    if (rhs_spec == "ones") {
        return std::vector<double>(static_cast<std::size_t>(n), 1.0);
    }
    std::ifstream in(rhs_spec);
    if (!in) throw Error("cannot open rhs file '" + rhs_spec + "'");
    std::vector<double> rhs;
    double v;
    while (in >> v) rhs.push_back(v);
    if (static_cast<index_t>(rhs.size()) != n) {
        throw DimensionMismatch("rhs file has " + std::to_string(rhs.size()) +
                                " values, matrix needs " + std::to_string(n));
    }
    return rhs;
}

struct SolveOptions {
    std::string input;
    std::string method = "cg";
    index_t stab_l = 1;
    index_t restart = 50;
    std::string precond = "jacobi";
    double tol = 1e-6;
    index_t max_iter = 30000;
    std::string format = "csr";
    std::string rhs = "ones";
    std::string report_path;
    index_t block_size = 256;
    index_t workers_per_row = 8;
    std::string strategy = "flat";
};

void add_solver_flags(CLI::App* cmd, SolveOptions& opt) {
    cmd->add_option("--l", opt.stab_l, "stabilization degree for bicgstabl")->check(CLI::Range(1, 9));
    cmd->add_option("--restart", opt.restart, "GCR restart length")->check(CLI::PositiveNumber);
    cmd->add_option("--precond", opt.precond)->check(CLI::IsMember({"none", "jacobi"}));
    cmd->add_option("--tol", opt.tol, "residual tolerance");
    cmd->add_option("--max-iter", opt.max_iter)->check(CLI::PositiveNumber);
    cmd->add_option("--format", opt.format)->check(CLI::IsMember({"coo", "csr", "ell", "hyb"}));
    cmd->add_option("--rhs", opt.rhs, "'ones' or a file with one value per line");
    cmd->add_option("--report", opt.report_path, "write the solve report as JSON");
    cmd->add_option("--block-size", opt.block_size)->check(CLI::IsMember({32, 64, 128, 256, 512, 1024}));
    cmd->add_option("--workers-per-row", opt.workers_per_row)->check(CLI::IsMember({1, 2, 4, 8, 16, 32}));
    cmd->add_option("--strategy", opt.strategy)->check(CLI::IsMember({"flat", "square"}));
}

SolverConfig solver_config_of(const SolveOptions& opt) {
    SolverConfig cfg;
    cfg.tolerance = opt.tol;
    cfg.max_iterations = opt.max_iter;
    cfg.preconditioner = opt.precond == "jacobi" ? Preconditioner::Jacobi : Preconditioner::None;
    cfg.restart = opt.restart;
    cfg.stab_l = opt.stab_l;
    cfg.policy.block_size = opt.block_size;
    cfg.policy.workers_per_row = opt.workers_per_row;
    cfg.policy.grid_strategy = parse_strategy(opt.strategy);
    return cfg;
}

nlohmann::json solver_cfg_json(const SolveOptions& opt) {
    return {
        {"method", opt.method}, {"tol", opt.tol},         {"max_iter", opt.max_iter},
        {"precond", opt.precond}, {"restart", opt.restart}, {"l", opt.stab_l},
        {"rhs", opt.rhs},
    };
}

SolveReport run_solver(const std::string& method, const SparseMatrix& A,
                       const std::vector<double>& b, const std::vector<double>& x0,
                       const SolverConfig& cfg) {
    if (method == "cg") return solve_pcg(A, b, x0, cfg);
    if (method == "gcr") return solve_gcr(A, b, x0, cfg);
    if (method == "bicgcr") return solve_bicgcr(A, b, x0, cfg);
    if (method == "tfqmr") return solve_tfqmr(A, b, x0, cfg);
    if (method == "bicgstab") return solve_bicgstab(A, b, x0, cfg);
    if (method == "bicgstabl") return solve_bicgstab_l(A, b, x0, cfg);
    throw Error("unknown method '" + method + "'");
}

void print_solve_summary(const SolveReport& report, const std::string& method) {
    std::cout << "method      " << method << '\n'
              << "converged   " << (report.converged ? "yes" : "no") << '\n'
              << "iterations  " << report.iterations << '\n'
              << "residual    " << report.final_residual_measure << '\n'
              << "time (s)    " << report.wall_time << '\n';
}

int do_convert(const std::string& input, const std::string& to, index_t hyb_width,
               const std::string& out_path) {
    CooMatrix coo = read_matrix_market(input);
    Format target = parse_format(to);
    SparseMatrix converted = convert(SparseMatrix(std::move(coo)), target, hyb_width);

    if (target == Format::Coo) {
        write_matrix_market(out_path, std::get<CooMatrix>(converted));
        return kExitOk;
    }
    // compressed formats are serialized as JSON
    nlohmann::json j;
    j["schema"] = std::string("krysp/matrix-") + format_name(target) + "/1";
    if (const auto* csr = std::get_if<CsrMatrix>(&converted)) {
        j["n_rows"] = csr->n_rows;
        j["n_cols"] = csr->n_cols;
        j["row_ptr"] = csr->row_ptr;
        j["col_idx"] = csr->col_idx;
        j["values"] = csr->values;
    } else if (const auto* ell = std::get_if<EllMatrix>(&converted)) {
        j["n_rows"] = ell->n_rows;
        j["n_cols"] = ell->n_cols;
        j["width"] = ell->width;
        j["coef"] = ell->coef;
        j["jcoef"] = ell->jcoef;
    } else {
        const auto& hyb = std::get<HybMatrix>(converted);
        j["n_rows"] = hyb.n_rows();
        j["n_cols"] = hyb.n_cols();
        j["ell"] = {{"width", hyb.ell_part.width},
                    {"coef", hyb.ell_part.coef},
                    {"jcoef", hyb.ell_part.jcoef}};
        j["coo"] = {{"row_idx", hyb.coo_part.row_idx},
                    {"col_idx", hyb.coo_part.col_idx},
                    {"values", hyb.coo_part.values}};
    }
    write_text_file(out_path, j.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"sparse linear algebra toolkit: formats, tuned kernels, Krylov solvers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // convert
    std::string cv_in, cv_to, cv_out;
    index_t cv_hyb_width = kHybAutoWidth;
    auto* convert_cmd = app.add_subcommand("convert", "convert a Matrix Market file");
    convert_cmd->add_option("input", cv_in)->required();
    convert_cmd->add_option("--to", cv_to)->required()->check(CLI::IsMember({"coo", "csr", "ell", "hyb"}));
    convert_cmd->add_option("--hyb-width", cv_hyb_width, "ELL width of the hybrid split");
    convert_cmd->add_option("--out", cv_out)->required();

    // stats
    std::string st_in;
    bool st_json = false;
    auto* stats_cmd = app.add_subcommand("stats", "matrix shape statistics");
    stats_cmd->add_option("input", st_in)->required();
    stats_cmd->add_flag("--json", st_json);

    // spmv-bench
    std::string sb_in, sb_format = "csr", sb_strategy = "flat";
    index_t sb_block = 256, sb_tw = 8, sb_reps = 10;
    bool sb_json = false;
    auto* bench_cmd = app.add_subcommand("spmv-bench", "time one SpMV configuration");
    bench_cmd->add_option("input", sb_in)->required();
    bench_cmd->add_option("--format", sb_format)->check(CLI::IsMember({"coo", "csr", "ell", "hyb"}));
    bench_cmd->add_option("--block-size", sb_block)->check(CLI::IsMember({32, 64, 128, 256, 512, 1024}));
    bench_cmd->add_option("--workers-per-row", sb_tw)->check(CLI::IsMember({1, 2, 4, 8, 16, 32}));
    bench_cmd->add_option("--strategy", sb_strategy)->check(CLI::IsMember({"flat", "square"}));
    bench_cmd->add_option("--reps", sb_reps, "minimum repetitions")->check(CLI::PositiveNumber);
    bench_cmd->add_flag("--json", sb_json);

    // tune
    std::string tn_in, tn_out;
    bool tn_json = false;
    auto* tune_cmd = app.add_subcommand("tune", "search the policy grid for the fastest SpMV");
    tune_cmd->add_option("input", tn_in)->required();
    tune_cmd->add_flag("--json", tn_json);
    tune_cmd->add_option("--out", tn_out, "write the full table (CSV, or JSON with --json)");

    // solve
    SolveOptions so;
    auto* solve_cmd = app.add_subcommand("solve", "solve A x = b with a Krylov method");
    solve_cmd->add_option("input", so.input)->required();
    solve_cmd->add_option("--method", so.method)
        ->required()
        ->check(CLI::IsMember({"cg", "gcr", "bicgcr", "tfqmr", "bicgstab", "bicgstabl"}));
    add_solver_flags(solve_cmd, so);

    // partition
    std::string pt_in, pt_assign;
    index_t pt_parts = 1;
    auto* part_cmd = app.add_subcommand("partition", "split into subdomains and report sizes");
    part_cmd->add_option("input", pt_in)->required();
    part_cmd->add_option("--parts", pt_parts)->required()->check(CLI::PositiveNumber);
    part_cmd->add_option("--assignment", pt_assign, "per-equation subdomain id file");

    // solve-par
    SolveOptions sp;
    std::string sp_assign;
    index_t sp_parts = 1;
    auto* par_cmd = app.add_subcommand("solve-par", "sub-structured parallel CG");
    par_cmd->add_option("input", sp.input)->required();
    par_cmd->add_option("--parts", sp_parts)->required()->check(CLI::PositiveNumber);
    par_cmd->add_option("--assignment", sp_assign, "per-equation subdomain id file");
    add_solver_flags(par_cmd, sp);

    // gen
    std::string gn_kind, gn_out;
    index_t gn_n = 10;
    auto* gen_cmd = app.add_subcommand("gen", "write a generated test matrix");
    gen_cmd->add_option("kind", gn_kind)->required()
        ->check(CLI::IsMember({"poisson2d", "laplace1d", "convdiff2d"}));
    gen_cmd->add_option("n", gn_n)->required()->check(CLI::PositiveNumber);
    gen_cmd->add_option("out", gn_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (convert_cmd->parsed()) {
            return do_convert(cv_in, cv_to, cv_hyb_width, cv_out);
        }

        if (stats_cmd->parsed()) {
            CooMatrix m = read_matrix_market(st_in);
            MatrixStats s = compute_stats(SparseMatrix(std::move(m)));
            std::cout << (st_json ? stats_json(s, basename_of(st_in)) + "\n"
                                  : stats_text(s, basename_of(st_in)));
            return kExitOk;
        }

        if (bench_cmd->parsed()) {
            CooMatrix coo = read_matrix_market(sb_in);
            SparseMatrix m = convert(SparseMatrix(std::move(coo)), parse_format(sb_format));
            ExecPolicy policy;
            policy.block_size = sb_block;
            policy.workers_per_row = sb_tw;
            policy.grid_strategy = parse_strategy(sb_strategy);
            TimingProtocol protocol;
            protocol.min_repetitions = sb_reps;
            std::vector<double> x(static_cast<std::size_t>(n_cols(m)), 1.0);
            std::vector<double> y(static_cast<std::size_t>(n_rows(m)), 0.0);
            BenchRecord record =
                time_kernel([&] { spmv_into(m, x, y, policy); }, protocol,
                            probe_clock_resolution(), std::string("spmv-") + sb_format,
                            basename_of(sb_in));
            record.policy = policy;
            std::cout << (sb_json ? bench_table_json({record}) + "\n" : bench_table_csv({record}));
            return kExitOk;
        }

        if (tune_cmd->parsed()) {
            CooMatrix coo = read_matrix_market(tn_in);
            SparseMatrix m(coo_to_csr(coo));
            TuneResult result =
                tune_spmv(m, default_policy_grid(), TimingProtocol{}, basename_of(tn_in));
            std::string table = tn_json ? tune_result_json(result) + "\n"
                                        : bench_table_csv(result.table);
            if (!tn_out.empty()) {
                write_text_file(tn_out, table);
            } else {
                std::cout << table;
            }
            std::cout << "best <" << result.best_policy.block_size << ","
                      << result.best_policy.workers_per_row << ","
                      << (result.best_policy.grid_strategy == GridStrategy::FlatX ? "flat"
                                                                                  : "square")
                      << "> speedup vs default " << result.speedup_vs_default << "\n";
            return kExitOk;
        }

        if (solve_cmd->parsed()) {
            CooMatrix coo = read_matrix_market(so.input);
            SparseMatrix m = convert(SparseMatrix(std::move(coo)), parse_format(so.format));
            std::vector<double> b = make_rhs(so.rhs, n_rows(m));
            std::vector<double> x0(b.size(), 0.0);
            SolverConfig cfg = solver_config_of(so);

            int code = kExitOk;
            SolveReport report;
            try {
                report = run_solver(so.method, m, b, x0, cfg);
            } catch (const Breakdown& e) {
                std::cerr << "breakdown: " << e.what() << "\n";
                return kExitNumerical;
            } catch (const NonFinite& e) {
                std::cerr << "non-finite iterate: " << e.what() << "\n";
                return kExitNumerical;
            }
            if (!report.converged) code = kExitNumerical;

            print_solve_summary(report, so.method);
            if (!so.report_path.empty()) {
                nlohmann::json j;
                j["schema"] = "krysp/solve-report/1";
                j["manifest"] = manifest_json(argc, argv, so.input, so.format, cfg.policy,
                                              solver_cfg_json(so));
                j["report"] = report_json(report);
                write_text_file(so.report_path, j.dump(2) + "\n");
            }
            return code;
        }

        if (part_cmd->parsed()) {
            CooMatrix coo = read_matrix_market(pt_in);
            CsrMatrix csr = coo_to_csr(coo);
            std::vector<index_t> assignment =
                pt_assign.empty() ? band_row_assignment(csr.n_rows, pt_parts)
                                  : read_assignment_file(pt_assign, csr.n_rows);
            PartitionResult pr = partition_matrix(csr, assignment);
            std::cout << "subdomain,dof,nnz\n";
            for (const SubdomainStats& s : partition_stats(pr)) {
                std::cout << s.subdomain << ',' << s.dof << ',' << s.nnz << '\n';
            }
            return kExitOk;
        }

        if (par_cmd->parsed()) {
            CooMatrix coo = read_matrix_market(sp.input);
            CsrMatrix csr = coo_to_csr(coo);
            std::vector<index_t> assignment =
                sp_assign.empty() ? band_row_assignment(csr.n_rows, sp_parts)
                                  : read_assignment_file(sp_assign, csr.n_rows);
            PartitionResult pr = partition_matrix(csr, assignment);
            std::vector<double> b = make_rhs(sp.rhs, csr.n_rows);
            std::vector<double> x0(b.size(), 0.0);
            SolverConfig cfg = solver_config_of(sp);

            SolveReport report;
            try {
                report = solve_cg_substructured(SparseMatrix(csr), b, x0, assignment, cfg);
            } catch (const Breakdown& e) {
                std::cerr << "breakdown: " << e.what() << "\n";
                return kExitNumerical;
            } catch (const NonFinite& e) {
                std::cerr << "non-finite iterate: " << e.what() << "\n";
                return kExitNumerical;
            }

            std::cout << "subdomain,dof,nnz\n";
            for (const SubdomainStats& s : partition_stats(pr)) {
                std::cout << s.subdomain << ',' << s.dof << ',' << s.nnz << '\n';
            }
            print_solve_summary(report, "cg (sub-structured)");
            if (!sp.report_path.empty()) {
                nlohmann::json j;
                j["schema"] = "krysp/solve-report/1";
                j["manifest"] = manifest_json(argc, argv, sp.input, sp.format, cfg.policy,
                                              solver_cfg_json(sp));
                j["report"] = report_json(report);
                j["partition"] = nlohmann::json::array();
                for (const SubdomainStats& s : partition_stats(pr)) {
                    j["partition"].push_back({{"subdomain", s.subdomain}, {"dof", s.dof},
                                              {"nnz", s.nnz}});
                }
                write_text_file(sp.report_path, j.dump(2) + "\n");
            }
            return report.converged ? kExitOk : kExitNumerical;
        }

        if (gen_cmd->parsed()) {
            generate_test_matrix(gn_kind, gn_n, gn_out);
            return kExitOk;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitIo;
    } catch (const UnsupportedField& e) {
        std::cerr << "unsupported input: " << e.what() << "\n";
        return kExitIo;
    } catch (const DimensionMismatch& e) {
        std::cerr << "dimension mismatch: " << e.what() << "\n";
        return kExitUsage;
    } catch (const EllBlowup& e) {
        std::cerr << "conversion refused: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Breakdown& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }

    return kExitUsage;
}

}  // namespace krysp
