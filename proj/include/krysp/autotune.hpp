#pragma once

#include <functional>
#include <string>
#include <vector>

#include "krysp/exec.hpp"
#include "krysp/formats.hpp"

namespace krysp {

/// Repetition rule for one timed measurement: at least min_repetitions runs,
/// repeated until the measured total exceeds clock_resolution_multiplier
/// times the clock resolution. Warmup runs are excluded from the statistics.
struct TimingProtocol {
    index_t min_repetitions = 10;
    index_t clock_resolution_multiplier = 100;
    index_t warmup_repetitions = 2;
};

struct BenchRecord {
    std::string kernel_name;
    std::string matrix_name;
    ExecPolicy policy;
    index_t reps = 0;
    double total_time = 0.0;   // seconds
    double mean_time = 0.0;    // seconds
    double stddev_time = 0.0;  // seconds
};

struct TuneResult {
    ExecPolicy best_policy;
    std::vector<BenchRecord> table;
    double speedup_vs_default = 1.0;
};

inline constexpr ExecPolicy kDefaultPolicy{};  // <256, 8>, flat grid

/// Smallest observable steady-clock increment, in seconds.
double probe_clock_resolution();

BenchRecord time_kernel(const std::function<void()>& op, const TimingProtocol& protocol,
                        double clock_resolution, std::string kernel_name = "",
                        std::string matrix_name = "");

/// Full cross product of admissible block sizes, workers per row and both
/// grid strategies.
std::vector<ExecPolicy> default_policy_grid();

/// Index of the fastest record among the first grid_count table entries;
/// ties break toward smaller block size, then fewer workers per row, then
/// the flat grid.
std::size_t select_best_index(const std::vector<BenchRecord>& table, std::size_t grid_count);

/// Times the SpMV of m under every policy in the grid (sequentially, so the
/// measurements do not disturb each other) and picks the fastest. The default
/// policy is measured and appended when the grid does not contain it, so the
/// speedup is always reported against a real measurement.
TuneResult tune_spmv(const SparseMatrix& m, const std::vector<ExecPolicy>& grid,
                     const TimingProtocol& protocol, const std::string& matrix_name = "");

std::string bench_table_csv(const std::vector<BenchRecord>& table);
std::string bench_table_json(const std::vector<BenchRecord>& table);
std::string tune_result_json(const TuneResult& result);

}  // namespace krysp
