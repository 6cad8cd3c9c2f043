#include "krysp/autotune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "krysp/kernels.hpp"

namespace krysp {

using Clock = std::chrono::steady_clock;

double probe_clock_resolution() {
    if (!Clock::is_steady) {
        throw ClockUnavailable("no steady clock on this platform");
    }
    double best = 0.0;
    int found = 0;
    for (int attempt = 0; attempt < 1000000 && found < 64; ++attempt) {
        auto t0 = Clock::now();
        auto t1 = Clock::now();
        double delta = std::chrono::duration<double>(t1 - t0).count();
        if (delta > 0.0) {
            best = (found == 0) ? delta : std::min(best, delta);
            ++found;
        }
    }
    if (found == 0) {
        return 1e-6;  // clock too coarse to probe; assume microseconds
    }
    return best;
}

BenchRecord time_kernel(const std::function<void()>& op, const TimingProtocol& protocol,
                        double clock_resolution, std::string kernel_name,
                        std::string matrix_name) {
    if (protocol.min_repetitions < 1 || protocol.clock_resolution_multiplier < 1) {
        throw Error("timing protocol requires min_repetitions >= 1 and multiplier >= 1");
    }
    if (!(clock_resolution > 0.0)) {
        throw ClockUnavailable("non-positive clock resolution");
    }

    for (index_t i = 0; i < protocol.warmup_repetitions; ++i) op();

    const double needed =
        static_cast<double>(protocol.clock_resolution_multiplier) * clock_resolution;
    constexpr index_t kRepCap = index_t(1) << 24;

    index_t reps = protocol.min_repetitions;
    std::vector<double> per_rep;
    double total = 0.0;
    for (;;) {
        per_rep.assign(static_cast<std::size_t>(reps), 0.0);
        total = 0.0;
        for (index_t i = 0; i < reps; ++i) {
            auto t0 = Clock::now();
            op();
            auto t1 = Clock::now();
            per_rep[i] = std::chrono::duration<double>(t1 - t0).count();
            total += per_rep[i];
        }
        if (total >= needed || reps >= kRepCap) break;
        double mean = total / static_cast<double>(reps);
        index_t next = mean > 0.0
                           ? static_cast<index_t>(std::ceil(needed / mean))
                           : reps * 2;
        reps = std::min(kRepCap, std::max(next, reps + 1));
    }

    BenchRecord record;
    record.kernel_name = std::move(kernel_name);
    record.matrix_name = std::move(matrix_name);
    record.reps = reps;
    record.total_time = total;
    record.mean_time = total / static_cast<double>(reps);
    double var = 0.0;
    for (double t : per_rep) {
        double d = t - record.mean_time;
        var += d * d;
    }
    record.stddev_time = std::sqrt(var / static_cast<double>(reps));
    return record;
}

std::vector<ExecPolicy> default_policy_grid() {
    std::vector<ExecPolicy> grid;
    for (index_t bs : kBlockSizes) {
        for (index_t tw : kWorkersPerRow) {
            for (GridStrategy strategy : {GridStrategy::FlatX, GridStrategy::Square}) {
                ExecPolicy p;
                p.block_size = bs;
                p.workers_per_row = tw;
                p.grid_strategy = strategy;
                grid.push_back(p);
            }
        }
    }
    return grid;
}

namespace {

// (block_size, workers_per_row, flat-first) tie-break key
std::tuple<index_t, index_t, int> policy_key(const ExecPolicy& p) {
    return {p.block_size, p.workers_per_row, p.grid_strategy == GridStrategy::FlatX ? 0 : 1};
}

bool same_knobs(const ExecPolicy& a, const ExecPolicy& b) {
    return policy_key(a) == policy_key(b);
}

}  // namespace

std::size_t select_best_index(const std::vector<BenchRecord>& table, std::size_t grid_count) {
    if (table.empty() || grid_count == 0) {
        throw Error("cannot select from an empty table");
    }
    grid_count = std::min(grid_count, table.size());
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid_count; ++i) {
        const BenchRecord& cand = table[i];
        const BenchRecord& cur = table[best];
        if (cand.mean_time < cur.mean_time ||
            (cand.mean_time == cur.mean_time &&
             policy_key(cand.policy) < policy_key(cur.policy))) {
            best = i;
        }
    }
    return best;
}

TuneResult tune_spmv(const SparseMatrix& m, const std::vector<ExecPolicy>& grid,
                     const TimingProtocol& protocol, const std::string& matrix_name) {
    if (grid.empty()) {
        throw Error("tune_spmv needs a non-empty policy grid");
    }
    double resolution = probe_clock_resolution();
    std::vector<double> x(static_cast<std::size_t>(n_cols(m)), 1.0);
    std::vector<double> y(static_cast<std::size_t>(n_rows(m)), 0.0);

    TuneResult result;
    bool grid_has_default = false;
    for (const ExecPolicy& policy : grid) {
        validate_policy(policy);
        if (same_knobs(policy, kDefaultPolicy)) grid_has_default = true;
        BenchRecord record =
            time_kernel([&] { spmv_into(m, x, y, policy); }, protocol, resolution, "spmv",
                        matrix_name);
        record.policy = policy;
        result.table.push_back(std::move(record));
    }

    std::size_t best = select_best_index(result.table, grid.size());
    result.best_policy = result.table[best].policy;

    double default_mean;
    if (grid_has_default) {
        auto it = std::find_if(result.table.begin(), result.table.end(), [](const BenchRecord& r) {
            return same_knobs(r.policy, kDefaultPolicy);
        });
        default_mean = it->mean_time;
    } else {
        BenchRecord record =
            time_kernel([&] { spmv_into(m, x, y, kDefaultPolicy); }, protocol, resolution, "spmv",
                        matrix_name);
        record.policy = kDefaultPolicy;
        default_mean = record.mean_time;
        result.table.push_back(std::move(record));
    }
    result.speedup_vs_default =
        result.table[best].mean_time > 0.0 ? default_mean / result.table[best].mean_time : 1.0;
    return result;
}

namespace {

const char* strategy_name(GridStrategy s) {
    return s == GridStrategy::FlatX ? "flat" : "square";
}

nlohmann::json record_json(const BenchRecord& r) {
    return {
        {"kernel", r.kernel_name},
        {"matrix", r.matrix_name},
        {"block_size", r.policy.block_size},
        {"workers_per_row", r.policy.workers_per_row},
        {"strategy", strategy_name(r.policy.grid_strategy)},
        {"reps", r.reps},
        {"mean_ms", r.mean_time * 1e3},
        {"stddev_ms", r.stddev_time * 1e3},
    };
}

}  // namespace

std::string bench_table_csv(const std::vector<BenchRecord>& table) {
    std::ostringstream out;
    out << "kernel,matrix,block_size,workers_per_row,strategy,reps,mean_ms,stddev_ms\n";
    out.precision(6);
    for (const BenchRecord& r : table) {
        out << r.kernel_name << ',' << r.matrix_name << ',' << r.policy.block_size << ','
            << r.policy.workers_per_row << ',' << strategy_name(r.policy.grid_strategy) << ','
            << r.reps << ',' << r.mean_time * 1e3 << ',' << r.stddev_time * 1e3 << '\n';
    }
    return out.str();
}

std::string bench_table_json(const std::vector<BenchRecord>& table) {
    nlohmann::json arr = nlohmann::json::array();
    for (const BenchRecord& r : table) arr.push_back(record_json(r));
    return arr.dump(2);
}

std::string tune_result_json(const TuneResult& result) {
    nlohmann::json j;
    j["best_policy"] = {
        {"block_size", result.best_policy.block_size},
        {"workers_per_row", result.best_policy.workers_per_row},
        {"strategy", strategy_name(result.best_policy.grid_strategy)},
    };
    j["speedup_vs_default"] = result.speedup_vs_default;
    j["table"] = nlohmann::json::array();
    for (const BenchRecord& r : result.table) j["table"].push_back(record_json(r));
    return j.dump(2);
}

}  // namespace krysp
