#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "krysp/autotune.hpp"
#include "krysp/generators.hpp"
#include "krysp/kernels.hpp"
#include "support.hpp"

using namespace krysp;

namespace {

// busy-wait so the op has a controllable duration without sleeping precision
// problems
void burn(double seconds) {
    auto start = std::chrono::steady_clock::now();
    volatile double sink = 0.0;
    while (std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() <
           seconds) {
        sink = sink + 1.0;
    }
}

BenchRecord fixed_record(index_t bs, index_t tw, GridStrategy s, double mean) {
    BenchRecord r;
    r.policy.block_size = bs;
    r.policy.workers_per_row = tw;
    r.policy.grid_strategy = s;
    r.reps = 1;
    r.mean_time = mean;
    r.total_time = mean;
    return r;
}

}  // namespace

TEST_CASE("clock resolution probe returns something positive and small") {
    double res = probe_clock_resolution();
    CHECK(res > 0.0);
    CHECK(res < 1e-2);
}

TEST_CASE("time_kernel keeps the minimum repetitions when the total is long enough") {
    // ~1 ms op against a 1 us resolution: 10 reps already exceed 100 us
    TimingProtocol protocol;
    BenchRecord r = time_kernel([] { burn(1e-3); }, protocol, 1e-6);
    CHECK(r.reps == 10);
    CHECK(r.mean_time >= 0.9e-3);
    CHECK(r.total_time >= 100e-6);
}

TEST_CASE("time_kernel extends the repetitions for sub-resolution ops") {
    // sub-microsecond op against a 1 us resolution: the 100x rule needs at
    // least 100 reps (more, since each rep is far below the resolution)
    TimingProtocol protocol;
    volatile double sink = 0.0;
    BenchRecord r = time_kernel([&] { sink = sink + 1.0; }, protocol, 1e-6);
    CHECK(r.reps >= 100);
    CHECK(r.total_time >= 100e-6);
    CHECK(r.reps * r.mean_time >= 100e-6);
}

TEST_CASE("time_kernel survives a zero-work op") {
    TimingProtocol protocol;
    protocol.clock_resolution_multiplier = 1;
    BenchRecord r = time_kernel([] {}, protocol, 1e-9);
    CHECK(r.reps >= protocol.min_repetitions);
    CHECK(r.mean_time >= 0.0);
    CHECK(std::isfinite(r.mean_time));
    CHECK(std::isfinite(r.stddev_time));
}

TEST_CASE("time_kernel runs the warmup before measuring") {
    TimingProtocol protocol;
    protocol.warmup_repetitions = 3;
    protocol.min_repetitions = 5;
    std::atomic<int> calls{0};
    BenchRecord r = time_kernel([&] { ++calls; burn(5e-4); }, protocol, 1e-6);
    CHECK(calls.load() == 3 + r.reps);
}

TEST_CASE("raising min_repetitions never lowers the measured rep count") {
    double resolution = 1e-6;
    TimingProtocol low;
    low.min_repetitions = 10;
    TimingProtocol high;
    high.min_repetitions = 40;
    BenchRecord a = time_kernel([] { burn(2e-4); }, low, resolution);
    BenchRecord b = time_kernel([] { burn(2e-4); }, high, resolution);
    CHECK(b.reps >= a.reps);
    CHECK(a.reps >= low.min_repetitions);
    CHECK(b.reps >= high.min_repetitions);
}

TEST_CASE("selection is a pure function of the table with a fixed tie-break") {
    std::vector<BenchRecord> table = {
        fixed_record(256, 8, GridStrategy::FlatX, 2.0),
        fixed_record(1024, 32, GridStrategy::Square, 1.0),
        fixed_record(64, 8, GridStrategy::FlatX, 1.0),
        fixed_record(64, 4, GridStrategy::Square, 1.0),
        fixed_record(64, 4, GridStrategy::FlatX, 1.0),
        fixed_record(512, 1, GridStrategy::FlatX, 3.0),
    };
    // all four 1.0-records tie; smallest block size, then fewest workers,
    // then flat wins
    std::size_t best = select_best_index(table, table.size());
    CHECK(table[best].policy.block_size == 64);
    CHECK(table[best].policy.workers_per_row == 4);
    CHECK(table[best].policy.grid_strategy == GridStrategy::FlatX);
    // repeated evaluation picks the same entry
    CHECK(select_best_index(table, table.size()) == best);
    // entries past grid_count are reference-only
    CHECK(select_best_index(table, 1) == 0);
}

TEST_CASE("default grid is the full cross product") {
    auto grid = default_policy_grid();
    CHECK(grid.size() == 6 * 6 * 2);
    for (const auto& p : grid) {
        CHECK_NOTHROW(validate_policy(p));
    }
}

TEST_CASE("tune_spmv on a singleton grid reports that policy and a real default baseline") {
    SparseMatrix m(coo_to_csr(poisson2d(24)));  // 576 eqs
    ExecPolicy only;
    only.block_size = 64;
    only.workers_per_row = 2;
    TimingProtocol protocol;
    protocol.min_repetitions = 3;
    TuneResult result = tune_spmv(m, {only}, protocol, "poisson24");

    CHECK(result.best_policy.block_size == 64);
    CHECK(result.best_policy.workers_per_row == 2);
    // the default <256,8> was measured and appended for the speedup baseline
    REQUIRE(result.table.size() == 2);
    CHECK(result.table[1].policy.block_size == 256);
    CHECK(result.table[1].policy.workers_per_row == 8);
    CHECK(result.speedup_vs_default ==
          result.table[1].mean_time / result.table[0].mean_time);
}

TEST_CASE("tuning changes time only: outputs agree across the grid") {
    SparseMatrix m(coo_to_csr(poisson2d(12)));
    std::vector<double> x(144);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.3 + 0.01 * static_cast<double>(i % 7);
    std::vector<double> reference = spmv(m, x, kDefaultPolicy);
    for (const auto& p : default_policy_grid()) {
        std::vector<double> y = spmv(m, x, p);
        CHECK(testsupport::max_rel_err(y, reference) <= 1e-12);
    }
}

TEST_CASE("bench table serialization") {
    std::vector<BenchRecord> table = {fixed_record(256, 8, GridStrategy::FlatX, 0.0025)};
    table[0].kernel_name = "spmv";
    table[0].matrix_name = "m";
    table[0].reps = 10;
    table[0].stddev_time = 0.0001;

    SUBCASE("csv header and row") {
        std::string csv = bench_table_csv(table);
        CHECK(csv.substr(0, csv.find('\n')) ==
              "kernel,matrix,block_size,workers_per_row,strategy,reps,mean_ms,stddev_ms");
        CHECK(csv.find("spmv,m,256,8,flat,10,2.5,0.1") != std::string::npos);
    }
    SUBCASE("json fields") {
        std::string json = bench_table_json(table);
        CHECK(json.find("\"block_size\": 256") != std::string::npos);
        CHECK(json.find("\"strategy\": \"flat\"") != std::string::npos);
        CHECK(json.find("\"mean_ms\": 2.5") != std::string::npos);
    }
}

TEST_CASE("invalid policies and protocols are rejected") {
    ExecPolicy bad;
    bad.block_size = 100;
    CHECK_THROWS_AS(validate_policy(bad), Error);
    bad.block_size = 256;
    bad.workers_per_row = 3;
    CHECK_THROWS_AS(validate_policy(bad), Error);

    TimingProtocol broken;
    broken.min_repetitions = 0;
    CHECK_THROWS_AS(time_kernel([] {}, broken, 1e-6), Error);
    CHECK_THROWS_AS(time_kernel([] {}, TimingProtocol{}, 0.0), ClockUnavailable);
    SparseMatrix m(coo_to_csr(laplace1d(4)));
    CHECK_THROWS_AS(tune_spmv(m, {}, TimingProtocol{}), Error);
}
