#pragma once

#include <array>
#include <functional>
#include <thread>

#include "krysp/types.hpp"

namespace krysp {

enum class GridStrategy { FlatX, Square };

/// Task-decomposition knobs. block_size is the reduction-chunk length and
/// row-batch granularity; workers_per_row is the number of lanes cooperating
/// on one CSR row (tree reduction of depth log2); worker_count sizes the
/// thread pool actually used to execute the batches.
struct ExecPolicy {
    index_t block_size = 256;
    index_t workers_per_row = 8;
    GridStrategy grid_strategy = GridStrategy::FlatX;
    index_t worker_count = 0;  // 0 = hardware parallelism

    index_t effective_workers() const;
};

inline constexpr std::array<index_t, 6> kBlockSizes = {32, 64, 128, 256, 512, 1024};
inline constexpr std::array<index_t, 6> kWorkersPerRow = {1, 2, 4, 8, 16, 32};

/// Throws if block_size / workers_per_row are not in the admissible sets.
void validate_policy(const ExecPolicy& policy);

struct GridShape {
    index_t x = 1;
    index_t y = 1;
    index_t z = 1;
};

struct DeviceLimits {
    index_t max_grid_x = 65535;
    index_t max_threads_per_block = 1024;
};

/// Number of row batches for an SpMV over n_rows rows:
/// ceil(workers_per_row * n_rows / block_size). Zero rows need zero batches.
index_t grid_spmv_blocks(index_t n_rows, const ExecPolicy& policy);

/// Number of element chunks for a vector kernel: ceil(n / block_size).
index_t grid_vector_blocks(index_t n, const ExecPolicy& policy);

/// Lay required_blocks out on a bounded grid. FlatX fills the first dimension
/// and spills into the second; Square uses a ceil(sqrt) x ceil(sqrt) grid when
/// one dimension does not suffice.
GridShape compute_grid(index_t required_blocks, GridStrategy strategy,
                       const DeviceLimits& limits = DeviceLimits{});

/// Fixed-size thread pool shared by all kernels. Tasks are identified by
/// index; a task's result may not depend on which worker runs it, which keeps
/// every kernel bit-deterministic regardless of pool size.
class WorkerPool {
public:
    static WorkerPool& instance();

    /// Runs task(0..n_tasks-1), using at most max_workers threads (including
    /// the caller). Blocks until all tasks finished.
    void run(index_t n_tasks, index_t max_workers, const std::function<void(index_t)>& task);

    index_t size() const { return static_cast<index_t>(threads_.size()) + 1; }

    ~WorkerPool();

private:
    WorkerPool();
    void worker_loop(std::size_t slot);

    struct Job;
    std::vector<std::thread> threads_;
    struct Impl;
    Impl* impl_;
};

/// Pool size override (env var KRYSP_WORKERS) or hardware parallelism.
index_t default_worker_count();

}  // namespace krysp
