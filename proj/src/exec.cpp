#include "krysp/exec.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <string>

namespace krysp {

index_t default_worker_count() {
    if (const char* env = std::getenv("KRYSP_WORKERS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<index_t>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<index_t>(hw);
}

index_t ExecPolicy::effective_workers() const {
    return worker_count > 0 ? worker_count : default_worker_count();
}

void validate_policy(const ExecPolicy& policy) {
    if (std::find(kBlockSizes.begin(), kBlockSizes.end(), policy.block_size) == kBlockSizes.end()) {
        throw Error("block_size " + std::to_string(policy.block_size) +
                    " not in {32,64,128,256,512,1024}");
    }
    if (std::find(kWorkersPerRow.begin(), kWorkersPerRow.end(), policy.workers_per_row) ==
        kWorkersPerRow.end()) {
        throw Error("workers_per_row " + std::to_string(policy.workers_per_row) +
                    " not in {1,2,4,8,16,32}");
    }
}

index_t grid_spmv_blocks(index_t n_rows, const ExecPolicy& policy) {
    if (n_rows <= 0) return 0;
    return (policy.workers_per_row * n_rows + policy.block_size - 1) / policy.block_size;
}

index_t grid_vector_blocks(index_t n, const ExecPolicy& policy) {
    if (n <= 0) return 0;
    return (n + policy.block_size - 1) / policy.block_size;
}

GridShape compute_grid(index_t required_blocks, GridStrategy strategy,
                       const DeviceLimits& limits) {
    GridShape shape;
    if (required_blocks <= limits.max_grid_x) {
        shape.x = required_blocks;
        return shape;
    }
    if (strategy == GridStrategy::FlatX) {
        shape.x = limits.max_grid_x;
        shape.y = (required_blocks - 1) / limits.max_grid_x + 1;
    } else {
        index_t side = static_cast<index_t>(std::ceil(std::sqrt(static_cast<double>(required_blocks))));
        shape.x = side;
        shape.y = side;
    }
    return shape;
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

namespace {
thread_local bool tls_inside_pool = false;
}

struct WorkerPool::Impl {
    std::mutex mutex;
    std::condition_variable wake;
    std::condition_variable done;

    // Current job; generation bumps each dispatch so sleeping workers can tell
    // a new job from a stale one.
    std::uint64_t generation = 0;
    index_t n_tasks = 0;
    index_t participants = 0;  // helper threads that should join this job
    const std::function<void(index_t)>* task = nullptr;
    std::atomic<index_t> next_task{0};
    std::atomic<index_t> active{0};
    bool shutting_down = false;

    std::mutex run_mutex;  // serializes concurrent run() callers
};

WorkerPool& WorkerPool::instance() {
    static WorkerPool pool;
    return pool;
}

WorkerPool::WorkerPool() : impl_(new Impl) {
    index_t n = default_worker_count();
    for (index_t i = 1; i < n; ++i) {
        threads_.emplace_back([this, i] { worker_loop(static_cast<std::size_t>(i)); });
    }
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard<std::mutex> lock(impl_->mutex);
        impl_->shutting_down = true;
    }
    impl_->wake.notify_all();
    for (auto& t : threads_) t.join();
    delete impl_;
}

void WorkerPool::worker_loop(std::size_t) {
    tls_inside_pool = true;
    std::uint64_t seen = 0;
    for (;;) {
        const std::function<void(index_t)>* task = nullptr;
        index_t n_tasks = 0;
        {
            std::unique_lock<std::mutex> lock(impl_->mutex);
            impl_->wake.wait(lock, [&] {
                return impl_->shutting_down || (impl_->generation != seen && impl_->task != nullptr);
            });
            if (impl_->shutting_down) return;
            seen = impl_->generation;
            task = impl_->task;
            n_tasks = impl_->n_tasks;
            impl_->active.fetch_add(1);
        }
        for (;;) {
            index_t i = impl_->next_task.fetch_add(1);
            if (i >= n_tasks) break;
            (*task)(i);
        }
        {
            std::lock_guard<std::mutex> lock(impl_->mutex);
            if (impl_->active.fetch_sub(1) == 1) impl_->done.notify_all();
        }
    }
}

void WorkerPool::run(index_t n_tasks, index_t max_workers,
                     const std::function<void(index_t)>& task) {
    if (n_tasks <= 0) return;
    index_t workers = std::min({max_workers, n_tasks, size()});
    // Inline when parallelism cannot help or when called from a pool thread
    // (kernels invoked inside subdomain workers). Placement never changes
    // results, only who computes them.
    if (workers <= 1 || tls_inside_pool) {
        for (index_t i = 0; i < n_tasks; ++i) task(i);
        return;
    }

    std::unique_lock<std::mutex> run_lock(impl_->run_mutex, std::try_to_lock);
    if (!run_lock.owns_lock()) {
        for (index_t i = 0; i < n_tasks; ++i) task(i);
        return;
    }

    {
        std::lock_guard<std::mutex> lock(impl_->mutex);
        impl_->task = &task;
        impl_->n_tasks = n_tasks;
        impl_->next_task.store(0);
        ++impl_->generation;
    }
    impl_->wake.notify_all();

    // The caller works too.
    for (;;) {
        index_t i = impl_->next_task.fetch_add(1);
        if (i >= n_tasks) break;
        task(i);
    }

    std::unique_lock<std::mutex> lock(impl_->mutex);
    impl_->done.wait(lock, [&] { return impl_->active.load() == 0; });
    impl_->task = nullptr;
}

}  // namespace krysp
