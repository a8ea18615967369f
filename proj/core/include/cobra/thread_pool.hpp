#ifndef COBRA_THREAD_POOL_HPP
#define COBRA_THREAD_POOL_HPP

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cobra {

// Fixed-size worker pool for data-parallel loops. Work is split into one
// contiguous chunk per thread with boundaries that depend only on the range
// and the thread count, so the set of indices each chunk owns is
// deterministic. Kernels keep each output element inside a single chunk,
// which makes results independent of how many threads execute the chunks.
class ThreadPool {
public:
    explicit ThreadPool(int threads);
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int thread_count() const { return thread_count_; }

    // Calls fn(begin_i, end_i) for a partition of [begin, end) into
    // thread_count contiguous chunks. Blocks until all chunks complete.
    void parallel_for(int64_t begin, int64_t end,
                      const std::function<void(int64_t, int64_t)>& fn);

private:
    void worker_loop(int slot);

    int thread_count_ = 1;
    std::vector<std::thread> workers_;

    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(int64_t, int64_t)>* job_ = nullptr;
    int64_t job_begin_ = 0, job_end_ = 0;
    uint64_t generation_ = 0;
    int pending_ = 0;
    bool stop_ = false;
};

// Serial fallback when pool is null or the range is tiny.
void parallel_for(ThreadPool* pool, int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t)>& fn);

}  // namespace cobra

#endif
