#include "cobra/thread_pool.hpp"

#include <algorithm>

#include "cobra/errors.hpp"

namespace cobra {

ThreadPool::ThreadPool(int threads) {
    if (threads < 1) throw validation_error("thread pool: thread count must be >= 1");
    thread_count_ = threads;
    // Caller participates as chunk 0; spawn the rest.
    workers_.reserve(threads - 1);
    for (int slot = 1; slot < threads; ++slot)
        workers_.emplace_back(&ThreadPool::worker_loop, this, slot);
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
}

static std::pair<int64_t, int64_t> chunk_bounds(int64_t begin, int64_t end, int chunk,
                                                int chunks) {
    const int64_t n = end - begin;
    const int64_t base = n / chunks, rem = n % chunks;
    const int64_t lo = begin + base * chunk + std::min<int64_t>(chunk, rem);
    const int64_t hi = lo + base + (chunk < rem ? 1 : 0);
    return {lo, hi};
}

void ThreadPool::parallel_for(int64_t begin, int64_t end,
                              const std::function<void(int64_t, int64_t)>& fn) {
    if (end <= begin) return;
    if (thread_count_ == 1 || end - begin == 1) {
        fn(begin, end);
        return;
    }
    {
        std::lock_guard lock(mutex_);
        job_ = &fn;
        job_begin_ = begin;
        job_end_ = end;
        pending_ = thread_count_ - 1;
        ++generation_;
    }
    wake_.notify_all();

    auto [lo, hi] = chunk_bounds(begin, end, 0, thread_count_);
    if (lo < hi) fn(lo, hi);

    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
}

void ThreadPool::worker_loop(int slot) {
    uint64_t seen = 0;
    for (;;) {
        const std::function<void(int64_t, int64_t)>* job;
        int64_t begin, end;
        {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            job = job_;
            begin = job_begin_;
            end = job_end_;
        }
        auto [lo, hi] = chunk_bounds(begin, end, slot, thread_count_);
        if (lo < hi) (*job)(lo, hi);
        {
            std::lock_guard lock(mutex_);
            if (--pending_ == 0) done_.notify_all();
        }
    }
}

void parallel_for(ThreadPool* pool, int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t)>& fn) {
    if (pool && pool->thread_count() > 1)
        pool->parallel_for(begin, end, fn);
    else if (end > begin)
        fn(begin, end);
}

}  // namespace cobra
