#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pansharp {

// Work-sharing pool used by the tensor kernels.
//
// parallel_for splits [0, n) into one contiguous chunk per worker; every index
// is owned by exactly one worker and each owner reduces in plain index order.
// Results therefore do not depend on the worker count at all, which is
// stronger than the bitwise-determinism-at-fixed-worker-count contract.
class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool(default_workers());
    return pool;
  }

  ~ThreadPool() { stop(); }

  int size() const { return workers_ + 1; }  // helper threads + caller

  void resize(int total_workers) {
    if (total_workers < 1) total_workers = 1;
    if (total_workers == size()) return;
    stop();
    start(total_workers - 1);
  }

  // Runs fn(begin, end) over a partition of [0, n); blocks until all chunks
  // are done. The caller thread executes chunk 0.
  void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int parts = static_cast<int>(std::min<int64_t>(size(), n));
    if (parts == 1) {
      fn(0, n);
      return;
    }
    {
      std::unique_lock lock(mutex_);
      job_fn_ = &fn;
      job_n_ = n;
      job_parts_ = parts;
      pending_ = parts - 1;
      ++generation_;
    }
    cv_work_.notify_all();
    fn(chunk_begin(0, n, parts), chunk_begin(1, n, parts));
    std::unique_lock lock(mutex_);
    cv_done_.wait(lock, [&] { return pending_ == 0; });
    job_fn_ = nullptr;
  }

 private:
  explicit ThreadPool(int total_workers) { start(total_workers - 1); }

  static int default_workers() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }

  static int64_t chunk_begin(int part, int64_t n, int parts) {
    return n * part / parts;
  }

  void start(int helpers) {
    stopping_ = false;
    workers_ = helpers;
    threads_.reserve(helpers);
    for (int i = 0; i < helpers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i + 1); });
    }
  }

  void stop() {
    {
      std::unique_lock lock(mutex_);
      stopping_ = true;
      ++generation_;
    }
    cv_work_.notify_all();
    for (auto& t : threads_) t.join();
    threads_.clear();
    workers_ = 0;
  }

  void worker_loop(int part_index) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* fn = nullptr;
      int64_t n = 0;
      int parts = 0;
      {
        std::unique_lock lock(mutex_);
        cv_work_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stopping_) return;
        fn = job_fn_;
        n = job_n_;
        parts = job_parts_;
      }
      if (fn != nullptr && part_index < parts) {
        (*fn)(chunk_begin(part_index, n, parts),
              chunk_begin(part_index + 1, n, parts));
      }
      {
        std::unique_lock lock(mutex_);
        if (fn != nullptr && part_index < parts) --pending_;
        if (pending_ == 0) cv_done_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  int workers_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_work_;
  std::condition_variable cv_done_;
  const std::function<void(int64_t, int64_t)>* job_fn_ = nullptr;
  int64_t job_n_ = 0;
  int job_parts_ = 0;
  int pending_ = 0;
  uint64_t generation_ = 0;
  bool stopping_ = false;
};

inline int worker_count() { return ThreadPool::instance().size(); }

inline void set_worker_count(int n) { ThreadPool::instance().resize(n); }

// fn(begin, end) over a partition of [0, n).
template <typename Fn>
void parallel_for(int64_t n, Fn&& fn) {
  const std::function<void(int64_t, int64_t)> wrapped = std::forward<Fn>(fn);
  ThreadPool::instance().run(n, wrapped);
}

}  // namespace pansharp
