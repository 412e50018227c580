#pragma once

#include <cstdint>
#include <functional>

namespace crossview {

// Static-partition fork/join helper over a shared worker pool.
//
// parallel_for splits [0, n) into one contiguous chunk per thread and runs
// body(begin, end) on each. Each index is handled by exactly one invocation,
// so any computation whose per-index result does not depend on the partition
// is bit-identical for every thread count, including 1. All numeric code in
// this project is written to that rule: reductions happen element-wise in a
// fixed order inside one chunk, never across chunk boundaries.
//
// Calls from inside a worker run the body inline (no nested parallelism).
class ThreadPool {
 public:
  static ThreadPool& instance();

  int num_threads() const;
  void set_num_threads(int n);  // n >= 1; joins and respawns workers

  void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

 private:
  ThreadPool();
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  struct Impl;
  Impl* impl_;
};

inline void parallel_for(std::int64_t n,
                         const std::function<void(std::int64_t, std::int64_t)>& body) {
  ThreadPool::instance().parallel_for(n, body);
}

}  // namespace crossview
