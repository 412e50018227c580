#include "crossview/threadpool.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace crossview {

namespace {
thread_local bool t_inside_worker = false;

int initial_thread_count() {
  if (const char* env = std::getenv("CROSSVIEW_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

struct ThreadPool::Impl {
  std::mutex mu;
  std::condition_variable cv_work;
  std::condition_variable cv_done;
  std::vector<std::thread> workers;

  // Current job; generation bumps wake the workers.
  const std::function<void(std::int64_t, std::int64_t)>* body = nullptr;
  std::int64_t total = 0;
  int nthreads = 1;
  std::uint64_t generation = 0;
  int pending = 0;
  bool shutdown = false;

  void worker_main(int worker_index, std::uint64_t seen) {
    t_inside_worker = true;
    for (;;) {
      const std::function<void(std::int64_t, std::int64_t)>* job;
      std::int64_t n;
      int nt;
      {
        std::unique_lock<std::mutex> lock(mu);
        cv_work.wait(lock, [&] { return shutdown || generation != seen; });
        if (shutdown) return;
        seen = generation;
        job = body;
        n = total;
        nt = nthreads;
      }
      run_chunk(*job, n, nt, worker_index + 1);
      {
        std::lock_guard<std::mutex> lock(mu);
        if (--pending == 0) cv_done.notify_one();
      }
    }
  }

  static void run_chunk(const std::function<void(std::int64_t, std::int64_t)>& job,
                        std::int64_t n, int nt, int chunk) {
    std::int64_t begin = n * chunk / nt;
    std::int64_t end = n * (chunk + 1) / nt;
    if (begin < end) job(begin, end);
  }

  void spawn(int n) {
    nthreads = n;
    // Fresh workers must treat the current generation as already handled.
    const std::uint64_t gen0 = generation;
    for (int i = 0; i < n - 1; ++i) {
      workers.emplace_back([this, i, gen0] { worker_main(i, gen0); });
    }
  }

  void join_all() {
    {
      std::lock_guard<std::mutex> lock(mu);
      shutdown = true;
    }
    cv_work.notify_all();
    for (auto& w : workers) w.join();
    workers.clear();
    shutdown = false;
  }
};

ThreadPool::ThreadPool() : impl_(new Impl) { impl_->spawn(initial_thread_count()); }

ThreadPool::~ThreadPool() {
  impl_->join_all();
  delete impl_;
}

ThreadPool& ThreadPool::instance() {
  static ThreadPool pool;
  return pool;
}

int ThreadPool::num_threads() const { return impl_->nthreads; }

void ThreadPool::set_num_threads(int n) {
  if (n < 1) n = 1;
  if (n == impl_->nthreads) return;
  impl_->join_all();
  impl_->spawn(n);
}

void ThreadPool::parallel_for(std::int64_t n,
                              const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  const int nt = impl_->nthreads;
  if (nt == 1 || n == 1 || t_inside_worker) {
    body(0, n);
    return;
  }
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->body = &body;
    impl_->total = n;
    impl_->pending = nt - 1;
    ++impl_->generation;
  }
  impl_->cv_work.notify_all();
  Impl::run_chunk(body, n, nt, 0);  // caller takes chunk 0
  std::unique_lock<std::mutex> lock(impl_->mu);
  impl_->cv_done.wait(lock, [&] { return impl_->pending == 0; });
}

}  // namespace crossview
