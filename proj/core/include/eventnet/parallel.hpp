#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace eventnet {

// Work is always split into contiguous ranges that own disjoint output
// slices, so results are bit-identical for any thread count. threads = 1 is
// the documented fully serial mode.
class ThreadPool {
public:
  explicit ThreadPool(int n_threads) : n_threads_(n_threads < 1 ? 1 : n_threads) {
    for (int i = 1; i < n_threads_; ++i) {
      workers_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int size() const { return n_threads_; }

  // Runs fn(begin, end) over [0, n) split into one contiguous range per
  // thread. Blocks until all ranges complete.
  void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int parts = static_cast<int>(n < n_threads_ ? n : n_threads_);
    if (parts == 1) {
      fn(0, n);
      return;
    }
    {
      std::unique_lock<std::mutex> lk(mu_);
      job_ = &fn;
      job_n_ = n;
      job_parts_ = parts;
      pending_ = parts - 1;
      ++generation_;
    }
    cv_.notify_all();
    run_part(fn, 0, n, parts);  // this thread takes part 0
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

private:
  static void run_part(const std::function<void(int64_t, int64_t)>& fn, int part, int64_t n,
                       int parts) {
    const int64_t chunk = (n + parts - 1) / parts;
    const int64_t begin = part * chunk;
    const int64_t end = (begin + chunk < n) ? begin + chunk : n;
    if (begin < end) fn(begin, end);
  }

  void worker_loop(int index) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* job = nullptr;
      int64_t n = 0;
      int parts = 0;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        if (index >= job_parts_) continue;  // not needed for this job
        job = job_;
        n = job_n_;
        parts = job_parts_;
      }
      run_part(*job, index, n, parts);
      {
        std::unique_lock<std::mutex> lk(mu_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  const int n_threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int64_t, int64_t)>* job_ = nullptr;
  int64_t job_n_ = 0;
  int job_parts_ = 0;
  int pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

// process-wide pool used by the numeric kernels
void set_num_threads(int n);
int num_threads();
ThreadPool& global_pool();

template <typename F>
void parallel_for(int64_t n, F&& fn) {
  global_pool().run(n, std::function<void(int64_t, int64_t)>(std::forward<F>(fn)));
}

}  // namespace eventnet
