#pragma once

// Bounded worker pool for experiment cells.  Every cell writes into its own
// preallocated slot and draws randomness from a stream derived from its
// index, so the merged output is identical for any worker count: the
// parallelism can never change the emitted bytes.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace oscint {

inline int worker_count() {
  if (const char* env = std::getenv("OSCINT_WORKERS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc != 0 ? static_cast<int>(hc) : 1;
}

// Runs fn(i) for i in [0, jobs), on up to max_workers threads (0 means use
// worker_count()).  The first exception thrown by a job is rethrown after
// all workers drain.
inline void parallel_for(long jobs, const std::function<void(long)>& fn,
                         int max_workers = 0) {
  if (jobs <= 0) return;
  long workers = max_workers > 0 ? max_workers : worker_count();
  workers = std::min(workers, jobs);
  if (workers <= 1) {
    for (long i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (long w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        long i = next.fetch_add(1);
        if (i >= jobs || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace oscint
