#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace banditrex {

/// Worker cap: BANDIT_REX_THREADS when set, hardware concurrency otherwise.
inline int thread_budget() {
  if (const char* env = std::getenv("BANDIT_REX_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {
inline thread_local int parallel_depth = 0;
}

/// Runs fn(0..n-1) across up to thread_budget() workers. Nested calls run
/// serially. Results must be written to disjoint slots by index; the first
/// worker exception is rethrown after all workers join.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int budget = thread_budget();
  if (n == 1 || budget <= 1 || detail::parallel_depth > 0) {
    ++detail::parallel_depth;
    try {
      for (std::size_t i = 0; i < n; ++i) fn(i);
    } catch (...) {
      --detail::parallel_depth;
      throw;
    }
    --detail::parallel_depth;
    return;
  }

  const int workers = static_cast<int>(std::min<std::size_t>(budget, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&] {
    ++detail::parallel_depth;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
    --detail::parallel_depth;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace banditrex
