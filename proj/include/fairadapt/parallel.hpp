#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fairadapt {

namespace detail {
inline std::atomic<std::size_t>& thread_limit() {
  static std::atomic<std::size_t> limit{1};
  return limit;
}
}  // namespace detail

/// Caps the workers used by fitting and per-row loops. 0 means hardware
/// concurrency. Results never depend on this value.
inline void set_max_threads(std::size_t n) {
  if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  detail::thread_limit().store(n);
}

inline std::size_t max_threads() { return detail::thread_limit().load(); }

/// Calls body(i) for i in [0, n). Iterations are split into contiguous blocks,
/// one per worker; bodies must only write to slots owned by their index.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min(max_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fairadapt
