#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace lapsr {

/// Worker-thread cap: hardware parallelism, clamped by LAPSR_THREADS.
inline int max_threads() {
  static const int cached = [] {
    int hw = int(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("LAPSR_THREADS")) {
      const int cap = std::atoi(env);
      if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
  }();
  return cached;
}

namespace detail {
inline thread_local bool in_parallel_region = false;
}

/// The static partition parallel_for_chunks uses: contiguous ranges, one per
/// worker. Exposed so chunk-indexed partial results can be reduced in a fixed
/// order.
inline std::vector<std::pair<int, int>> chunk_ranges(int n) {
  std::vector<std::pair<int, int>> out;
  if (n <= 0) return out;
  const int threads =
      (detail::in_parallel_region) ? 1 : std::min(max_threads(), n);
  const int chunk = (n + threads - 1) / threads;
  for (int lo = 0; lo < n; lo += chunk) out.emplace_back(lo, std::min(n, lo + chunk));
  return out;
}

/// Runs f(range_index, lo, hi) over the given ranges on worker threads.
template <typename F>
void parallel_for_ranges(const std::vector<std::pair<int, int>>& ranges, F&& f) {
  if (ranges.empty()) return;
  if (ranges.size() == 1 || detail::in_parallel_region) {
    for (std::size_t r = 0; r < ranges.size(); ++r) f(r, ranges[r].first, ranges[r].second);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(ranges.size());
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    workers.emplace_back([&, r] {
      detail::in_parallel_region = true;
      try {
        f(r, ranges[r].first, ranges[r].second);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
      detail::in_parallel_region = false;
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

/// Static contiguous partition of [0, n) across worker threads; the body
/// receives one [lo, hi) range per thread so it can reuse scratch buffers.
/// Nested calls run serially. Disjoint writes keyed by index are
/// bitwise-deterministic for a fixed thread count.
template <typename F>
void parallel_for_chunks(int n, F&& body) {
  parallel_for_ranges(chunk_ranges(n), [&](std::size_t, int lo, int hi) { body(lo, hi); });
}

template <typename F>
void parallel_for(int n, F&& body) {
  parallel_for_chunks(n, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) body(i);
  });
}

}  // namespace lapsr
