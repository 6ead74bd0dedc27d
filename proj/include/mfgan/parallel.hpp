#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mfgan {

/// Worker-thread cap: MFGAN_THREADS if set and positive, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_threads();

/// Calls fn(i) for i in [0, n), splitting the range into contiguous chunks
/// over at most `threads` threads. Results must be written to per-index
/// slots; any reduction happens afterwards in index order.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, const Fn& fn) {
  if (threads <= 1 || n < 2 * threads) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = begin + chunk < n ? begin + chunk : n;
    if (begin >= end) break;
    pool.emplace_back([&, t, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace mfgan
