#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <span>
#include <thread>
#include <vector>

namespace zeno {

// Pairwise summation over a fixed element order; the result is a pure
// function of the input array, independent of threading.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s;
  }
  const size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline int default_workers() {
  if (const char* env = std::getenv("ZENOSIM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// Static partition of [0,n) into contiguous chunks. Tasks must write to
// disjoint state; the chunking affects scheduling only, never results.
inline void parallel_for(size_t n, int workers,
                         const std::function<void(size_t, size_t)>& fn) {
  if (workers <= 0) workers = default_workers();
  if (workers == 1 || n < 2) {
    if (n > 0) fn(0, n);
    return;
  }
  const size_t k = std::min(static_cast<size_t>(workers), n);
  const size_t chunk = (n + k - 1) / k;
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(k);
  for (size_t t = 0; t < k; ++t) {
    const size_t lo = t * chunk;
    const size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&, t, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace zeno
