#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace hpanel {

// Runs f(k) for k in [0, n) on up to `workers` threads using fixed contiguous
// chunks. f must write only to slot k of its outputs; any reduction happens
// afterwards in index order, so results never depend on the worker count.
// If several indices throw, the exception from the lowest chunk is rethrown.
template <class F>
void parallel_for(std::size_t n, int workers, F&& f) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (w <= 1) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t c = 0; c < w; ++c) {
    const std::size_t lo = n * c / w;
    const std::size_t hi = n * (c + 1) / w;
    threads.emplace_back([&, c, lo, hi] {
      try {
        for (std::size_t k = lo; k < hi; ++k) f(k);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace hpanel
