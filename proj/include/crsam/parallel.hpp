// Copyright 2026 crsam-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <future>
#include <thread>
#include <utility>
#include <vector>

namespace crsam {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once and callers write results into per-index slots, so the
/// outcome does not depend on the worker count. The first exception thrown is
/// rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += workers) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Evaluates two independent callables, optionally on separate threads.
template <class A, class B>
auto fork_join(A&& a, B&& b, bool concurrent) {
  if (!concurrent) {
    auto ra = a();
    auto rb = b();
    return std::pair{std::move(ra), std::move(rb)};
  }
  auto fb = std::async(std::launch::async, std::forward<B>(b));
  auto ra = a();
  auto rb = fb.get();
  return std::pair{std::move(ra), std::move(rb)};
}

}  // namespace crsam
