#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace aafwi {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception is rethrown.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int workers = std::clamp(threads, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Element-wise sum of equally sized arrays, combined as a fixed binary tree so the
/// result does not depend on which worker finished first.
template <class Vec>
Vec pairwise_sum(std::vector<Vec> parts) {
  if (parts.empty()) return {};
  while (parts.size() > 1) {
    std::vector<Vec> merged;
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
      Vec s = std::move(parts[i]);
      const Vec& b = parts[i + 1];
      for (std::size_t k = 0; k < s.size(); ++k) s[k] += b[k];
      merged.push_back(std::move(s));
    }
    if (parts.size() % 2 == 1) merged.push_back(std::move(parts.back()));
    parts = std::move(merged);
  }
  return std::move(parts.front());
}

}  // namespace aafwi
