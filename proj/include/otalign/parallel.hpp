#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace otalign {

inline int default_workers() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Calls fn(i) for i in [0, count) on up to `workers` threads. Work items
/// must be independent; results go through caller-owned per-index slots.
/// If items throw, the exception of the lowest index is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  if (count == 0) return;
  std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace otalign
