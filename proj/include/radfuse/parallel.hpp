#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace radfuse {

/// Splits [0, n) into at most `workers` contiguous chunks and runs
/// fn(begin, end) on each. Chunk boundaries depend only on (n, workers).
/// The first exception thrown by any chunk is rethrown after all join.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t chunks =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (chunks == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::thread> threads;
  threads.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = n * c / chunks;
    const std::size_t end = n * (c + 1) / chunks;
    threads.emplace_back([&, c, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace radfuse
