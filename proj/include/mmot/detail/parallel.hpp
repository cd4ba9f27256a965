#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mmot::detail {

// Runs fn(begin, end) over contiguous chunks of [0, count). Chunks write
// disjoint ranges, so results do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count < 2 * workers) {
    fn(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(count, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace mmot::detail
