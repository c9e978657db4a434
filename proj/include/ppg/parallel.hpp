#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace ppg {

// Runs fn(i) for i in [0, count). Each index must write only to its own output
// slot; callers reduce afterwards in index order, so results are identical for
// any thread count.
inline void parallel_for(int count, int num_threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  if (num_threads <= 1 || count == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(num_threads, count);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ppg
