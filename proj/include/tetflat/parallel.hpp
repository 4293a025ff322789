#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace tetflat {

/// Worker count used by data-parallel loops (default 1).
void set_thread_count(int n);
int thread_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Callers write only
/// to per-element slots, so results never depend on the thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(thread_count(), n / 256 + 1);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace tetflat
