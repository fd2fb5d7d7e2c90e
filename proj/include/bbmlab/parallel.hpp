#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace bbm {

// Replica-level parallelism with deterministic output: slot i always holds
// fn(i), so results are independent of the thread count.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, int threads, Fn&& fn) {
  std::vector<T> out(n);
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      out[i] = fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int k = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(k);
  for (int w = 0; w < k; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

inline int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace bbm
