#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bcd {

// Process-wide cap on worker threads (CLI --workers / BCD_WORKERS).
inline std::atomic<int>& max_workers() {
  static std::atomic<int> w{0};  // 0 = hardware concurrency
  return w;
}

inline void set_max_workers(int n) { max_workers().store(n); }

inline int effective_workers() {
  int cap = max_workers().load();
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (cap > 0 && cap < hw) return cap;
  return hw;
}

// Map over [0, n) in fixed chunks. The chunk grid depends only on n, never on
// the worker count, so callers that reduce per-chunk results in chunk order
// get bit-identical output at any parallelism level. fn(chunk, begin, end)
// must write only to chunk-owned state.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, Fn&& fn, int workers = 0) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t nchunks = (n + chunk_size - 1) / chunk_size;
  if (workers <= 0) workers = effective_workers();
  if (workers > static_cast<int>(nchunks)) workers = static_cast<int>(nchunks);

  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= nchunks || failed.load()) return;
      try {
        fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace bcd
