#include "vpk/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace vpk {

namespace {
int g_threads = 1;
}

int thread_count() { return g_threads; }
void set_thread_count(int n) { g_threads = std::max(1, n); }

void parallel_chunks(std::size_t n, std::size_t chunks,
                     const std::function<void(std::size_t, std::size_t,
                                              std::size_t)>& fn) {
  if (n == 0) return;
  chunks = std::max<std::size_t>(1, std::min(chunks, n));
  auto chunk_range = [&](std::size_t c, std::size_t& b, std::size_t& e) {
    b = n * c / chunks;
    e = n * (c + 1) / chunks;
  };
  const int nthreads = std::min<int>(g_threads, static_cast<int>(chunks));
  if (nthreads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      std::size_t b, e;
      chunk_range(c, b, e);
      fn(b, e, c);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) break;
      std::size_t b, e;
      chunk_range(c, b, e);
      fn(b, e, c);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads - 1);
  for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace vpk
