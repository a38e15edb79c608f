#include "gsplane/common.hpp"

#include <atomic>

namespace gsplane {

namespace {
int g_threads = 0;
}

void set_thread_count(int n) { g_threads = n < 0 ? 0 : n; }

int thread_count() {
  if (g_threads > 0) return g_threads;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

void parallel_chunks(std::size_t total, std::size_t grain,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  if (total == 0) return;
  if (grain == 0) grain = 1;
  const std::size_t n_chunks = (total + grain - 1) / grain;
  const int workers = static_cast<int>(std::min<std::size_t>(thread_count(), n_chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(c * grain, std::min(total, (c + 1) * grain));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      fn(c * grain, std::min(total, (c + 1) * grain));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int i = 0; i < workers - 1; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace gsplane
