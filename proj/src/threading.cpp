#include "synlungs/threading.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace synlungs {

namespace {
std::atomic<int> g_thread_count{0};
}

int default_thread_count() {
  int n = g_thread_count.load();
  if (n <= 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
  }
  return n;
}

void set_default_thread_count(int n) { g_thread_count.store(n); }

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  int n_threads) {
  if (n <= 0) return;
  if (n_threads <= 0) n_threads = default_thread_count();
  n_threads = static_cast<int>(std::min<std::int64_t>(n_threads, n));
  if (n_threads <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(n_threads));
  const std::int64_t chunk = (n + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    const std::int64_t begin = t * chunk;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace synlungs
