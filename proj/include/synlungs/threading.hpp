#pragma once

#include <cstdint>
#include <functional>

namespace synlungs {

// Global worker count used when a call site passes n_threads = 0.
// 0 at startup means "hardware concurrency".
int default_thread_count();
void set_default_thread_count(int n);

// Runs fn over [0, n) split into contiguous chunks, one chunk per worker.
// fn(begin, end) must only write state owned by its own index range, so the
// result is identical for any thread count.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  int n_threads = 0);

}  // namespace synlungs
