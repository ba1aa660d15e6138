#pragma once

#include <cstddef>
#include <functional>

namespace prcnn {

// Worker count: hardware concurrency, capped by PRCNN_THREADS when set (>= 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Iterations must be
// independent; the first exception thrown is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace prcnn
