#pragma once

#include <cstddef>
#include <functional>

namespace fitgate {

// Worker count: FITGATE_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Calls fn(i) for every i in [0, n) across worker threads. Callers write
// results into slot i, so output never depends on scheduling. The exception
// thrown for the lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fitgate
