#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace pointda {

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks by index,
// so any per-index output slot is written by exactly one worker and results
// are identical for every thread count. Reductions over the outputs must be
// done by the caller in index order.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn);

int resolve_threads(int requested);

}  // namespace pointda
