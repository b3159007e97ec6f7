#pragma once

#include <cstddef>
#include <functional>

namespace abmscope {

// Worker cap: ABMSCOPE_MAX_WORKERS if set (>= 1), else hardware concurrency.
std::size_t max_workers();

// Runs fn(i) for i in [0, n) on up to max_workers() threads. Each index is
// executed exactly once; callers write results into slot i so the outcome is
// independent of scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace abmscope
