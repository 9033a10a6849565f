#pragma once

#include <cstdint>
#include <functional>

namespace svbrdf {

// Worker thread budget: min(hardware_concurrency, SVBRDF_THREADS if set).
int worker_thread_count();

// Runs fn(i) for i in [0, count) on up to worker_thread_count() threads with
// static index assignment. Each index is processed by exactly one worker, so
// outputs written per index are deterministic regardless of scheduling.
void parallel_for(int64_t count, const std::function<void(int64_t)>& fn);

}  // namespace svbrdf
