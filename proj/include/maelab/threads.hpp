#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace maelab {

// Worker cap: MAE_LAB_THREADS when set (>= 1), otherwise the hardware
// concurrency, never more than the task count.
size_t worker_count(size_t task_count);

// Runs independent tasks on up to worker_count(tasks.size()) threads.
// Tasks must not share mutable state; callers collect results into
// pre-sized slots so assembly order never depends on scheduling. The
// first exception, if any, is rethrown after all workers finish.
void parallel_tasks(std::vector<std::function<void()>> tasks);

}  // namespace maelab
