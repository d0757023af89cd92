#pragma once

#include <cstddef>
#include <functional>

namespace gapgrad {

/// Worker count: GAPGRAD_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
int thread_count();

/// Runs body(i) for i in [0, count) on up to thread_count() threads. The first
/// exception thrown by any job is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace gapgrad
