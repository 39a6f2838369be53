// Minimal worker pool helpers. Parallel sections are restricted to loops whose
// iterations are independent and write disjoint, pre-allocated slots, so the
// result is bit-identical to a serial run regardless of the worker count.
#pragma once

#include <cstddef>
#include <functional>

namespace lcroll {

// Worker cap: LCROLL_THREADS if set (clamped to >= 1), else the hardware
// concurrency reported by the OS.
int worker_count();

// Runs fn(i) for i in [0, n). Falls back to a plain loop when n is small or
// only one worker is available. fn must not throw across iterations it does
// not own; exceptions are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lcroll
