#pragma once

#include <cstddef>
#include <functional>

namespace flowgeom {

// Worker count: hardware concurrency, capped by the F4R_THREADS environment
// variable when it holds a positive integer.
unsigned thread_count();

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
// write only to slot i, so results do not depend on the thread count.
// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace flowgeom
