#pragma once

#include <cstddef>
#include <functional>

namespace steer {

/// Worker cap from STEER_THREADS, defaulting to the logical core count.
unsigned default_threads();

/// Calls fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// visited exactly once; the first exception thrown is rethrown after join.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace steer
