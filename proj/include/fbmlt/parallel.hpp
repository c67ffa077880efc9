#pragma once

#include <cstddef>
#include <functional>

namespace fbmlt {

/// Thread count from FBMLT_THREADS, else hardware concurrency (at least 1).
unsigned default_threads();

/// Calls body(i) for i in [0, count) on up to `threads` workers. Each index is
/// visited exactly once; the first exception thrown is rethrown on the caller.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace fbmlt
