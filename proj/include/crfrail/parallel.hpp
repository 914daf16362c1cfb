#pragma once

#include <cstddef>
#include <functional>

namespace crfrail {

// Worker count: CRFRAIL_THREADS if set and positive, else hardware concurrency.
unsigned default_thread_count();

// Calls body(i) for i in [0, n) on up to `threads` workers (0 = default).
// Indices are claimed dynamically; callers write results by index so the
// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace crfrail
