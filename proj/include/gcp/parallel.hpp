#pragma once

#include <cstddef>
#include <functional>

namespace gcp {

// Worker count from GCP_THREADS, else hardware concurrency (at least 1).
std::size_t thread_count();

// Runs body(i) for i in [0, n) over a static contiguous partition. The body
// must write only to slots owned by `i`; results are then independent of the
// schedule. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace gcp
