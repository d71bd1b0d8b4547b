#pragma once

#include <cstddef>
#include <functional>

namespace unisafe {

/// Worker count: hardware concurrency, capped by the UNISAFE_THREADS environment variable.
unsigned worker_count();

/// Runs body(i) for i in [0, count) on up to worker_count() threads. Each index
/// runs exactly once; the first exception thrown by any task is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace unisafe
