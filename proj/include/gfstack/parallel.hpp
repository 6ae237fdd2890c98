#pragma once

#include <cstddef>
#include <functional>

namespace gfstack {

/// Worker count from STACKNET_THREADS (0 or unset = hardware concurrency).
std::size_t thread_budget();

/// Runs fn(i) for i in [0, count) on up to thread_budget() threads. Each index
/// runs exactly once; the first exception thrown by any task is rethrown after
/// all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace gfstack
