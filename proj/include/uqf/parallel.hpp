#pragma once

#include <cstddef>
#include <functional>

namespace uqf {

/// Calls fn(i) for i in [0, n) on up to `jobs` threads (0 = hardware concurrency).
/// Work is handed out by index; callers must make fn(i) depend only on i.
/// The first exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace uqf
