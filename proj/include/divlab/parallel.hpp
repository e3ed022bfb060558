#pragma once

#include <cstddef>
#include <functional>

namespace divlab {

/// Worker count from the DIVLAB_THREADS environment variable; 1 when unset.
/// Throws ConfigError for a value that is not a positive integer.
std::size_t threads_from_env();

/// Calls body(i) for every i in [0, n) on up to `threads` workers. Each index
/// runs exactly once; the first exception thrown by any body is rethrown
/// after all workers have stopped.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace divlab
