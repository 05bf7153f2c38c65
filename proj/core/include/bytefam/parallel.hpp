#pragma once

#include <cstddef>
#include <functional>

namespace bytefam {

/// Number of worker threads used when a caller passes 0.
unsigned default_thread_count();

/// Runs `body(i)` for every i in [0, count) on up to `threads` threads.
/// Indices are split into contiguous static ranges; the first exception
/// thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace bytefam
