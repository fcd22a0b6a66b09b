#pragma once

#include <cstddef>
#include <functional>

namespace swf {

/// Worker count: SWF_THREADS when set to a positive integer, else the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls fn(begin, end) over fixed chunks of [0, n). Chunk boundaries depend
/// only on n and `grain`, never on the worker count, so per-chunk partial
/// results can be combined in a reproducible order.
void parallel_for(std::size_t n, std::size_t grain, const std::function<void(std::size_t, std::size_t)>& fn);

/// Number of chunks parallel_for uses for (n, grain).
inline std::size_t chunk_count(std::size_t n, std::size_t grain) { return grain == 0 ? 0 : (n + grain - 1) / grain; }

}  // namespace swf
