#pragma once

#include <cstddef>
#include <functional>

namespace miovs {

/// Number of worker threads used by the row-parallel loops. Defaults to the
/// hardware concurrency clamped to [1, 8]; override with MIOVS_THREADS.
std::size_t worker_count();

/// Runs fn(begin, end) over a static partition of [0, n) on the shared pool.
/// Partitions are disjoint, so any loop whose iteration i writes only
/// outputs owned by i produces bit-identical results for every thread count.
/// Blocks until all chunks finish. Do not nest.
void parallel_rows(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace miovs
