#pragma once

#include <cstddef>
#include <functional>

namespace sigstop {

/// Global worker-thread count for path-level loops (1 = serial).
/// Numerical results never depend on it: work is split on a fixed chunk
/// grid and reductions are combined in index order.
void set_thread_count(int n);
int thread_count();

/// Runs fn(begin, end) over [0,n) split into fixed-size chunks, possibly on
/// several threads. Chunk boundaries depend only on n, never on the thread
/// count. Exceptions from workers are rethrown on the calling thread.
void parallel_chunks(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t)>& fn);

/// Convenience: per-index loop on the default chunk grid.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sigstop
