#pragma once
// Deterministic data parallelism: work is split into a fixed chunk grid that
// does not depend on the worker count, so ordered reductions over chunk
// buffers give bit-identical results for any --threads value.

#include <cstdint>
#include <functional>

namespace kgr {

// Worker count resolution order: set_worker_count() > KGR_THREADS > hardware.
void set_worker_count(int n);
int worker_count();

inline constexpr int kParallelChunks = 32;

// Runs body(begin, end) over [0, n) split into at most kParallelChunks
// contiguous chunks. Chunk boundaries depend only on n.
void parallel_chunks(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

// Runs body(chunk_index, begin, end); chunk_index < kParallelChunks.
void parallel_indexed_chunks(std::int64_t n,
                             const std::function<void(int, std::int64_t, std::int64_t)>& body);

}  // namespace kgr
