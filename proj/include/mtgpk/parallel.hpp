#pragma once

#include <functional>

namespace mtgpk {

/// Worker count for chunked parallel loops: MTGPK_THREADS if set (clamped to
/// [1, 256]), otherwise std::thread::hardware_concurrency().
int worker_count();

/// Runs fn(0..n_chunks-1) across workers. Chunk indices are handed out via an
/// atomic counter; each chunk must write only to its own output slot so the
/// result is independent of scheduling. Falls back to a plain loop when a
/// single worker suffices. Exceptions from workers are rethrown.
void parallel_chunks(long n_chunks, const std::function<void(long)>& fn);

}  // namespace mtgpk
