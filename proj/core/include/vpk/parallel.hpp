#pragma once

#include <cstddef>
#include <functional>

namespace vpk {

int thread_count();
void set_thread_count(int n);

// Run fn(begin, end, chunk_index) over a fixed partition of [0, n) into
// `chunks` contiguous ranges. The partition does not depend on the thread
// count, so per-chunk results merged in chunk order are bit-reproducible.
void parallel_chunks(std::size_t n, std::size_t chunks,
                     const std::function<void(std::size_t, std::size_t,
                                              std::size_t)>& fn);

}  // namespace vpk
