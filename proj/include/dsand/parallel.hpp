#pragma once

#include <cstddef>
#include <functional>

namespace dsand {

/// Worker count: 1 when forced serial, else DSAND_THREADS, else hardware.
int thread_count();
void set_single_thread(bool serial);
void set_thread_count(int threads);

/// Runs body(i) for i in [0, count). Each index is processed exactly once;
/// callers store per-index results and merge them in index order, which
/// keeps outputs identical for every thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace dsand
