#pragma once

#include <cstddef>
#include <functional>

namespace hwnas {

// Worker count used by kernels. Initialised from NAS_RT_THREADS on first use
// (unset or 0 means hardware concurrency).
int num_threads();
void set_num_threads(int n);

// Calls fn(i) for every i in [0, n). Each index is handled by exactly one
// worker, so kernels that own disjoint outputs per index stay bit-identical
// regardless of thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hwnas
