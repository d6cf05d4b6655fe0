#pragma once

#include <cstddef>
#include <functional>

namespace imit {

// True when compiled with OpenMP support.
bool openmp_compiled();

// Worker count the parallel path would use (1 when OpenMP is unavailable).
std::size_t parallel_workers();

// Runs fn(0), ..., fn(n-1), on OpenMP worker threads when `parallel` is true
// and OpenMP is available, serially in index order otherwise. Each index must
// touch only its own slot of any shared output and use only pre-forked
// random streams; callers reduce the slots afterwards in index order, so the
// two paths produce bit-identical results. The serial path is the reference
// the parity tests and the benchmark compare against.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  bool parallel);

}  // namespace imit
