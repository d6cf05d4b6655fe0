#include "imit/core/parallel.hpp"

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace imit {

bool openmp_compiled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

std::size_t parallel_workers() {
#ifdef _OPENMP
    return static_cast<std::size_t>(omp_get_max_threads());
#else
    return 1;
#endif
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  bool parallel) {
#ifdef _OPENMP
    if (parallel && n > 1 && omp_get_max_threads() > 1) {
        // Exceptions cannot unwind out of the parallel region; capture the
        // first one (lowest index wins, matching what the serial path throws).
        std::exception_ptr first;
        std::size_t first_idx = n;
#pragma omp parallel for schedule(dynamic)
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
#pragma omp critical
                if (!first || i < first_idx) {
                    first = std::current_exception();
                    first_idx = i;
                }
            }
        }
        if (first) std::rethrow_exception(first);
        return;
    }
#endif
    (void)parallel;
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace imit
