#pragma once

#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chaoslab {

inline int default_workers() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Runs body(i) for i in [0, count) on `workers` threads (0 = default).
/// Each index must write only its own output slots; results are then
/// independent of the worker count. The exception thrown by the lowest
/// failing index is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
    if (workers <= 0) workers = default_workers();
    std::exception_ptr failure;
    std::size_t failed_index = std::numeric_limits<std::size_t>::max();
    std::mutex failure_mutex;
    const auto n = static_cast<long long>(count);
#pragma omp parallel for num_threads(workers) schedule(static) if (workers > 1 && count > 1)
    for (long long i = 0; i < n; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (static_cast<std::size_t>(i) < failed_index) {
                failed_index = static_cast<std::size_t>(i);
                failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace chaoslab
