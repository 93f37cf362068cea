#pragma once

#include <cstddef>
#include <cstdint>

namespace driftguard {

// Worker count used by every parallel loop in the library. Results never
// depend on it: loops write disjoint outputs, and reductions run over fixed
// chunks combined in index order.
void set_num_threads(int threads);
int num_threads();
int hardware_threads();

// Calls body(i) for i in [begin, end), possibly concurrently.
template <class Body>
void parallel_for(std::int64_t begin, std::int64_t end, Body&& body) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::int64_t i = begin; i < end; ++i) body(i);
#else
    for (std::int64_t i = begin; i < end; ++i) body(i);
#endif
}

// Same as parallel_for but with dynamic scheduling, for uneven work items.
template <class Body>
void parallel_for_dynamic(std::int64_t begin, std::int64_t end, Body&& body) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 1) num_threads(num_threads())
    for (std::int64_t i = begin; i < end; ++i) body(i);
#else
    for (std::int64_t i = begin; i < end; ++i) body(i);
#endif
}

}  // namespace driftguard
