#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace invtag {

void set_thread_count(int n);  // 0 = hardware default
int thread_count();

/// Static-schedule parallel loop over [0, n). Bodies must be independent.
template <typename F>
void parallel_for(std::int64_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

/// Deterministic floating-point reduction: terms are summed inside fixed
/// 4096-element blocks (each block serial, parallel across blocks), then the
/// block partials are added in index order. The result does not depend on the
/// number of threads.
template <typename F>
double block_sum(std::int64_t n, F&& term) {
    constexpr std::int64_t kBlock = 4096;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(size_t(nblocks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t b = 0; b < nblocks; ++b) {
        const std::int64_t lo = b * kBlock;
        const std::int64_t hi = lo + kBlock < n ? lo + kBlock : n;
        double s = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) s += term(i);
        partial[size_t(b)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace invtag
