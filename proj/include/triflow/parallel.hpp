#ifndef TRIFLOW_PARALLEL_HPP_
#define TRIFLOW_PARALLEL_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace triflow {

// Row reductions used by the loss, gradient, and metric kernels.
//
// Determinism contract: rows are grouped into fixed blocks of kReduceBlock;
// each block is accumulated serially in row order, and block partials are
// combined by a fixed-shape pairwise tree.  The result is bitwise identical
// for any thread count, including the serial reference path.

inline constexpr std::int64_t kReduceBlock = 1024;

double pairwise_sum(std::span<const double> values);

/// Number of OpenMP threads the kernels will use (1 when built without OpenMP).
int worker_threads();
void set_worker_threads(int n);

namespace detail {
std::int64_t num_blocks(std::int64_t n);
}

/// Sum of fn(i) for i in [0,n), blocked pairwise; OpenMP across blocks.
template <class RowFn>
double block_sum(std::int64_t n, RowFn&& fn) {
    const std::int64_t nb = detail::num_blocks(n);
    std::vector<double> partial(static_cast<std::size_t>(nb), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < nb; ++b) {
        const std::int64_t lo = b * kReduceBlock;
        const std::int64_t hi = std::min(n, lo + kReduceBlock);
        double acc = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) acc += fn(i);
        partial[static_cast<std::size_t>(b)] = acc;
    }
    return pairwise_sum(partial);
}

/// Serial reference with identical blocking/combination arithmetic.
template <class RowFn>
double block_sum_serial(std::int64_t n, RowFn&& fn) {
    const std::int64_t nb = detail::num_blocks(n);
    std::vector<double> partial(static_cast<std::size_t>(nb), 0.0);
    for (std::int64_t b = 0; b < nb; ++b) {
        const std::int64_t lo = b * kReduceBlock;
        const std::int64_t hi = std::min(n, lo + kReduceBlock);
        double acc = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) acc += fn(i);
        partial[static_cast<std::size_t>(b)] = acc;
    }
    return pairwise_sum(partial);
}

/// Vector-valued variant: fn(i, acc) adds row i's contribution (length m)
/// into acc.  Returns the blocked pairwise-combined total.
template <class RowFn>
std::vector<double> block_sum_vec(std::int64_t n, int m, RowFn&& fn) {
    const std::int64_t nb = detail::num_blocks(n);
    std::vector<double> partial(static_cast<std::size_t>(nb) * m, 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < nb; ++b) {
        const std::int64_t lo = b * kReduceBlock;
        const std::int64_t hi = std::min(n, lo + kReduceBlock);
        std::span<double> acc(partial.data() + static_cast<std::size_t>(b) * m,
                              static_cast<std::size_t>(m));
        for (std::int64_t i = lo; i < hi; ++i) fn(i, acc);
    }
    // Pairwise over blocks, componentwise.
    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    std::vector<double> scratch(static_cast<std::size_t>(nb), 0.0);
    for (int j = 0; j < m; ++j) {
        for (std::int64_t b = 0; b < nb; ++b)
            scratch[static_cast<std::size_t>(b)] = partial[static_cast<std::size_t>(b) * m + j];
        out[static_cast<std::size_t>(j)] = pairwise_sum(scratch);
    }
    return out;
}

/// Parallel for over [0,n) with no reduction (results go to disjoint slots).
template <class Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace triflow

#endif  // TRIFLOW_PARALLEL_HPP_
