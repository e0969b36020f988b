#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace nlplap {

/// Number of worker threads used by parallel loops (>= 1). Changing it never
/// changes numerical results: every loop body writes disjoint outputs and every
/// reduction runs in a fixed order.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Runs body(begin, end) over a static partition of [0, n). Falls back to a
/// serial call when n < grain, when only one thread is configured, or when
/// called from inside another parallel region.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t grain = 64);

/// Pairwise summation with a fixed tree shape (independent of thread count).
double ordered_sum(std::span<const double> values);

}  // namespace nlplap
