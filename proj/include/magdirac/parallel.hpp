#pragma once

#include <cstddef>
#include <span>

namespace magdirac {

/// Number of OpenMP threads used by sitewise kernels. 1 selects the serial
/// reference path. Results never depend on this value: every reduction goes
/// through pairwise_sum over a per-site buffer.
int num_threads();
void set_num_threads(int threads);

/// Reads MAGDIRAC_THREADS (default 1) and applies it.
void configure_threads_from_env();

/// Fixed-shape pairwise tree reduction (leaf blocks of 8, serial).
double pairwise_sum(std::span<const double> values);

template <typename Fn>
void for_each_index(std::size_t count, Fn&& fn) {
  const int threads = num_threads();
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
}

}  // namespace magdirac
