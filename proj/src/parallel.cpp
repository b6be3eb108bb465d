#include "magdirac/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace magdirac {

namespace {
std::atomic<int> g_threads{1};

double pairwise_range(const double* data, std::size_t count) {
  if (count <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += data[i];
    return acc;
  }
  const std::size_t half = count / 2;
  return pairwise_range(data, half) + pairwise_range(data + half, count - half);
}
}  // namespace

int num_threads() { return g_threads.load(std::memory_order_relaxed); }

void set_num_threads(int threads) { g_threads.store(threads < 1 ? 1 : threads); }

void configure_threads_from_env() {
  if (const char* env = std::getenv("MAGDIRAC_THREADS")) {
    try {
      set_num_threads(std::stoi(env));
    } catch (...) {
      set_num_threads(1);
    }
  }
}

double pairwise_sum(std::span<const double> values) {
  return pairwise_range(values.data(), values.size());
}

}  // namespace magdirac
