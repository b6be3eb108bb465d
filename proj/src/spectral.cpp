#include "magdirac/spectral.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace magdirac {

namespace {
// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

SpectralGrid::SpectralGrid(int n1, int n2) : n1_(n1), n2_(n2) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("SpectralGrid: empty grid");
  std::lock_guard lock(planner_mutex());
  std::vector<Complex> a(size()), b(size());
  auto* pa = reinterpret_cast<fftw_complex*>(a.data());
  auto* pb = reinterpret_cast<fftw_complex*>(b.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ = fftw_plan_dft_2d(n1, n2, pa, pb, FFTW_FORWARD, flags);
  backward_plan_ = fftw_plan_dft_2d(n1, n2, pa, pb, FFTW_BACKWARD, flags);
  if (!forward_plan_ || !backward_plan_) throw std::runtime_error("SpectralGrid: FFTW planning failed");
}

SpectralGrid::~SpectralGrid() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
}

void SpectralGrid::forward(std::span<const Complex> in, std::span<Complex> out) const {
  // FFTW may not write to `in` for out-of-place complex transforms.
  auto* pin = const_cast<fftw_complex*>(reinterpret_cast<const fftw_complex*>(in.data()));
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), pin,
                   reinterpret_cast<fftw_complex*>(out.data()));
}

void SpectralGrid::backward(std::span<const Complex> in, std::span<Complex> out) const {
  auto* pin = const_cast<fftw_complex*>(reinterpret_cast<const fftw_complex*>(in.data()));
  fftw_execute_dft(static_cast<fftw_plan>(backward_plan_), pin,
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / static_cast<double>(size());
  for (auto& v : out) v *= scale;
}

}  // namespace magdirac
