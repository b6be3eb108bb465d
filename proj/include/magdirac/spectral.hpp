#pragma once

#include <complex>
#include <span>
#include <vector>

namespace magdirac {

using Complex = std::complex<double>;

/// 2D periodic FFT on an n1 x n2 row-major grid (site = i1 * n2 + i2).
/// Thread-safe after construction; backward() includes the 1/(n1 n2) factor.
class SpectralGrid {
 public:
  SpectralGrid(int n1, int n2);
  ~SpectralGrid();
  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;

  void forward(std::span<const Complex> in, std::span<Complex> out) const;
  void backward(std::span<const Complex> in, std::span<Complex> out) const;

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  std::size_t size() const { return static_cast<std::size_t>(n1_) * n2_; }

 private:
  int n1_;
  int n2_;
  void* forward_plan_ = nullptr;
  void* backward_plan_ = nullptr;
};

/// Signed integer mode index of FFT bin m on an n-point axis: m for m < n/2,
/// m - n otherwise (the Nyquist bin maps to -n/2).
inline int signed_mode(int m, int n) { return 2 * m < n ? m : m - n; }

}  // namespace magdirac
