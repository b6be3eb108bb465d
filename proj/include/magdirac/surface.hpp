#pragma once

// Flat 2D lattice domains, spin structures, Clifford data and the discrete
// derivative / Dirac operators everything else is built on.
//
// Storage convention: a lattice field with `comps` components is a flat
// site-major array, value(site, c) = data[site * comps + c]. Spinor fields put
// the two spinor components innermost: data[(site * q + i) * 2 + a].

#include <array>
#include <complex>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "magdirac/spectral.hpp"

namespace magdirac {

enum class LatticeKind { kTorus, kAnnulus };
enum class Direction { kX = 0, kY = 1 };
enum class Scheme { kSpectral, kCentral };
enum class BoundaryPhase { kPeriodic, kAntiperiodic };

struct SpinStructure {
  BoundaryPhase phase1 = BoundaryPhase::kPeriodic;
  BoundaryPhase phase2 = BoundaryPhase::kPeriodic;

  /// Wavenumber shift in units of 2 pi / L (0 or 1/2).
  double shift(int axis) const {
    return (axis == 0 ? phase1 : phase2) == BoundaryPhase::kAntiperiodic ? 0.5 : 0.0;
  }
  bool operator==(const SpinStructure&) const = default;
};

/// Uniform tensor-product grid. On the torus, sites are (i1 h1, i2 h2). On the
/// annulus, i1 indexes radius r_inner + i1 dr (both rings included, Dirichlet)
/// and i2 indexes angle 2 pi i2 / n2.
class Lattice {
 public:
  static constexpr int kMinCount = 8;

  static Lattice torus(int n1, int n2, double length1, double length2);
  static Lattice annulus(int n_radial, int n_angular, double r_inner, double r_outer);

  LatticeKind kind() const { return kind_; }
  bool is_torus() const { return kind_ == LatticeKind::kTorus; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int count(int axis) const { return axis == 0 ? n1_ : n2_; }
  std::size_t sites() const { return static_cast<std::size_t>(n1_) * n2_; }
  std::size_t site(int i1, int i2) const { return static_cast<std::size_t>(i1) * n2_ + i2; }
  int index1(std::size_t s) const { return static_cast<int>(s / n2_); }
  int index2(std::size_t s) const { return static_cast<int>(s % n2_); }

  /// Torus: h_alpha = L_alpha / n_alpha. Annulus: (dr, dtheta).
  double spacing(int axis) const { return axis == 0 ? h1_ : h2_; }
  /// Torus side lengths; annulus: (r_outer - r_inner, 2 pi).
  double length(int axis) const { return axis == 0 ? length1_ : length2_; }
  double r_inner() const { return r_inner_; }
  double r_outer() const { return r_outer_; }
  double radius(int i1) const { return r_inner_ + i1 * h1_; }
  double angle(int i2) const { return i2 * h2_; }

  /// Cartesian coordinates of a site.
  double x(std::size_t s) const;
  double y(std::size_t s) const;

  /// Quadrature weight: h1 h2 on the torus; trapezoid-in-r r dr dtheta on the annulus.
  double cell_area(std::size_t s) const;
  /// True for annulus boundary rings.
  bool on_boundary(std::size_t s) const;

  /// Smallest nonzero periodic wavenumber 2 pi / max(L1, L2) (torus only).
  double min_wavenumber() const;

  /// Wavenumbers of the FFT bins along `axis` shifted by `shift` (in units of
  /// 2 pi / L). With `zero_nyquist` the unpaired Nyquist bin gets 0, which keeps
  /// real derivatives real and antisymmetric.
  std::vector<double> wavenumbers(int axis, double shift, bool zero_nyquist) const;

  const SpectralGrid& spectral() const;

  bool same_shape(const Lattice& other) const;

 private:
  LatticeKind kind_ = LatticeKind::kTorus;
  int n1_ = 0, n2_ = 0;
  double h1_ = 0, h2_ = 0;
  double length1_ = 0, length2_ = 0;
  double r_inner_ = 0, r_outer_ = 0;
  std::shared_ptr<const SpectralGrid> spectral_;
};

/// gamma_alpha as 2x2 complex matrices representing Clifford multiplication by e_alpha.
struct CliffordRep {
  Eigen::Matrix2cd gamma1;
  Eigen::Matrix2cd gamma2;

  /// gamma1 = i sigma1, gamma2 = i sigma2.
  static const CliffordRep& standard();
  const Eigen::Matrix2cd& gamma(int alpha) const { return alpha == 0 ? gamma1 : gamma2; }
};

/// out = gamma_alpha * in for one 2-spinor (standard representation).
inline void apply_gamma(int alpha, const Complex* in, Complex* out) {
  constexpr Complex i(0.0, 1.0);
  if (alpha == 0) {
    out[0] = i * in[1];
    out[1] = i * in[0];
  } else {
    out[0] = in[1];
    out[1] = -in[0];
  }
}

// ---- real lattice fields ------------------------------------------------

/// Cartesian partial derivative of a real field with `comps` components.
/// Spectral requires a torus. On the annulus, central differences in (r, theta)
/// are combined by the chain rule; boundary rings use one-sided second-order
/// radial differences.
void partial(const Lattice& lattice, std::span<const double> field, int comps, Direction dir,
             Scheme scheme, std::span<double> out);

/// Polar derivatives on the annulus: axis 0 = d/dr, axis 1 = d/dtheta.
void partial_polar(const Lattice& lattice, std::span<const double> field, int comps, int axis,
                   std::span<double> out);

/// Spectral torus Laplacian D_x^2 + D_y^2 built from the real (Nyquist-zeroed)
/// derivative, i.e. exactly -(D_x^T D_x + D_y^T D_y). Central: 5-point stencil on
/// the torus, polar stencil on the annulus (boundary rings set to 0).
void laplacian(const Lattice& lattice, std::span<const double> field, int comps, Scheme scheme,
               std::span<double> out);

// ---- complex / spinor fields --------------------------------------------

/// Derivative of complex fields honoring the spin-structure boundary phases.
/// Torus spectral uses shifted wavenumbers (signed Nyquist, no zeroing);
/// torus central flips sign across antiperiodic seams; annulus is central.
void partial_complex(const Lattice& lattice, const SpinStructure& spin,
                     std::span<const Complex> field, int comps, Direction dir, Scheme scheme,
                     std::span<Complex> out);

/// Untwisted Dirac operator gamma_1 d_1 + gamma_2 d_2 applied to q ambient
/// spinors. Torus only; spectral by default.
void dirac_untwisted(const Lattice& lattice, const SpinStructure& spin,
                     std::span<const Complex> psi, int q, std::span<Complex> out,
                     Scheme scheme = Scheme::kSpectral);

/// Spectral Laplacian of complex fields with the spin-structure wavenumbers
/// (symbol -|k|^2); dirac_untwisted squared equals minus this.
void laplacian_complex(const Lattice& lattice, const SpinStructure& spin,
                       std::span<const Complex> field, int comps, std::span<Complex> out);

/// (sigma - lap)^{-1} for complex fields with spin-structure wavenumbers (torus, sigma > 0).
void shifted_inverse_laplacian_complex(const Lattice& lattice, const SpinStructure& spin,
                                       std::span<const Complex> field, int comps, double sigma,
                                       std::span<Complex> out);

// ---- conformal data -------------------------------------------------------

/// Conformal exponent u at each site; metric h = e^{2u} delta.
struct ConformalFactor {
  std::vector<double> u;
  static ConformalFactor flat(const Lattice& lattice) { return {std::vector<double>(lattice.sites(), 0.0)}; }
};

struct ConformalRescale {
  std::vector<double> volume_weight;  // e^{2u}
  std::vector<Complex> psi;           // e^{-u/2} psi
};

/// Volume weights of h = e^{2u} delta and the spinor rescale psi -> e^{-u/2} psi.
ConformalRescale conformal_rescale(const Lattice& lattice, const ConformalFactor& u,
                                   std::span<const Complex> psi, int q);

}  // namespace magdirac
