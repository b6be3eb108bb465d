#include "magdirac/surface.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "magdirac/parallel.hpp"

namespace magdirac {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_torus(const Lattice& lattice, const char* what) {
  if (!lattice.is_torus()) throw std::invalid_argument(std::string(what) + ": requires a torus lattice");
}

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) throw std::invalid_argument(std::string(what) + ": field shape does not match lattice");
}

// Applies a diagonal Fourier symbol to every component of a complex field.
// `twist` multiplies by exp(-i theta_s) before and exp(+i theta_s) after, where
// theta_s encodes the antiperiodic half-integer shifts.
template <typename Symbol>
void apply_symbol(const Lattice& lattice, std::span<const Complex> field, int comps,
                  const std::vector<Complex>& twist, Symbol&& symbol, std::span<Complex> out) {
  const auto& fft = lattice.spectral();
  const std::size_t n = lattice.sites();
  const int n2 = lattice.n2();
  for_each_index(static_cast<std::size_t>(comps), [&](std::size_t c) {
    std::vector<Complex> buf(n), hat(n);
    for (std::size_t s = 0; s < n; ++s) {
      buf[s] = field[s * comps + c];
      if (!twist.empty()) buf[s] *= std::conj(twist[s]);
    }
    fft.forward(buf, hat);
    for (std::size_t m = 0; m < n; ++m) hat[m] *= symbol(static_cast<int>(m / n2), static_cast<int>(m % n2));
    fft.backward(hat, buf);
    for (std::size_t s = 0; s < n; ++s) {
      Complex v = buf[s];
      if (!twist.empty()) v *= twist[s];
      out[s * comps + c] = v;
    }
  });
}

std::vector<Complex> twist_phases(const Lattice& lattice, const SpinStructure& spin) {
  const double s1 = spin.shift(0), s2 = spin.shift(1);
  if (s1 == 0.0 && s2 == 0.0) return {};
  std::vector<Complex> tw(lattice.sites());
  for (std::size_t s = 0; s < tw.size(); ++s) {
    const double theta = kTwoPi * (s1 * lattice.index1(s) / lattice.n1() + s2 * lattice.index2(s) / lattice.n2());
    tw[s] = std::polar(1.0, theta);
  }
  return tw;
}

// Central derivative along a periodic torus axis; `seam_sign` is -1 for
// antiperiodic complex fields.
template <typename T>
void central_torus(const Lattice& lattice, std::span<const T> field, int comps, int axis,
                   double seam_sign, std::span<T> out) {
  const int n1 = lattice.n1(), n2 = lattice.n2();
  const double inv = 1.0 / (2.0 * lattice.spacing(axis));
  for_each_index(lattice.sites(), [&](std::size_t s) {
    const int i1 = lattice.index1(s), i2 = lattice.index2(s);
    int p1 = i1, m1 = i1, p2 = i2, m2 = i2;
    double sp = 1.0, sm = 1.0;
    if (axis == 0) {
      p1 = (i1 + 1) % n1;
      m1 = (i1 - 1 + n1) % n1;
      if (i1 == n1 - 1) sp = seam_sign;
      if (i1 == 0) sm = seam_sign;
    } else {
      p2 = (i2 + 1) % n2;
      m2 = (i2 - 1 + n2) % n2;
      if (i2 == n2 - 1) sp = seam_sign;
      if (i2 == 0) sm = seam_sign;
    }
    const std::size_t sp_site = lattice.site(p1, p2), sm_site = lattice.site(m1, m2);
    for (int c = 0; c < comps; ++c) {
      out[s * comps + c] = (field[sp_site * comps + c] * sp - field[sm_site * comps + c] * sm) * inv;
    }
  });
}

template <typename T>
void polar_derivative(const Lattice& lattice, std::span<const T> field, int comps, int axis,
                      std::span<T> out) {
  const int n1 = lattice.n1(), n2 = lattice.n2();
  const double dr = lattice.spacing(0), dth = lattice.spacing(1);
  for_each_index(lattice.sites(), [&](std::size_t s) {
    const int i1 = lattice.index1(s), i2 = lattice.index2(s);
    for (int c = 0; c < comps; ++c) {
      auto at = [&](int a, int b) { return field[lattice.site(a, b) * comps + c]; };
      T v;
      if (axis == 0) {
        if (i1 == 0) {
          v = (-3.0 * at(0, i2) + 4.0 * at(1, i2) - at(2, i2)) / (2.0 * dr);
        } else if (i1 == n1 - 1) {
          v = (3.0 * at(n1 - 1, i2) - 4.0 * at(n1 - 2, i2) + at(n1 - 3, i2)) / (2.0 * dr);
        } else {
          v = (at(i1 + 1, i2) - at(i1 - 1, i2)) / (2.0 * dr);
        }
      } else {
        v = (at(i1, (i2 + 1) % n2) - at(i1, (i2 - 1 + n2) % n2)) / (2.0 * dth);
      }
      out[s * comps + c] = v;
    }
  });
}

// Cartesian derivative from polar ones: d/dx = cos d/dr - sin/r d/dtheta, etc.
template <typename T>
void annulus_cartesian(const Lattice& lattice, std::span<const T> field, int comps, Direction dir,
                       std::span<T> out) {
  std::vector<T> dr(field.size()), dth(field.size());
  polar_derivative<T>(lattice, field, comps, 0, dr);
  polar_derivative<T>(lattice, field, comps, 1, dth);
  for_each_index(lattice.sites(), [&](std::size_t s) {
    const double r = lattice.radius(lattice.index1(s));
    const double th = lattice.angle(lattice.index2(s));
    const double c = std::cos(th), sn = std::sin(th);
    for (int k = 0; k < comps; ++k) {
      const std::size_t idx = s * comps + k;
      out[idx] = dir == Direction::kX ? c * dr[idx] - sn / r * dth[idx] : sn * dr[idx] + c / r * dth[idx];
    }
  });
}

}  // namespace

// ---- Lattice ---------------------------------------------------------------

Lattice Lattice::torus(int n1, int n2, double length1, double length2) {
  if (n1 < kMinCount || n2 < kMinCount) throw std::invalid_argument("make_lattice: grid too coarse (need >= 8 per axis)");
  if (!(length1 > 0.0) || !(length2 > 0.0)) throw std::invalid_argument("make_lattice: side lengths must be positive");
  Lattice l;
  l.kind_ = LatticeKind::kTorus;
  l.n1_ = n1;
  l.n2_ = n2;
  l.length1_ = length1;
  l.length2_ = length2;
  l.h1_ = length1 / n1;
  l.h2_ = length2 / n2;
  l.spectral_ = std::make_shared<const SpectralGrid>(n1, n2);
  return l;
}

Lattice Lattice::annulus(int n_radial, int n_angular, double r_inner, double r_outer) {
  if (n_radial < kMinCount || n_angular < kMinCount) throw std::invalid_argument("make_lattice: grid too coarse (need >= 8 per axis)");
  if (!(r_inner > 0.0) || !(r_outer > r_inner)) throw std::invalid_argument("make_lattice: need 0 < r_inner < r_outer");
  Lattice l;
  l.kind_ = LatticeKind::kAnnulus;
  l.n1_ = n_radial;
  l.n2_ = n_angular;
  l.r_inner_ = r_inner;
  l.r_outer_ = r_outer;
  l.length1_ = r_outer - r_inner;
  l.length2_ = kTwoPi;
  l.h1_ = (r_outer - r_inner) / (n_radial - 1);
  l.h2_ = kTwoPi / n_angular;
  return l;
}

double Lattice::x(std::size_t s) const {
  if (is_torus()) return index1(s) * h1_;
  return radius(index1(s)) * std::cos(angle(index2(s)));
}

double Lattice::y(std::size_t s) const {
  if (is_torus()) return index2(s) * h2_;
  return radius(index1(s)) * std::sin(angle(index2(s)));
}

double Lattice::cell_area(std::size_t s) const {
  if (is_torus()) return h1_ * h2_;
  const int i1 = index1(s);
  const double w = (i1 == 0 || i1 == n1_ - 1) ? 0.5 : 1.0;
  return w * radius(i1) * h1_ * h2_;
}

bool Lattice::on_boundary(std::size_t s) const {
  if (is_torus()) return false;
  const int i1 = index1(s);
  return i1 == 0 || i1 == n1_ - 1;
}

double Lattice::min_wavenumber() const {
  require_torus(*this, "min_wavenumber");
  return kTwoPi / std::max(length1_, length2_);
}

std::vector<double> Lattice::wavenumbers(int axis, double shift, bool zero_nyquist) const {
  const int n = count(axis);
  const double unit = kTwoPi / length(axis);
  std::vector<double> k(n);
  for (int m = 0; m < n; ++m) {
    const int sm = signed_mode(m, n);
    k[m] = unit * (sm + shift);
    if (zero_nyquist && shift == 0.0 && n % 2 == 0 && 2 * m == n) k[m] = 0.0;
  }
  return k;
}

const SpectralGrid& Lattice::spectral() const {
  require_torus(*this, "spectral");
  return *spectral_;
}

bool Lattice::same_shape(const Lattice& o) const {
  return kind_ == o.kind_ && n1_ == o.n1_ && n2_ == o.n2_ && length1_ == o.length1_ &&
         length2_ == o.length2_ && r_inner_ == o.r_inner_ && r_outer_ == o.r_outer_;
}

const CliffordRep& CliffordRep::standard() {
  static const CliffordRep rep = [] {
    const Complex i(0.0, 1.0);
    CliffordRep r;
    r.gamma1 << 0.0, i, i, 0.0;
    r.gamma2 << 0.0, 1.0, -1.0, 0.0;
    return r;
  }();
  return rep;
}

// ---- real derivatives ------------------------------------------------------

void partial(const Lattice& lattice, std::span<const double> field, int comps, Direction dir,
             Scheme scheme, std::span<double> out) {
  check_size(field.size(), lattice.sites() * comps, "partial");
  check_size(out.size(), field.size(), "partial");
  const int axis = static_cast<int>(dir);
  if (!lattice.is_torus()) {
    if (scheme == Scheme::kSpectral) throw std::invalid_argument("partial: spectral scheme requires a torus");
    annulus_cartesian<double>(lattice, field, comps, dir, out);
    return;
  }
  if (scheme == Scheme::kCentral) {
    central_torus<double>(lattice, field, comps, axis, 1.0, out);
    return;
  }
  const auto k = lattice.wavenumbers(axis, 0.0, true);
  const int n2 = lattice.n2();
  const auto& fft = lattice.spectral();
  const std::size_t n = lattice.sites();
  for_each_index(static_cast<std::size_t>(comps), [&](std::size_t c) {
    std::vector<Complex> buf(n), hat(n);
    for (std::size_t s = 0; s < n; ++s) buf[s] = field[s * comps + c];
    fft.forward(buf, hat);
    for (std::size_t m = 0; m < n; ++m) {
      const double kk = axis == 0 ? k[m / n2] : k[m % n2];
      hat[m] *= Complex(0.0, kk);
    }
    fft.backward(hat, buf);
    for (std::size_t s = 0; s < n; ++s) out[s * comps + c] = buf[s].real();
  });
}

void partial_polar(const Lattice& lattice, std::span<const double> field, int comps, int axis,
                   std::span<double> out) {
  if (lattice.is_torus()) throw std::invalid_argument("partial_polar: requires an annulus lattice");
  check_size(field.size(), lattice.sites() * comps, "partial_polar");
  check_size(out.size(), field.size(), "partial_polar");
  polar_derivative<double>(lattice, field, comps, axis, out);
}

void laplacian(const Lattice& lattice, std::span<const double> field, int comps, Scheme scheme,
               std::span<double> out) {
  check_size(field.size(), lattice.sites() * comps, "laplacian");
  check_size(out.size(), field.size(), "laplacian");
  const int n1 = lattice.n1(), n2 = lattice.n2();
  if (lattice.is_torus() && scheme == Scheme::kSpectral) {
    const auto k1 = lattice.wavenumbers(0, 0.0, true);
    const auto k2 = lattice.wavenumbers(1, 0.0, true);
    const auto& fft = lattice.spectral();
    const std::size_t n = lattice.sites();
    for_each_index(static_cast<std::size_t>(comps), [&](std::size_t c) {
      std::vector<Complex> buf(n), hat(n);
      for (std::size_t s = 0; s < n; ++s) buf[s] = field[s * comps + c];
      fft.forward(buf, hat);
      for (std::size_t m = 0; m < n; ++m) {
        const double a = k1[m / n2], b = k2[m % n2];
        hat[m] *= -(a * a + b * b);
      }
      fft.backward(hat, buf);
      for (std::size_t s = 0; s < n; ++s) out[s * comps + c] = buf[s].real();
    });
    return;
  }
  if (lattice.is_torus()) {
    const double ih1 = 1.0 / (lattice.spacing(0) * lattice.spacing(0));
    const double ih2 = 1.0 / (lattice.spacing(1) * lattice.spacing(1));
    for_each_index(lattice.sites(), [&](std::size_t s) {
      const int i1 = lattice.index1(s), i2 = lattice.index2(s);
      const auto e = lattice.site((i1 + 1) % n1, i2), w = lattice.site((i1 - 1 + n1) % n1, i2);
      const auto nn = lattice.site(i1, (i2 + 1) % n2), so = lattice.site(i1, (i2 - 1 + n2) % n2);
      for (int c = 0; c < comps; ++c) {
        const double f = field[s * comps + c];
        out[s * comps + c] = (field[e * comps + c] - 2 * f + field[w * comps + c]) * ih1 +
                             (field[nn * comps + c] - 2 * f + field[so * comps + c]) * ih2;
      }
    });
    return;
  }
  if (scheme == Scheme::kSpectral) throw std::invalid_argument("laplacian: spectral scheme requires a torus");
  const double dr = lattice.spacing(0), dth = lattice.spacing(1);
  for_each_index(lattice.sites(), [&](std::size_t s) {
    const int i1 = lattice.index1(s), i2 = lattice.index2(s);
    if (i1 == 0 || i1 == n1 - 1) {
      for (int c = 0; c < comps; ++c) out[s * comps + c] = 0.0;
      return;
    }
    const double r = lattice.radius(i1);
    const auto o = lattice.site(i1 + 1, i2), in = lattice.site(i1 - 1, i2);
    const auto a = lattice.site(i1, (i2 + 1) % n2), b = lattice.site(i1, (i2 - 1 + n2) % n2);
    for (int c = 0; c < comps; ++c) {
      const double f = field[s * comps + c];
      const double frr = (field[o * comps + c] - 2 * f + field[in * comps + c]) / (dr * dr);
      const double fr = (field[o * comps + c] - field[in * comps + c]) / (2 * dr);
      const double ftt = (field[a * comps + c] - 2 * f + field[b * comps + c]) / (dth * dth);
      out[s * comps + c] = frr + fr / r + ftt / (r * r);
    }
  });
}

// ---- complex derivatives -----------------------------------------------------

void partial_complex(const Lattice& lattice, const SpinStructure& spin,
                     std::span<const Complex> field, int comps, Direction dir, Scheme scheme,
                     std::span<Complex> out) {
  check_size(field.size(), lattice.sites() * comps, "partial_complex");
  check_size(out.size(), field.size(), "partial_complex");
  const int axis = static_cast<int>(dir);
  if (!lattice.is_torus()) {
    if (scheme == Scheme::kSpectral) throw std::invalid_argument("partial_complex: spectral scheme requires a torus");
    annulus_cartesian<Complex>(lattice, field, comps, dir, out);
    return;
  }
  if (scheme == Scheme::kCentral) {
    central_torus<Complex>(lattice, field, comps, axis, spin.shift(axis) != 0.0 ? -1.0 : 1.0, out);
    return;
  }
  const auto k = lattice.wavenumbers(axis, spin.shift(axis), false);
  const auto twist = twist_phases(lattice, spin);
  apply_symbol(lattice, field, comps, twist,
               [&](int m1, int m2) { return Complex(0.0, axis == 0 ? k[m1] : k[m2]); }, out);
}

void laplacian_complex(const Lattice& lattice, const SpinStructure& spin,
                       std::span<const Complex> field, int comps, std::span<Complex> out) {
  require_torus(lattice, "laplacian_complex");
  check_size(field.size(), lattice.sites() * comps, "laplacian_complex");
  const auto k1 = lattice.wavenumbers(0, spin.shift(0), false);
  const auto k2 = lattice.wavenumbers(1, spin.shift(1), false);
  const auto twist = twist_phases(lattice, spin);
  apply_symbol(lattice, field, comps, twist,
               [&](int m1, int m2) { return Complex(-(k1[m1] * k1[m1] + k2[m2] * k2[m2]), 0.0); }, out);
}

void shifted_inverse_laplacian_complex(const Lattice& lattice, const SpinStructure& spin,
                                       std::span<const Complex> field, int comps, double sigma,
                                       std::span<Complex> out) {
  require_torus(lattice, "shifted_inverse_laplacian_complex");
  check_size(field.size(), lattice.sites() * comps, "shifted_inverse_laplacian_complex");
  if (!(sigma > 0.0)) throw std::invalid_argument("shifted_inverse_laplacian_complex: need sigma > 0");
  const auto k1 = lattice.wavenumbers(0, spin.shift(0), false);
  const auto k2 = lattice.wavenumbers(1, spin.shift(1), false);
  const auto twist = twist_phases(lattice, spin);
  apply_symbol(lattice, field, comps, twist,
               [&](int m1, int m2) { return Complex(1.0 / (sigma + k1[m1] * k1[m1] + k2[m2] * k2[m2]), 0.0); }, out);
}

void dirac_untwisted(const Lattice& lattice, const SpinStructure& spin,
                     std::span<const Complex> psi, int q, std::span<Complex> out, Scheme scheme) {
  require_torus(lattice, "dirac_untwisted");
  const int comps = 2 * q;
  check_size(psi.size(), lattice.sites() * comps, "dirac_untwisted");
  check_size(out.size(), psi.size(), "dirac_untwisted");
  if (scheme == Scheme::kSpectral) {
    // gamma_1 d_x + gamma_2 d_y swaps the spinor slots, so each output
    // component is one symbol applied to its partner component.
    const auto k1 = lattice.wavenumbers(0, spin.shift(0), false);
    const auto k2 = lattice.wavenumbers(1, spin.shift(1), false);
    const auto twist = twist_phases(lattice, spin);
    const auto& fft = lattice.spectral();
    const std::size_t n = lattice.sites();
    const int n2 = lattice.n2();
    for_each_index(static_cast<std::size_t>(comps), [&](std::size_t c) {
      const std::size_t src = c ^ 1u;
      const double sign = (c % 2 == 0) ? 1.0 : -1.0;
      std::vector<Complex> buf(n), hat(n);
      for (std::size_t s = 0; s < n; ++s) {
        buf[s] = psi[s * comps + src];
        if (!twist.empty()) buf[s] *= std::conj(twist[s]);
      }
      fft.forward(buf, hat);
      for (std::size_t m = 0; m < n; ++m) hat[m] *= Complex(-k1[m / n2], sign * k2[m % n2]);
      fft.backward(hat, buf);
      for (std::size_t s = 0; s < n; ++s) {
        Complex v = buf[s];
        if (!twist.empty()) v *= twist[s];
        out[s * comps + c] = v;
      }
    });
    return;
  }
  std::vector<Complex> dx(psi.size()), dy(psi.size());
  partial_complex(lattice, spin, psi, comps, Direction::kX, scheme, dx);
  partial_complex(lattice, spin, psi, comps, Direction::kY, scheme, dy);
  for_each_index(lattice.sites() * q, [&](std::size_t block) {
    Complex a[2], b[2];
    apply_gamma(0, &dx[2 * block], a);
    apply_gamma(1, &dy[2 * block], b);
    out[2 * block] = a[0] + b[0];
    out[2 * block + 1] = a[1] + b[1];
  });
}

ConformalRescale conformal_rescale(const Lattice& lattice, const ConformalFactor& u,
                                   std::span<const Complex> psi, int q) {
  check_size(u.u.size(), lattice.sites(), "conformal_rescale");
  check_size(psi.size(), lattice.sites() * 2 * q, "conformal_rescale");
  ConformalRescale r;
  r.volume_weight.resize(lattice.sites());
  r.psi.resize(psi.size());
  for (std::size_t s = 0; s < lattice.sites(); ++s) {
    if (!std::isfinite(u.u[s])) throw std::invalid_argument("conformal_rescale: non-finite conformal factor");
    r.volume_weight[s] = std::exp(2.0 * u.u[s]);
    const double scale = std::exp(-0.5 * u.u[s]);
    for (int c = 0; c < 2 * q; ++c) r.psi[s * 2 * q + c] = scale * psi[s * 2 * q + c];
  }
  return r;
}

}  // namespace magdirac
