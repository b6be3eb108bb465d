#pragma once

// The unknowns: the map phi into N and the ambient vector spinor psi along phi.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "magdirac/surface.hpp"
#include "magdirac/target.hpp"

namespace magdirac {

/// Ambient q-vectors per site, values[s*q + i]. A flat-target map may carry an
/// affine part: slope[alpha*q + i] = A_alpha^i, and then values - A.x is periodic
/// on the torus (derivatives add A_alpha back; see operators).
struct MapField {
  int q = 0;
  std::vector<double> values;
  std::vector<double> slope;  // empty or 2*q

  MapField() = default;
  MapField(const Lattice& lattice, int q_) : q(q_), values(lattice.sites() * q_, 0.0) {}

  const double* at(std::size_t s) const { return &values[s * q]; }
  double* at(std::size_t s) { return &values[s * q]; }
  bool has_slope() const { return !slope.empty(); }
  std::size_t sites() const { return q ? values.size() / q : 0; }
};

/// q ambient 2-spinors per site, values[(s*q + i)*2 + a].
struct SpinorField {
  int q = 0;
  std::vector<Complex> values;

  SpinorField() = default;
  SpinorField(const Lattice& lattice, int q_) : q(q_), values(lattice.sites() * q_ * 2) {}

  const Complex* at(std::size_t s) const { return &values[s * q * 2]; }
  Complex* at(std::size_t s) { return &values[s * q * 2]; }
};

/// Sitewise T(phi(x)) applied across the ambient index; phi must be on N.
SpinorField enforce_tangency(const SpinorField& psi, const MapField& phi, const TargetManifold& target);
/// Largest |sum_i nu^i psi^i| over sites and normal indices.
double tangency_violation(const SpinorField& psi, const MapField& phi, const TargetManifold& target);

/// Sitewise nearest-point projection; throws std::domain_error naming the site.
MapField project_map(const MapField& raw, const TargetManifold& target);
/// Largest distance of a site value from N.
double manifold_violation(const MapField& phi, const TargetManifold& target);

/// Band-limited real noise with `comps` components: random Fourier modes with
/// integer mode radius in (0, cutoff], scaled to RMS `amplitude` per component.
std::vector<double> smooth_noise(const Lattice& lattice, int comps, std::uint64_t seed, double amplitude,
                                 double cutoff);

/// kStereographic: (2 Re w, 2 Im w, |w|^2 - 1) / (1 + |w|^2) with w = scale * (x + iy),
/// conformal onto the unit sphere in R^3 (q = 3), plus `amplitude` noise on
/// non-boundary sites when amplitude > 0.
enum class MapInitKind { kConstant, kWinding, kRandomSmooth, kElliptic, kStereographic };

struct MapInit {
  MapInitKind kind = MapInitKind::kRandomSmooth;
  std::vector<double> base;  // y0; defaults to the last basis vector
  int winding1 = 1, winding2 = 0;
  std::uint64_t seed = 0;
  double amplitude = 0.1;
  double cutoff = 4.0;
  double scale = 1.0;
};

MapField init_map(const MapInit& spec, const Lattice& lattice, const TargetManifold& target);

/// Constant spinor eps (2 components) in every ambient slot, then tangency-enforced.
SpinorField constant_spinor(const Lattice& lattice, const MapField& phi, const TargetManifold& target,
                            const std::array<Complex, 2>& eps);

/// A degree-2 holomorphic map from the square torus of side 2 pi to S^2 (an
/// elliptic function of order 2 followed by inverse stereographic projection)
/// with the spinor psi = sum_alpha gamma_alpha eps (x) d_alpha phi built from
/// its closed-form derivatives. Periodic spin structure.
struct EllipticPair {
  MapField phi;
  SpinorField psi;
  std::vector<double> dphi_x, dphi_y;  // analytic derivatives
};
EllipticPair elliptic_pair(const Lattice& lattice, const std::array<Complex, 2>& eps);

// ---- CSV snapshots ------------------------------------------------------------

/// Writes `content` to `path` through a temporary file and rename.
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

/// "site,i1,i2,x,y,phi_0..phi_{q-1}[,psi_<i>_<a>_re,psi_<i>_<a>_im...]", 17 significant digits.
std::string fields_to_csv(const Lattice& lattice, const MapField& phi, const SpinorField* psi);
void write_fields_csv(const std::string& path, const Lattice& lattice, const MapField& phi,
                      const SpinorField* psi);

struct FieldSnapshot {
  MapField phi;
  std::optional<SpinorField> psi;
};
/// Parses a CSV written by fields_to_csv; throws std::runtime_error on shape mismatch.
FieldSnapshot fields_from_csv(const std::string& text, const Lattice& lattice, int q);
FieldSnapshot read_fields_csv(const std::string& path, const Lattice& lattice, int q);

}  // namespace magdirac
