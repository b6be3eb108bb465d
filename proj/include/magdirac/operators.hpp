#pragma once

// Energy, Euler-Lagrange residuals and the Riviere connection form.
//
// The discrete energy is
//   E_D = 1/2 sum_s w_s (|D_x phi|^2 + |D_y phi|^2)
//   E_S = 1/2 sum_s w_s Re <T psi, dslash T psi>      (T = tangent projector at phi)
//   E_M = sum_s w_s B_ij(phi) (D_x phi)^i (D_y phi)^j  (only when B exists)
// and the residuals are its exact gradients (scaled by -1/w_s), so
//   map:    r = tau - R - Z,  tau = T lap phi
//   spinor: T dslash T psi.
// This holds exactly for the spectral scheme. The central scheme pairs central
// first differences with the compact 5-point Laplacian, so there the residuals
// match the energy gradient only to O(h^2).

#include <span>
#include <vector>

#include "magdirac/fields.hpp"
#include "magdirac/surface.hpp"
#include "magdirac/target.hpp"

namespace magdirac {

/// Which normal data feeds the curvature term: the discrete normal part of
/// dslash psi (exact gradient of E_S) or the pointwise II(dphi(e_a), e_a.psi).
enum class CurvatureForm { kDiscrete, kPointwise };

struct OperatorOptions {
  Scheme scheme = Scheme::kSpectral;
  SpinStructure spin;
  CurvatureForm curvature = CurvatureForm::kDiscrete;
};

/// dphi_alpha at every site, q components, affine part included.
struct MapDerivatives {
  std::vector<double> dx, dy;
  const double* d(int alpha, std::size_t s, int q) const { return &(alpha == 0 ? dx : dy)[s * q]; }
};
MapDerivatives map_derivatives(const Lattice& lattice, const MapField& phi, Scheme scheme);

struct EnergyBreakdown {
  double dirichlet = 0.0;
  double spinor = 0.0;
  double magnetic = 0.0;
  double total = 0.0;
  bool omega_mode = false;  // Omega present but no primitive: magnetic term omitted
};

/// With `u`, the Dirichlet and magnetic parts use the conformally weighted
/// integrands (weights cancel exactly) and psi is taken as already rescaled.
/// `require_primitive` makes Omega-mode an error.
EnergyBreakdown energy(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                       const MapField& phi, const SpinorField* psi, const OperatorOptions& opts = {},
                       const ConformalFactor* u = nullptr, bool require_primitive = false);

/// Per-site weighted energy density (all terms present); sums to energy().total
/// up to summation order. Omega-mode omits the magnetic term.
std::vector<double> energy_density(const Lattice& lattice, const TargetManifold& target,
                                   const MagneticData& magnetic, const MapField& phi, const SpinorField* psi,
                                   const OperatorOptions& opts = {});

/// T(phi) lap phi; zero on annulus boundary rings.
std::vector<double> tension(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                            const OperatorOptions& opts = {});

/// R(phi, psi), tangent at phi.
std::vector<double> curvature_term(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                   const SpinorField& psi, const OperatorOptions& opts = {});

/// Z(D_x phi ^ D_y phi) sitewise (not projected).
std::vector<double> magnetic_force(const Lattice& lattice, const MagneticData& magnetic, const MapField& phi,
                                   const OperatorOptions& opts = {});

/// The twisted Dirac operator T dslash T psi on the tangency-constrained space.
SpinorField twisted_dirac(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                          const SpinorField& psi, const OperatorOptions& opts = {});

/// dslash psi + II(e_a.psi, dphi(e_a)); vanishes iff the twisted Dirac equation holds.
SpinorField ambient_dirac_residual(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                   const SpinorField& psi, const OperatorOptions& opts = {});

/// sqrt(sum_s w_s |f(s)|^2) over non-boundary sites.
double field_norm(const Lattice& lattice, std::span<const double> field, int comps);
double field_norm(const Lattice& lattice, std::span<const Complex> field, int comps);

struct MapResidual {
  std::vector<double> field;
  double norm = 0.0;
};
/// r = tau - R - T Z. psi may be null (treated as 0).
MapResidual el_residual_map(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                            const MapField& phi, const SpinorField* psi, const OperatorOptions& opts = {});

/// Ambient form lap phi + II(dphi, dphi) - Z - R with pointwise R (normal part nonzero off-solution).
std::vector<double> ambient_map_residual(const Lattice& lattice, const TargetManifold& target,
                                         const MagneticData& magnetic, const MapField& phi, const SpinorField* psi,
                                         const OperatorOptions& opts = {});

struct SpinorResidual {
  SpinorField field;
  double norm = 0.0;
};
SpinorResidual el_residual_spinor(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                  const SpinorField& psi, const OperatorOptions& opts = {});

/// Sitewise q*q matrices, f[(s*q + m)*q + i], with -lap phi^m = f^m_i phi_x^i + g^m_i phi_y^i
/// on solutions.
struct RiviereForm {
  int q = 0;
  std::vector<double> f, g;
};
RiviereForm riviere_connection(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                               const MapField& phi, const SpinorField* psi, const OperatorOptions& opts = {});
/// A . grad phi at every site.
std::vector<double> riviere_apply(const RiviereForm& form, const MapDerivatives& d);
/// max |A^m_i + A^i_m| over sites and both directions.
double riviere_skewness(const RiviereForm& form);

/// E_M(b) - E_M(a) along Phi(t) = project(phi + t delta) as the integral of
/// sum_s w_s Omega_Phi(dPhi/dt, D_x Phi, D_y Phi); defined without a primitive.
double magnetic_action_difference(const Lattice& lattice, const TargetManifold& target,
                                  const MagneticData& magnetic, const MapField& phi, std::span<const double> delta,
                                  double a, double b, const OperatorOptions& opts = {});

}  // namespace magdirac
