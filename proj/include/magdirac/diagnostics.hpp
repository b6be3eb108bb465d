#pragma once

// Structural checks on field pairs: energy-momentum tensor, Hopf differential,
// conformal invariance, the finite-difference gradient oracle, small-energy and
// decay diagnostics on annuli.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "magdirac/operators.hpp"

namespace magdirac {

/// Sitewise 2x2 tensor, t[s*4 + 2*alpha + beta] = T_{alpha beta}.
struct StressTensor {
  std::vector<double> t;
  double at(std::size_t s, int a, int b) const { return t[s * 4 + 2 * a + b]; }
};

/// T_ab = 2<dphi_a, dphi_b> - delta_ab |dphi|^2 + Re<psi, gamma_a T d_b psi>.
/// The magnetic data never enters.
StressTensor stress_tensor(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                           const TargetManifold& target, const OperatorOptions& opts = {});

struct StressNorms {
  double tensor = 0.0;      // ||T||
  double trace = 0.0;       // ||T11 + T22||
  double skew = 0.0;        // ||T12 - T21||
  double divergence = 0.0;  // sqrt(||(div T)_1||^2 + ||(div T)_2||^2)
};
/// L2 norms; the divergence sum_a D_a T_ab needs a torus.
StressNorms stress_norms(const Lattice& lattice, const StressTensor& T, const OperatorOptions& opts = {});

/// T(z) = |phi_x|^2 - |phi_y|^2 - 2i<phi_x, phi_y> + Re<psi, gamma_1 T d_x psi> - i Re<psi, gamma_1 T d_y psi>.
struct HopfDifferential {
  std::vector<Complex> t;
  double norm = 0.0;       // ||T||
  double dbar_norm = 0.0;  // ||1/2 (d_x + i d_y) T||
};
HopfDifferential hopf(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                      const TargetManifold& target, const OperatorOptions& opts = {});

struct ConformalCheck {
  EnergyBreakdown flat, weighted;
  bool dirichlet_identical = false;
  bool magnetic_identical = false;
  double drift = 0.0;  // |weighted.total - flat.total|
};
/// Energy under h = e^{2u} delta with psi rescaled by e^{-u/2}, against the flat energy.
ConformalCheck conformal_invariance_check(const Lattice& lattice, const TargetManifold& target,
                                          const MagneticData& magnetic, const MapField& phi, const SpinorField* psi,
                                          const ConformalFactor& u, const OperatorOptions& opts = {});

struct GradientOracleOptions {
  int probes = 200;
  double eps = 1e-3;  // base step of the five-point stencil
  std::uint64_t seed = 1;
  bool corrupt_magnetic_sign = false;  // injected defect for discrimination tests
};
struct GradientProbe {
  std::string kind;  // map | spinor-re | spinor-im
  std::size_t site = 0;
  int component = 0;
  double analytic = 0.0, finite_difference = 0.0, rel_error = 0.0;
};
struct GradientCheck {
  double max_rel = 0.0;
  std::vector<GradientProbe> probes;
};
/// Central differences of the discrete energy at project(phi +- eps delta) (and
/// psi +- eps eta) against the analytic residual fields times the cell weights.
/// Relative error denominator: max(|analytic|, 1e-6 times the largest probe |analytic|).
GradientCheck gradient_oracle(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                              const MapField& phi, const SpinorField* psi, const OperatorOptions& opts = {},
                              const GradientOracleOptions& oracle = {});

struct SmallEnergyDiag {
  double energy = 0.0;  // int_D |dphi|^2 + |psi|^4
  double ratio = 0.0;   // (C0(D/2) of |dphi| + |psi|) / (L2(D) of dphi + L4(D) of psi); 0/0 -> 0
  bool small = false;   // energy <= epsilon
};
/// Disc D of `radius` about (cx, cy) intersected with the lattice; radius <= 0 picks
/// a quarter of the shorter torus side (centered) or the outer radius on an annulus.
SmallEnergyDiag small_energy_diag(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                                  const OperatorOptions& opts = {}, double epsilon = 0.1, double radius = 0.0);

struct DecayRow {
  double r = 0.0;
  double ratio_phi = 0.0;  // max_theta |dphi| r / ||dphi||_{L2(r_in < |x| < 2r)}
  double ratio_psi = 0.0;  // (|psi| r^1/2 + |grad psi| r^3/2) / ||psi||_{L4}
};
struct DecayProfile {
  std::vector<DecayRow> rows;
  double max_ratio = 0.0;
};
/// Annulus only; radii up to half the outer radius.
DecayProfile decay_profile(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                           const TargetManifold& target);

struct PolarSplitRow {
  double r = 0.0;
  double radial = 0.0;    // int |phi_r|^2 ds
  double angular = 0.0;   // int |phi_theta|^2 / r^2 ds
  double energy = 0.0;    // E_r
  double spinor = 0.0;    // I_r
  double residual_e = 0.0, residual_i = 0.0;
};
struct PolarSplit {
  std::vector<PolarSplitRow> rows;
  double max_residual = 0.0;
  double max_relative = 0.0;  // residual / E_r
};
/// Ring integrals with ds = r dtheta on interior rings of an annulus.
PolarSplit polar_energy_split(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                              const TargetManifold& target);

struct DensityConstancy {
  std::string status;  // ok | hypothesis-unmet
  double variance = 0.0;
};
/// Per-radius tables with a header row.
std::string decay_to_csv(const DecayProfile& profile);
std::string polar_to_csv(const PolarSplit& split);

DensityConstancy energy_density_constancy(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                          const SpinorField* psi, const OperatorOptions& opts = {});

// ---- report ---------------------------------------------------------------------

/// Stress and Hopf residuals are reported relative to max(||T||, || |dphi|^2 ||),
/// which stays meaningful on conformal solutions where T itself vanishes.
struct DiagnosticsTolerances {
  double trace_rel = 1e-2;
  double skew_rel = 1e-2;
  double divergence_rel = 1e-2;
  double dbar_rel = 1e-2;
  double conformal_drift = 1e-8;
  double gradcheck_maxrel = 1e-6;
  double decay_ratio = 10.0;
  double epsreg_ratio = 10.0;
  double density_variance = 1e-8;
  double polar_rel = 1e-2;
  double small_energy = 0.1;
};

struct DiagnosticsConfig {
  /// Unset: every check; an empty list runs nothing and warns.
  std::optional<std::vector<std::string>> enabled;
  DiagnosticsTolerances tol;
  GradientOracleOptions oracle;
};

struct DiagnosticCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string status;  // pass | fail | skipped | hypothesis-unmet
};

struct DiagnosticsReport {
  std::vector<DiagnosticCheck> checks;
  DecayProfile decay;
  PolarSplit polar;
  std::map<std::string, double> values;
  std::vector<std::string> warnings;
  bool passed() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Known check names: stress, hopf, conformal, gradcheck, epsreg, decay, polar, density.
const std::vector<std::string>& diagnostic_names();

DiagnosticsReport run_diagnostics(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                                  const MapField& phi, const SpinorField* psi, const OperatorOptions& opts,
                                  const DiagnosticsConfig& config);

}  // namespace magdirac
