#pragma once

// Spinor kernel solve, projected map flow and the alternating coupled scheme.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "magdirac/fields.hpp"
#include "magdirac/operators.hpp"

namespace magdirac {

enum class SolveMode { kCoupled, kMapOnly, kSpinorOnly };

std::string to_string(SolveMode mode);
SolveMode solve_mode_from_string(const std::string& name);

struct SolveConfig {
  SolveMode mode = SolveMode::kCoupled;
  int max_outer = 200;
  double flow_dt = 0.0;  // 0 selects half the stability bound
  double tol_map = 1e-6;
  double tol_spinor = 1e-8;
  int k_eigs = 4;
  double spinor_norm = 1.0;
  int refresh_interval = 25;
  /// Modes with |lambda| <= near_kernel * k_min are used as the coupled spinor
  /// space; larger smallest |lambda| ends a coupled run with "no-kernel".
  double near_kernel = 0.25;
  OperatorOptions ops;

  void validate() const;
};

// ---- spinor eigen-solve -------------------------------------------------------

struct SpinorSpectrum {
  std::vector<double> eigenvalues;  // sorted by |lambda|
  std::vector<SpinorField> modes;   // unit L2 (plain sum), tangent
  std::vector<double> residuals;    // ||D psi - lambda psi|| / ||psi||
  int kernel_dim = 0;               // |lambda| <= tol_spinor * k_min
  int iterations = 0;
  Eigen::MatrixXcd subspace;        // warm start for the next solve
};

/// k smallest-|lambda| eigenpairs of T dslash T on the tangency subspace.
/// Subspace iteration on (A^2 + sigma)^{-1} with preconditioned CG inner
/// solves and Rayleigh-Ritz with A. Throws std::runtime_error on
/// non-convergence.
SpinorSpectrum solve_spinor(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                            const SpinStructure& spin, int k_eigs, double tol_spinor = 1e-8,
                            const Eigen::MatrixXcd* warm_start = nullptr, Scheme scheme = Scheme::kSpectral);

// ---- map flow -----------------------------------------------------------------

/// Largest eigenvalue of -lap for the lattice and scheme; explicit Euler is
/// stable for dt <= 2 / lambda_max.
double laplacian_spectral_radius(const Lattice& lattice, Scheme scheme);
double stable_dt(const Lattice& lattice, Scheme scheme);

struct FlowResult {
  MapField phi;
  SpinorField psi;     // T(phi') psi
  double dt = 0.0;     // step actually taken
  int halvings = 0;
  double energy_before = 0.0, energy_after = 0.0;
  bool energy_checked = false;
};

/// One projected explicit-Euler step phi' = project(phi + dt r). When the
/// energy is exact (psi = 0 and no Omega-mode) an energy increase halves dt
/// and retries; throws std::runtime_error on dt underflow.
FlowResult flow_map(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                    const MapField& phi, const SpinorField* psi, double dt, const OperatorOptions& opts = {});

// ---- coupled solve --------------------------------------------------------------

struct SolveReport {
  std::string status;  // converged | max_outer | no-kernel | failed
  SolveMode mode = SolveMode::kCoupled;
  int iterations = 0;
  int flow_steps = 0;
  double dt = 0.0;
  EnergyBreakdown energy;
  double map_residual = 0.0;
  double spinor_residual = 0.0;
  std::vector<double> map_residual_history;
  std::vector<double> spinor_residual_history;
  std::vector<double> energy_history;
  std::vector<std::vector<double>> eigenvalue_history;
  int kernel_dim = 0;
  std::vector<std::string> flags;  // model-limit, omega-mode
  std::string message;
  double wall_time = 0.0;

  nlohmann::json to_json(bool include_wall_time = true) const;
};

struct SolveResult {
  MapField phi;
  SpinorField psi;
  SolveReport report;
};

/// L4 norm (sum_s w_s |psi|^4)^{1/4}.
double spinor_l4_norm(const Lattice& lattice, const SpinorField& psi);

SolveResult solve_coupled(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                          const MapField& phi0, const SpinorField* psi0, const SolveConfig& config,
                          bool progress = false);

}  // namespace magdirac
