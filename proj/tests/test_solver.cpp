#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "magdirac/solver.hpp"

using namespace magdirac;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
Lattice square(int n) { return Lattice::torus(n, n, kTwoPi, kTwoPi); }

MapField constant_map(const Lattice& lattice, const TargetManifold& target) {
  MapInit spec;
  spec.kind = MapInitKind::kConstant;
  return init_map(spec, lattice, target);
}

MapField random_map(const Lattice& lattice, const TargetManifold& target, std::uint64_t seed, double amplitude) {
  MapInit spec;
  spec.seed = seed;
  spec.amplitude = amplitude;
  spec.cutoff = 2.0;
  return init_map(spec, lattice, target);
}

Complex inner(const SpinorField& a, const SpinorField& b) {
  Complex s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) s += std::conj(a.values[k]) * b.values[k];
  return s;
}

}  // namespace

// ---- eigen-solve ----------------------------------------------------------------

TEST(SolveSpinor, ConstantMapKernelAndFirstShell) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  const auto phi = constant_map(lattice, s2);
  const auto spec = solve_spinor(lattice, s2, phi, SpinStructure{}, 6);
  EXPECT_EQ(spec.kernel_dim, 4);
  ASSERT_EQ(spec.eigenvalues.size(), 6u);
  for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(spec.eigenvalues[i]), 1e-10);
  EXPECT_NEAR(spec.eigenvalues[4], -1.0, 1e-10);
  EXPECT_NEAR(spec.eigenvalues[5], -1.0, 1e-10);
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    EXPECT_LT(spec.residuals[i], 1e-9);
    EXPECT_LT(tangency_violation(spec.modes[i], phi, s2), 1e-12);
    for (std::size_t j = 0; j < spec.modes.size(); ++j)
      EXPECT_NEAR(std::abs(inner(spec.modes[i], spec.modes[j])), i == j ? 1.0 : 0.0, 1e-10);
  }
}

TEST(SolveSpinor, AntiperiodicConstantMapHasGap) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  const auto phi = constant_map(lattice, s2);
  const auto spec = solve_spinor(lattice, s2, phi, {BoundaryPhase::kAntiperiodic, BoundaryPhase::kAntiperiodic}, 4);
  EXPECT_EQ(spec.kernel_dim, 0);
  // Smallest |k| = |(1/2, 1/2)|.
  EXPECT_NEAR(std::abs(spec.eigenvalues[0]), std::sqrt(0.5), 1e-10);
}

TEST(SolveSpinor, SpectrumIsSymmetricAndResidualsSmall) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  const auto phi = random_map(lattice, s2, 3, 0.5);
  const SpinStructure spin{BoundaryPhase::kAntiperiodic, BoundaryPhase::kPeriodic};
  const auto spec = solve_spinor(lattice, s2, phi, spin, 4);
  OperatorOptions opts;
  opts.spin = spin;
  for (double r : spec.residuals) EXPECT_LT(r, 1e-8);
  // The chirality gamma1 gamma2 anticommutes with the operator: eigenvalues pair up as +-lambda.
  std::vector<double> v = spec.eigenvalues;
  std::sort(v.begin(), v.end());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], -v[v.size() - 1 - i], 1e-8);
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    const auto d = twisted_dirac(lattice, s2, phi, spec.modes[i], opts);
    double worst = 0.0;
    for (std::size_t k = 0; k < d.values.size(); ++k)
      worst = std::max(worst, std::abs(d.values[k] - spec.eigenvalues[i] * spec.modes[i].values[k]));
    EXPECT_LT(worst, 1e-8);
  }
}

TEST(SolveSpinor, DeterministicAndWarmStartConsistent) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  const auto phi = random_map(lattice, s2, 5, 0.4);
  const SpinStructure spin{BoundaryPhase::kPeriodic, BoundaryPhase::kAntiperiodic};
  const auto a = solve_spinor(lattice, s2, phi, spin, 4);
  const auto b = solve_spinor(lattice, s2, phi, spin, 4);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
  EXPECT_EQ(a.modes[0].values, b.modes[0].values);
  const auto warm = solve_spinor(lattice, s2, phi, spin, 4, 1e-8, &a.subspace);
  EXPECT_LE(warm.iterations, a.iterations);
  for (std::size_t i = 0; i < a.eigenvalues.size(); ++i) EXPECT_NEAR(warm.eigenvalues[i], a.eigenvalues[i], 1e-9);
}

TEST(SolveSpinor, RejectsBadInput) {
  const auto s2 = TargetManifold::sphere(2);
  const auto annulus = Lattice::annulus(16, 16, 0.2, 1.0);
  EXPECT_THROW(solve_spinor(annulus, s2, constant_map(annulus, s2), {}, 4), std::invalid_argument);
  const auto lattice = square(8);
  EXPECT_THROW(solve_spinor(lattice, s2, constant_map(lattice, s2), {}, 0), std::invalid_argument);
  EXPECT_THROW(solve_spinor(lattice, TargetManifold::sphere(3), constant_map(lattice, s2), {}, 4),
               std::invalid_argument);
}

// ---- map flow -------------------------------------------------------------------

TEST(StableStep, CentralBoundOnSquareTorus) {
  const auto lattice = square(16);
  const double h = kTwoPi / 16;
  EXPECT_DOUBLE_EQ(laplacian_spectral_radius(lattice, Scheme::kCentral), 8.0 / (h * h));
  // Spectral: Nyquist zeroed, largest |k| = 7 per axis.
  EXPECT_DOUBLE_EQ(laplacian_spectral_radius(lattice, Scheme::kSpectral), 98.0);
  EXPECT_DOUBLE_EQ(stable_dt(lattice, Scheme::kSpectral), 2.0 / 98.0);
}

TEST(FlowMap, DecreasesEnergyAndStaysOnTarget) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  const auto none = MagneticData::none(3);
  auto phi = random_map(lattice, s2, 7, 0.6);
  const double dt = 0.5 * stable_dt(lattice, Scheme::kSpectral);
  double last = energy(lattice, s2, none, phi, nullptr).total;
  for (int k = 0; k < 20; ++k) {
    const auto step = flow_map(lattice, s2, none, phi, nullptr, dt);
    EXPECT_TRUE(step.energy_checked);
    EXPECT_LE(step.energy_after, step.energy_before);
    EXPECT_LT(manifold_violation(step.phi, s2), 1e-14);
    phi = step.phi;
    EXPECT_LT(step.energy_after, last);
    last = step.energy_after;
  }
  EXPECT_THROW(flow_map(lattice, s2, none, phi, nullptr, 0.0), std::invalid_argument);
}

TEST(FlowMap, OversizedStepIsHalved) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  const auto none = MagneticData::none(3);
  const auto phi = random_map(lattice, s2, 8, 0.6);
  const auto step = flow_map(lattice, s2, none, phi, nullptr, 50.0 * stable_dt(lattice, Scheme::kSpectral));
  EXPECT_GT(step.halvings, 0);
  EXPECT_LE(step.energy_after, step.energy_before);
}

// ---- coupled solve --------------------------------------------------------------

TEST(SolveCoupled, MapOnlyRelaxesToConstant) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  SolveConfig config;
  config.mode = SolveMode::kMapOnly;
  config.max_outer = 400;
  const auto res = solve_coupled(lattice, s2, MagneticData::none(3), random_map(lattice, s2, 9, 0.3), nullptr, config);
  EXPECT_EQ(res.report.status, "converged");
  EXPECT_LE(res.report.map_residual, config.tol_map);
  const auto& e = res.report.energy_history;
  for (std::size_t k = 1; k < e.size(); ++k) EXPECT_LE(e[k], e[k - 1]);
}

TEST(SolveCoupled, EllipticPairConvergesImmediately) {
  const auto lattice = square(32);
  const auto s2 = TargetManifold::sphere(2);
  const auto pair = elliptic_pair(lattice, {Complex(1, 0), Complex(0, 0)});
  SolveConfig config;
  config.k_eigs = 6;
  config.max_outer = 5;
  const auto res = solve_coupled(lattice, s2, MagneticData::none(3), pair.phi, &pair.psi, config);
  EXPECT_EQ(res.report.status, "converged");
  EXPECT_GE(res.report.kernel_dim, 6);
  EXPECT_LE(res.report.spinor_residual, config.tol_spinor);
  EXPECT_NEAR(spinor_l4_norm(lattice, res.psi), config.spinor_norm, 1e-12);
}

TEST(SolveCoupled, GappedSpinStructureReportsNoKernel) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  SolveConfig config;
  config.ops.spin = {BoundaryPhase::kAntiperiodic, BoundaryPhase::kAntiperiodic};
  const auto res = solve_coupled(lattice, s2, MagneticData::none(3), constant_map(lattice, s2), nullptr, config);
  EXPECT_EQ(res.report.status, "no-kernel");
  EXPECT_FALSE(res.report.message.empty());
}

TEST(SolveCoupled, FlagsAndReport) {
  const auto lattice = square(8);
  const auto r3 = TargetManifold::flat(3);
  SolveConfig config;
  config.mode = SolveMode::kMapOnly;
  config.max_outer = 2;
  config.flow_dt = 10.0;
  const auto res = solve_coupled(lattice, r3, MagneticData::h_surface(r3, 0.5), random_map(lattice, r3, 1, 0.2),
                                 nullptr, config);
  const auto& flags = res.report.flags;
  EXPECT_NE(std::find(flags.begin(), flags.end(), "model-limit"), flags.end());
  EXPECT_NE(std::find(flags.begin(), flags.end(), "dt-clamped"), flags.end());
  const auto j = res.report.to_json(false);
  EXPECT_EQ(j["status"], res.report.status);
  EXPECT_FALSE(j.contains("wall_time"));
  EXPECT_TRUE(res.report.to_json(true).contains("wall_time"));

  const auto s3 = TargetManifold::sphere(3);
  config.max_outer = 1;
  const auto omega = solve_coupled(lattice, s3, MagneticData::volume_form(s3, 1.0), random_map(lattice, s3, 2, 0.2),
                                   nullptr, config);
  EXPECT_NE(std::find(omega.report.flags.begin(), omega.report.flags.end(), "omega-mode"), omega.report.flags.end());
}

TEST(SolveCoupled, SpinorModesNeedTorus) {
  const auto annulus = Lattice::annulus(16, 16, 0.2, 1.0);
  const auto s2 = TargetManifold::sphere(2);
  SolveConfig config;
  EXPECT_THROW(solve_coupled(annulus, s2, MagneticData::none(3), constant_map(annulus, s2), nullptr, config),
               std::invalid_argument);
}

TEST(SolveConfig, ValidationAndModeNames) {
  SolveConfig c;
  c.max_outer = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SolveConfig{};
  c.tol_map = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SolveConfig{};
  c.near_kernel = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  for (auto m : {SolveMode::kCoupled, SolveMode::kMapOnly, SolveMode::kSpinorOnly})
    EXPECT_EQ(solve_mode_from_string(to_string(m)), m);
  EXPECT_THROW(solve_mode_from_string("both"), std::invalid_argument);
}

TEST(SpinorNorm, L4OfConstantSpinor) {
  const auto lattice = square(8);
  const auto r2 = TargetManifold::flat(2);
  SpinorField psi(lattice, 2);
  for (auto& v : psi.values) v = Complex(0.5, 0.0);
  // |psi|^2 = 4 * 0.25 = 1 per site, area (2 pi)^2.
  EXPECT_NEAR(spinor_l4_norm(lattice, psi), std::sqrt(kTwoPi), 1e-12);
}
