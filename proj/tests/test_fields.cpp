#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "magdirac/fields.hpp"
#include "magdirac/operators.hpp"

using namespace magdirac;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
Lattice square(int n) { return Lattice::torus(n, n, kTwoPi, kTwoPi); }
}  // namespace

TEST(InitMap, ConstantUsesLastBasisVectorByDefault) {
  const auto lattice = square(8);
  MapInit spec;
  spec.kind = MapInitKind::kConstant;
  const auto phi = init_map(spec, lattice, TargetManifold::sphere(2));
  for (std::size_t s = 0; s < lattice.sites(); ++s) {
    EXPECT_EQ(phi.at(s)[0], 0.0);
    EXPECT_EQ(phi.at(s)[2], 1.0);
  }
  spec.base = {0.0, 2.0, 0.0};
  EXPECT_THROW(init_map(spec, lattice, TargetManifold::sphere(2)), std::invalid_argument);
  spec.base = {1.0, 0.0};
  EXPECT_THROW(init_map(spec, lattice, TargetManifold::sphere(2)), std::invalid_argument);
}

TEST(InitMap, RandomSmoothIsOnTargetAndSeedDeterministic) {
  const auto lattice = square(16);
  const auto s3 = TargetManifold::sphere(3);
  MapInit spec;
  spec.seed = 42;
  spec.amplitude = 0.7;
  const auto a = init_map(spec, lattice, s3);
  const auto b = init_map(spec, lattice, s3);
  EXPECT_EQ(a.values, b.values);
  EXPECT_LT(manifold_violation(a, s3), 1e-14);
  spec.seed = 43;
  EXPECT_NE(init_map(spec, lattice, s3).values, a.values);
}

TEST(InitMap, FlatWindingCarriesAffinePart) {
  const auto lattice = square(16);
  MapInit spec;
  spec.kind = MapInitKind::kWinding;
  spec.winding1 = 2;
  spec.winding2 = -1;
  const auto phi = init_map(spec, lattice, TargetManifold::flat(2));
  ASSERT_TRUE(phi.has_slope());
  const auto d = map_derivatives(lattice, phi, Scheme::kSpectral);
  for (std::size_t s = 0; s < lattice.sites(); ++s) {
    EXPECT_NEAR(d.dx[s * 2 + 0], 2.0, 1e-12);
    EXPECT_NEAR(d.dy[s * 2 + 1], -1.0, 1e-12);
    EXPECT_NEAR(d.dx[s * 2 + 1], 0.0, 1e-12);
  }
}

TEST(InitMap, StereographicIsConformalOntoUnitSphere) {
  const auto lattice = Lattice::annulus(32, 32, 0.2, 1.0);
  MapInit spec;
  spec.kind = MapInitKind::kStereographic;
  spec.amplitude = 0.0;
  const auto phi = init_map(spec, lattice, TargetManifold::sphere(2));
  EXPECT_LT(manifold_violation(phi, TargetManifold::sphere(2)), 1e-14);
  // Sampled at a site: phi(0.5, 0) = (1, 0, -0.75) / 1.25.
  for (std::size_t s = 0; s < lattice.sites(); ++s) {
    const double x = lattice.x(s), y = lattice.y(s), r2 = x * x + y * y;
    EXPECT_NEAR(phi.at(s)[0], 2 * x / (1 + r2), 1e-14);
    EXPECT_NEAR(phi.at(s)[2], (r2 - 1) / (1 + r2), 1e-14);
  }
  EXPECT_THROW(init_map(spec, lattice, TargetManifold::sphere(3)), std::invalid_argument);
}

TEST(SmoothNoise, HasRequestedRmsAndNoMean) {
  const auto lattice = square(32);
  const auto noise = smooth_noise(lattice, 2, 5, 0.3, 4.0);
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < lattice.sites(); ++s) {
      mean += noise[s * 2 + c];
      sq += noise[s * 2 + c] * noise[s * 2 + c];
    }
    EXPECT_NEAR(mean / lattice.sites(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt(sq / lattice.sites()), 0.3, 1e-12);
  }
  EXPECT_THROW(smooth_noise(lattice, 1, 1, 0.1, 0.5), std::invalid_argument);
  EXPECT_THROW(smooth_noise(lattice, 1, 1, -0.1, 2.0), std::invalid_argument);
}

TEST(Tangency, EnforceIsIdempotentAndTangent) {
  const auto lattice = square(16);
  const auto s2 = TargetManifold::sphere(2);
  MapInit spec;
  spec.seed = 3;
  const auto phi = init_map(spec, lattice, s2);
  SpinorField psi(lattice, 3);
  for (std::size_t k = 0; k < psi.values.size(); ++k) psi.values[k] = Complex(std::sin(1.0 + k), std::cos(2.0 * k));
  EXPECT_GT(tangency_violation(psi, phi, s2), 1e-3);
  const auto t = enforce_tangency(psi, phi, s2);
  EXPECT_LT(tangency_violation(t, phi, s2), 1e-14);
  const auto tt = enforce_tangency(t, phi, s2);
  for (std::size_t k = 0; k < t.values.size(); ++k) EXPECT_LT(std::abs(tt.values[k] - t.values[k]), 1e-15);
}

TEST(ProjectMap, NamesOffendingSite) {
  const auto lattice = square(8);
  MapField raw(lattice, 3);
  for (auto& v : raw.values) v = 1.0;
  raw.values[5 * 3 + 0] = raw.values[5 * 3 + 1] = raw.values[5 * 3 + 2] = 0.0;
  try {
    project_map(raw, TargetManifold::sphere(2));
    FAIL() << "expected domain_error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("site 5"), std::string::npos);
  }
}

TEST(EllipticPair, AnalyticDerivativesAndSphere) {
  const auto lattice = square(64);
  const auto pair = elliptic_pair(lattice, {Complex(1, 0), Complex(0, 0)});
  const auto s2 = TargetManifold::sphere(2);
  EXPECT_LT(manifold_violation(pair.phi, s2), 1e-13);
  const auto d = map_derivatives(lattice, pair.phi, Scheme::kSpectral);
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < d.dx.size(); ++k) {
    worst = std::max({worst, std::abs(d.dx[k] - pair.dphi_x[k]), std::abs(d.dy[k] - pair.dphi_y[k])});
    scale = std::max(scale, std::abs(pair.dphi_x[k]));
  }
  EXPECT_LT(worst, 1e-9 * scale);
  // Conformality: |phi_x| = |phi_y|, phi_x . phi_y = 0.
  for (std::size_t s = 0; s < lattice.sites(); ++s) {
    double xx = 0, yy = 0, xy = 0;
    for (int i = 0; i < 3; ++i) {
      xx += pair.dphi_x[s * 3 + i] * pair.dphi_x[s * 3 + i];
      yy += pair.dphi_y[s * 3 + i] * pair.dphi_y[s * 3 + i];
      xy += pair.dphi_x[s * 3 + i] * pair.dphi_y[s * 3 + i];
    }
    EXPECT_NEAR(xx, yy, 1e-10 * (1 + xx));
    EXPECT_NEAR(xy, 0.0, 1e-10 * (1 + xx));
  }
  // Degree 2: Dirichlet energy 4 pi deg.
  const auto e = energy(lattice, s2, MagneticData::none(3), pair.phi, nullptr);
  EXPECT_NEAR(e.dirichlet, 8.0 * std::numbers::pi, 1e-8);
  EXPECT_THROW(elliptic_pair(Lattice::torus(16, 16, 1.0, 1.0), {Complex(1, 0), Complex(0, 0)}), std::invalid_argument);
}

TEST(Snapshot, CsvRoundTripIsExact) {
  const auto lattice = square(8);
  const auto s2 = TargetManifold::sphere(2);
  MapInit spec;
  spec.seed = 9;
  const auto phi = init_map(spec, lattice, s2);
  const auto psi = constant_spinor(lattice, phi, s2, {Complex(0.1, 0.2), Complex(-0.3, 1.0 / 3.0)});
  const auto text = fields_to_csv(lattice, phi, &psi);
  const auto back = fields_from_csv(text, lattice, 3);
  EXPECT_EQ(back.phi.values, phi.values);
  ASSERT_TRUE(back.psi.has_value());
  EXPECT_EQ(back.psi->values, psi.values);

  const auto map_only = fields_from_csv(fields_to_csv(lattice, phi, nullptr), lattice, 3);
  EXPECT_FALSE(map_only.psi.has_value());

  const auto dir = std::filesystem::temp_directory_path() / "magdirac_test_fields";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "snap.csv").string();
  write_fields_csv(path, lattice, phi, &psi);
  EXPECT_EQ(read_fields_csv(path, lattice, 3).phi.values, phi.values);
  std::filesystem::remove_all(dir);
}

TEST(Snapshot, RejectsMalformedInput) {
  const auto lattice = square(8);
  MapInit spec;
  spec.seed = 1;
  const auto phi = init_map(spec, lattice, TargetManifold::sphere(2));
  const auto text = fields_to_csv(lattice, phi, nullptr);
  EXPECT_THROW(fields_from_csv("", lattice, 3), std::runtime_error);
  EXPECT_THROW(fields_from_csv(text, square(16), 3), std::runtime_error);
  EXPECT_THROW(fields_from_csv(text, lattice, 4), std::runtime_error);
  EXPECT_THROW(read_fields_csv("/nonexistent/dir/x.csv", lattice, 3), std::runtime_error);
}
