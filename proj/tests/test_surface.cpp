#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "magdirac/surface.hpp"

using namespace magdirac;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sample(const Lattice& lattice, double (*f)(double, double)) {
  std::vector<double> out(lattice.sites());
  for (std::size_t s = 0; s < lattice.sites(); ++s) out[s] = f(lattice.x(s), lattice.y(s));
  return out;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

std::vector<Complex> random_complex(std::size_t count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Complex> out(count);
  for (auto& v : out) v = Complex(normal(rng), normal(rng));
  return out;
}

}  // namespace

// ---- oracles --------------------------------------------------------------------

TEST(SpectralDerivative, ExactOnTrigonometricPolynomial) {
  const auto lattice = Lattice::torus(16, 24, 2 * kPi, 4 * kPi);
  const auto f = sample(lattice, [](double x, double y) { return std::sin(3 * x) * std::cos(0.5 * y); });
  const auto fx = sample(lattice, [](double x, double y) { return 3 * std::cos(3 * x) * std::cos(0.5 * y); });
  const auto fy = sample(lattice, [](double x, double y) { return -0.5 * std::sin(3 * x) * std::sin(0.5 * y); });
  std::vector<double> dx(f.size()), dy(f.size());
  partial(lattice, f, 1, Direction::kX, Scheme::kSpectral, dx);
  partial(lattice, f, 1, Direction::kY, Scheme::kSpectral, dy);
  EXPECT_LT(max_diff(dx, fx), 1e-12);
  EXPECT_LT(max_diff(dy, fy), 1e-12);
}

TEST(SpectralLaplacian, EigenfunctionOfTorus) {
  const auto lattice = Lattice::torus(16, 16, 2 * kPi, 2 * kPi);
  const auto f = sample(lattice, [](double x, double y) { return std::cos(x) * std::cos(2 * y); });
  std::vector<double> lap(f.size());
  laplacian(lattice, f, 1, Scheme::kSpectral, lap);
  for (std::size_t s = 0; s < f.size(); ++s) EXPECT_NEAR(lap[s], -5.0 * f[s], 1e-12);
}

TEST(CentralDerivative, SecondOrderOnTorus) {
  std::vector<double> errors;
  for (int n : {16, 32, 64}) {
    const auto lattice = Lattice::torus(n, n, 2 * kPi, 2 * kPi);
    const auto f = sample(lattice, [](double x, double y) { return std::sin(x + 2 * y); });
    const auto fx = sample(lattice, [](double x, double y) { return std::cos(x + 2 * y); });
    std::vector<double> dx(f.size());
    partial(lattice, f, 1, Direction::kX, Scheme::kCentral, dx);
    errors.push_back(max_diff(dx, fx));
  }
  EXPECT_NEAR(std::log2(errors[0] / errors[1]), 2.0, 0.1);
  EXPECT_NEAR(std::log2(errors[1] / errors[2]), 2.0, 0.1);
}

TEST(AnnulusDerivative, CartesianAndPolarSecondOrder) {
  std::vector<double> errors, polar_errors;
  for (int n : {16, 32, 64}) {
    const auto lattice = Lattice::annulus(n, n, 0.3, 1.0);
    const auto f = sample(lattice, [](double x, double y) { return x * x * y + std::sin(y); });
    const auto fx = sample(lattice, [](double x, double y) { return 2 * x * y; });
    std::vector<double> dx(f.size()), dr(f.size());
    partial(lattice, f, 1, Direction::kX, Scheme::kCentral, dx);
    errors.push_back(max_diff(dx, fx));
    // d/dr (r^3) = 3 r^2
    std::vector<double> g(lattice.sites()), gr(lattice.sites());
    for (std::size_t s = 0; s < g.size(); ++s) {
      const double r = lattice.radius(lattice.index1(s));
      g[s] = r * r * r;
      gr[s] = 3 * r * r;
    }
    partial_polar(lattice, g, 1, 0, dr);
    polar_errors.push_back(max_diff(dr, gr));
  }
  EXPECT_GT(std::log2(errors[1] / errors[2]), 1.8);
  EXPECT_GT(std::log2(polar_errors[1] / polar_errors[2]), 1.8);
}

TEST(AnnulusLattice, QuadratureAreaAndBoundaryRings) {
  const auto lattice = Lattice::annulus(40, 64, 0.25, 1.0);
  double area = 0.0;
  int boundary = 0;
  for (std::size_t s = 0; s < lattice.sites(); ++s) {
    area += lattice.cell_area(s);
    boundary += lattice.on_boundary(s) ? 1 : 0;
  }
  EXPECT_NEAR(area, kPi * (1.0 - 0.0625), 1e-12);
  EXPECT_EQ(boundary, 2 * 64);
  EXPECT_DOUBLE_EQ(lattice.radius(0), 0.25);
  EXPECT_DOUBLE_EQ(lattice.radius(39), 1.0);
}

TEST(SpinStructure, AntiperiodicPlaneWaveDerivative) {
  const auto lattice = Lattice::torus(16, 16, 2 * kPi, 2 * kPi);
  SpinStructure spin{BoundaryPhase::kAntiperiodic, BoundaryPhase::kAntiperiodic};
  std::vector<Complex> f(lattice.sites()), d(lattice.sites());
  for (std::size_t s = 0; s < f.size(); ++s) f[s] = std::polar(1.0, 1.5 * lattice.x(s) - 0.5 * lattice.y(s));
  partial_complex(lattice, spin, f, 1, Direction::kX, Scheme::kSpectral, d);
  for (std::size_t s = 0; s < f.size(); ++s) EXPECT_LT(std::abs(d[s] - Complex(0, 1.5) * f[s]), 1e-12);
  partial_complex(lattice, spin, f, 1, Direction::kY, Scheme::kSpectral, d);
  for (std::size_t s = 0; s < f.size(); ++s) EXPECT_LT(std::abs(d[s] - Complex(0, -0.5) * f[s]), 1e-12);
}

TEST(Clifford, StandardRepresentationRelations) {
  const auto& c = CliffordRep::standard();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Eigen::Matrix2cd m = c.gamma(a) * c.gamma(b) + c.gamma(b) * c.gamma(a);
      if (a == b) m += 2.0 * Eigen::Matrix2cd::Identity();
      EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
      EXPECT_EQ((c.gamma(a).adjoint() + c.gamma(a)).cwiseAbs().maxCoeff(), 0.0);
    }
  const Complex in[2] = {Complex(0.3, -1.0), Complex(2.0, 0.5)};
  for (int a = 0; a < 2; ++a) {
    Complex out[2];
    apply_gamma(a, in, out);
    const Eigen::Vector2cd v = c.gamma(a) * Eigen::Vector2cd(in[0], in[1]);
    EXPECT_EQ(out[0], v[0]);
    EXPECT_EQ(out[1], v[1]);
  }
}

// ---- properties -----------------------------------------------------------------

class DiracSquare : public ::testing::TestWithParam<int> {};

TEST_P(DiracSquare, EqualsMinusLaplacian) {
  const auto lattice = Lattice::torus(16, 12, 2 * kPi, 3.0);
  SpinStructure spin;
  spin.phase1 = (GetParam() & 1) ? BoundaryPhase::kAntiperiodic : BoundaryPhase::kPeriodic;
  spin.phase2 = (GetParam() & 2) ? BoundaryPhase::kAntiperiodic : BoundaryPhase::kPeriodic;
  const int q = 2;
  const auto psi = random_complex(lattice.sites() * 2 * q, 5 + GetParam());
  std::vector<Complex> d1(psi.size()), d2(psi.size()), lap(psi.size());
  dirac_untwisted(lattice, spin, psi, q, d1);
  dirac_untwisted(lattice, spin, d1, q, d2);
  laplacian_complex(lattice, spin, psi, 2 * q, lap);
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    worst = std::max(worst, std::abs(d2[k] + lap[k]));
    scale = std::max(scale, std::abs(lap[k]));
  }
  EXPECT_LT(worst, 1e-11 * scale);
}

TEST_P(DiracSquare, FusedSpectralMatchesComponentDerivatives) {
  const auto lattice = Lattice::torus(16, 16, 2 * kPi, 2 * kPi);
  SpinStructure spin;
  spin.phase1 = (GetParam() & 1) ? BoundaryPhase::kAntiperiodic : BoundaryPhase::kPeriodic;
  spin.phase2 = (GetParam() & 2) ? BoundaryPhase::kAntiperiodic : BoundaryPhase::kPeriodic;
  const int q = 3;
  const auto psi = random_complex(lattice.sites() * 2 * q, 17 + GetParam());
  std::vector<Complex> fused(psi.size()), dx(psi.size()), dy(psi.size());
  dirac_untwisted(lattice, spin, psi, q, fused);
  partial_complex(lattice, spin, psi, 2 * q, Direction::kX, Scheme::kSpectral, dx);
  partial_complex(lattice, spin, psi, 2 * q, Direction::kY, Scheme::kSpectral, dy);
  for (std::size_t b = 0; b < lattice.sites() * q; ++b) {
    Complex gx[2], gy[2];
    apply_gamma(0, &dx[2 * b], gx);
    apply_gamma(1, &dy[2 * b], gy);
    for (int a = 0; a < 2; ++a) EXPECT_LT(std::abs(fused[2 * b + a] - gx[a] - gy[a]), 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(SpinStructures, DiracSquare, ::testing::Range(0, 4));

TEST(SpectralDerivative, AntisymmetricUnderDotProduct) {
  const auto lattice = Lattice::torus(16, 16, 2 * kPi, 2 * kPi);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> f(lattice.sites()), g(lattice.sites()), df(f.size()), dg(f.size());
  for (auto& v : f) v = normal(rng);
  for (auto& v : g) v = normal(rng);
  partial(lattice, f, 1, Direction::kX, Scheme::kSpectral, df);
  partial(lattice, g, 1, Direction::kX, Scheme::kSpectral, dg);
  double a = 0.0, b = 0.0;
  for (std::size_t s = 0; s < f.size(); ++s) {
    a += g[s] * df[s];
    b += f[s] * dg[s];
  }
  EXPECT_NEAR(a, -b, 1e-10);
}

TEST(ShiftedInverseLaplacian, InvertsSigmaMinusLaplacian) {
  const auto lattice = Lattice::torus(16, 16, 2 * kPi, 2 * kPi);
  SpinStructure spin{BoundaryPhase::kAntiperiodic, BoundaryPhase::kPeriodic};
  const auto f = random_complex(lattice.sites() * 2, 9);
  std::vector<Complex> g(f.size()), lap(f.size());
  shifted_inverse_laplacian_complex(lattice, spin, f, 2, 0.3, g);
  laplacian_complex(lattice, spin, g, 2, lap);
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_LT(std::abs(0.3 * g[k] - lap[k] - f[k]), 1e-11);
}

TEST(ConformalRescale, WeightsAndSpinorScale) {
  const auto lattice = Lattice::torus(8, 8, 1.0, 1.0);
  ConformalFactor u{std::vector<double>(lattice.sites(), 0.4)};
  const auto psi = random_complex(lattice.sites() * 4, 1);
  const auto r = conformal_rescale(lattice, u, psi, 2);
  EXPECT_DOUBLE_EQ(r.volume_weight[5], std::exp(0.8));
  EXPECT_LT(std::abs(r.psi[7] - std::exp(-0.2) * psi[7]), 1e-15);
  u.u[3] = std::nan("");
  EXPECT_THROW(conformal_rescale(lattice, u, psi, 2), std::invalid_argument);
}

// ---- errors ---------------------------------------------------------------------

TEST(LatticeErrors, RejectsDegenerateGrids) {
  EXPECT_THROW(Lattice::torus(4, 16, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(Lattice::torus(16, 16, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(Lattice::annulus(16, 16, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(Lattice::annulus(16, 16, 1.0, 0.5), std::invalid_argument);
}

TEST(LatticeErrors, SpectralNeedsTorus) {
  const auto lattice = Lattice::annulus(16, 16, 0.2, 1.0);
  std::vector<double> f(lattice.sites()), d(lattice.sites());
  EXPECT_THROW(partial(lattice, f, 1, Direction::kX, Scheme::kSpectral, d), std::invalid_argument);
  EXPECT_THROW(laplacian(lattice, f, 1, Scheme::kSpectral, d), std::invalid_argument);
  std::vector<double> wrong(3);
  const auto torus = Lattice::torus(8, 8, 1.0, 1.0);
  EXPECT_THROW(partial(torus, wrong, 1, Direction::kX, Scheme::kSpectral, d), std::invalid_argument);
}
