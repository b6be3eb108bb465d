#include "magdirac/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "magdirac/parallel.hpp"
#include "magdirac/solver.hpp"

namespace magdirac {

namespace {

constexpr int kMaxQ = TargetManifold::kMaxAmbient;

double re_inner(const Complex* a, const Complex* b) {
  return (std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1]).real();
}

double safe_ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

Scheme scheme_for(const Lattice& lattice, Scheme scheme) {
  return lattice.is_torus() ? scheme : Scheme::kCentral;
}

void check_shapes(const Lattice& lattice, const MapField& phi, const SpinorField* psi, const char* where) {
  if (phi.values.size() != lattice.sites() * phi.q) {
    throw std::invalid_argument(std::string(where) + ": map field shape does not match lattice");
  }
  if (psi && (psi->q != phi.q || psi->values.size() != lattice.sites() * 2 * phi.q)) {
    throw std::invalid_argument(std::string(where) + ": spinor field shape does not match lattice");
  }
}

/// T(phi) d_alpha psi for both directions.
struct SpinorDerivatives {
  std::vector<Complex> dx, dy;
  const Complex* d(int alpha, std::size_t s, int q) const { return &(alpha == 0 ? dx : dy)[s * q * 2]; }
};

SpinorDerivatives spinor_derivatives(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                     const SpinorField& psi, const OperatorOptions& opts) {
  const int q = phi.q;
  const Scheme sch = scheme_for(lattice, opts.scheme);
  SpinorDerivatives d{std::vector<Complex>(psi.values.size()), std::vector<Complex>(psi.values.size())};
  partial_complex(lattice, opts.spin, psi.values, 2 * q, Direction::kX, sch, d.dx);
  partial_complex(lattice, opts.spin, psi.values, 2 * q, Direction::kY, sch, d.dy);
  for_each_index(lattice.sites(), [&](std::size_t s) {
    target.tangent_project_spinor(phi.at(s), &d.dx[s * q * 2], &d.dx[s * q * 2]);
    target.tangent_project_spinor(phi.at(s), &d.dy[s * q * 2], &d.dy[s * q * 2]);
  });
  return d;
}

/// Re <psi, gamma_a D_b psi> summed over the ambient index.
double spinor_pairing(const Complex* psi, const Complex* dpsi, int a, int q) {
  double acc = 0.0;
  for (int i = 0; i < q; ++i) {
    Complex g[2];
    apply_gamma(a, &dpsi[i * 2], g);
    acc += re_inner(&psi[i * 2], g);
  }
  return acc;
}

double dot(const double* a, const double* b, int q) {
  double acc = 0.0;
  for (int i = 0; i < q; ++i) acc += a[i] * b[i];
  return acc;
}

double weighted_l2(const Lattice& lattice, std::span<const double> f) {
  std::vector<double> site(lattice.sites());
  for_each_index(lattice.sites(), [&](std::size_t s) { site[s] = lattice.cell_area(s) * f[s] * f[s]; });
  return std::sqrt(pairwise_sum(site));
}

}  // namespace

// ---- energy-momentum tensor -------------------------------------------------------

StressTensor stress_tensor(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                           const TargetManifold& target, const OperatorOptions& opts) {
  check_shapes(lattice, phi, psi, "stress_tensor");
  const int q = phi.q;
  const auto d = map_derivatives(lattice, phi, opts.scheme);
  StressTensor T{std::vector<double>(lattice.sites() * 4)};
  for_each_index(lattice.sites(), [&](std::size_t s) {
    const double xx = dot(d.d(0, s, q), d.d(0, s, q), q);
    const double yy = dot(d.d(1, s, q), d.d(1, s, q), q);
    const double xy = dot(d.d(0, s, q), d.d(1, s, q), q);
    double* t = &T.t[s * 4];
    t[0] = xx - yy;
    t[1] = 2.0 * xy;
    t[2] = 2.0 * xy;
    t[3] = yy - xx;
  });
  if (psi) {
    const auto dpsi = spinor_derivatives(lattice, target, phi, *psi, opts);
    for_each_index(lattice.sites(), [&](std::size_t s) {
      double* t = &T.t[s * 4];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) t[2 * a + b] += spinor_pairing(psi->at(s), dpsi.d(b, s, q), a, q);
    });
  }
  return T;
}

StressNorms stress_norms(const Lattice& lattice, const StressTensor& T, const OperatorOptions& opts) {
  const std::size_t n = lattice.sites();
  if (T.t.size() != n * 4) throw std::invalid_argument("stress_norms: tensor shape does not match lattice");
  StressNorms out;
  std::vector<double> site(n);
  for_each_index(n, [&](std::size_t s) {
    double a = 0.0;
    for (int k = 0; k < 4; ++k) a += T.t[s * 4 + k] * T.t[s * 4 + k];
    site[s] = lattice.cell_area(s) * a;
  });
  out.tensor = std::sqrt(pairwise_sum(site));
  std::vector<double> f(n);
  for_each_index(n, [&](std::size_t s) { f[s] = T.at(s, 0, 0) + T.at(s, 1, 1); });
  out.trace = weighted_l2(lattice, f);
  for_each_index(n, [&](std::size_t s) { f[s] = T.at(s, 0, 1) - T.at(s, 1, 0); });
  out.skew = weighted_l2(lattice, f);
  if (lattice.is_torus()) {
    std::vector<double> col(n * 2), dx(n * 2), dy(n * 2), div(n * 2);
    for_each_index(n, [&](std::size_t s) {
      // column beta holds (T_1beta, T_2beta) as rows alpha
      for (int b = 0; b < 2; ++b) col[s * 2 + b] = T.at(s, 0, b);
    });
    partial(lattice, col, 2, Direction::kX, opts.scheme, dx);
    for_each_index(n, [&](std::size_t s) {
      for (int b = 0; b < 2; ++b) col[s * 2 + b] = T.at(s, 1, b);
    });
    partial(lattice, col, 2, Direction::kY, opts.scheme, dy);
    for (std::size_t k = 0; k < div.size(); ++k) div[k] = dx[k] + dy[k];
    out.divergence = field_norm(lattice, div, 2);
  }
  return out;
}

// ---- Hopf differential ------------------------------------------------------------

HopfDifferential hopf(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                      const TargetManifold& target, const OperatorOptions& opts) {
  if (!lattice.is_torus()) throw std::invalid_argument("hopf: needs a torus lattice");
  check_shapes(lattice, phi, psi, "hopf");
  const int q = phi.q;
  const std::size_t n = lattice.sites();
  const auto d = map_derivatives(lattice, phi, opts.scheme);
  HopfDifferential h;
  h.t.resize(n);
  for_each_index(n, [&](std::size_t s) {
    const double xx = dot(d.d(0, s, q), d.d(0, s, q), q);
    const double yy = dot(d.d(1, s, q), d.d(1, s, q), q);
    const double xy = dot(d.d(0, s, q), d.d(1, s, q), q);
    h.t[s] = Complex(xx - yy, -2.0 * xy);
  });
  if (psi) {
    const auto dpsi = spinor_derivatives(lattice, target, phi, *psi, opts);
    for_each_index(n, [&](std::size_t s) {
      h.t[s] += Complex(spinor_pairing(psi->at(s), dpsi.d(0, s, q), 0, q),
                        -spinor_pairing(psi->at(s), dpsi.d(1, s, q), 0, q));
    });
  }
  std::vector<Complex> dx(n), dy(n), dbar(n);
  const SpinStructure periodic;
  partial_complex(lattice, periodic, h.t, 1, Direction::kX, opts.scheme, dx);
  partial_complex(lattice, periodic, h.t, 1, Direction::kY, opts.scheme, dy);
  for (std::size_t s = 0; s < n; ++s) dbar[s] = 0.5 * (dx[s] + Complex(0.0, 1.0) * dy[s]);
  h.norm = field_norm(lattice, h.t, 1);
  h.dbar_norm = field_norm(lattice, dbar, 1);
  return h;
}

// ---- conformal invariance ---------------------------------------------------------

ConformalCheck conformal_invariance_check(const Lattice& lattice, const TargetManifold& target,
                                          const MagneticData& magnetic, const MapField& phi, const SpinorField* psi,
                                          const ConformalFactor& u, const OperatorOptions& opts) {
  ConformalCheck c;
  c.flat = energy(lattice, target, magnetic, phi, psi, opts);
  if (psi) {
    const auto rs = conformal_rescale(lattice, u, psi->values, psi->q);
    SpinorField scaled = *psi;
    scaled.values = rs.psi;
    c.weighted = energy(lattice, target, magnetic, phi, &scaled, opts, &u);
  } else {
    c.weighted = energy(lattice, target, magnetic, phi, nullptr, opts, &u);
  }
  c.dirichlet_identical = c.weighted.dirichlet == c.flat.dirichlet;
  c.magnetic_identical = c.weighted.magnetic == c.flat.magnetic;
  c.drift = std::abs(c.weighted.total - c.flat.total);
  return c;
}

// ---- gradient oracle ----------------------------------------------------------------

namespace {
// Five-point central difference from f(t) = E(+t) - E(-t).
template <typename Fn>
double fourth_order(Fn&& f, double eps) {
  return (8.0 * f(eps) - f(2.0 * eps)) / (12.0 * eps);
}
}  // namespace

GradientCheck gradient_oracle(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                              const MapField& phi, const SpinorField* psi, const OperatorOptions& opts,
                              const GradientOracleOptions& oracle) {
  if (oracle.eps < 1e-7 || oracle.eps > 1e-3) throw std::invalid_argument("gradient_oracle: eps must lie in [1e-7, 1e-3]");
  if (oracle.probes < 1) throw std::invalid_argument("gradient_oracle: probes must be positive");
  check_shapes(lattice, phi, psi, "gradient_oracle");
  const int q = phi.q;
  const std::size_t n = lattice.sites();
  const double eps = oracle.eps;
  const bool omega = magnetic.omega_mode();

  auto r = el_residual_map(lattice, target, magnetic, phi, psi, opts).field;
  if (oracle.corrupt_magnetic_sign && !magnetic.vanishes()) {
    const auto Z = magnetic_force(lattice, magnetic, phi, opts);
    for (std::size_t s = 0; s < n; ++s) {
      if (lattice.on_boundary(s)) continue;
      double z[kMaxQ];
      target.tangent_project(phi.at(s), &Z[s * q], z);
      for (int i = 0; i < q; ++i) r[s * q + i] += 2.0 * z[i];
    }
  }
  SpinorField rs;
  if (psi) rs = el_residual_spinor(lattice, target, phi, *psi, opts).field;

  // E(a) - E(b) summed sitewise, which keeps the cancellation out of the totals.
  auto difference = [&](const MapField& pa, const SpinorField* sa, const MapField& pb, const SpinorField* sb) {
    auto da = energy_density(lattice, target, magnetic, pa, sa, opts);
    const auto db = energy_density(lattice, target, magnetic, pb, sb, opts);
    for (std::size_t s = 0; s < da.size(); ++s) da[s] -= db[s];
    return pairwise_sum(da);
  };

  std::vector<std::size_t> interior;
  for (std::size_t s = 0; s < n; ++s)
    if (!lattice.on_boundary(s)) interior.push_back(s);
  if (interior.empty()) throw std::invalid_argument("gradient_oracle: lattice has no interior sites");

  std::mt19937_64 rng(oracle.seed);
  std::uniform_int_distribution<std::size_t> pick_site(0, interior.size() - 1);
  std::uniform_int_distribution<int> pick_comp(0, q - 1);
  std::uniform_int_distribution<int> pick_spin(0, 1);

  GradientCheck out;
  const int map_probes = psi ? (oracle.probes + 1) / 2 : oracle.probes;
  for (int k = 0; k < oracle.probes; ++k) {
    GradientProbe p;
    p.site = interior[pick_site(rng)];
    p.component = pick_comp(rng);
    const double w = lattice.cell_area(p.site);
    if (k < map_probes) {
      p.kind = "map";
      p.analytic = -w * r[p.site * q + p.component];
      std::vector<double> delta(phi.values.size(), 0.0);
      delta[p.site * q + p.component] = 1.0;
      auto central = [&](double t) {
        MapField plus = phi, minus = phi;
        plus.values[p.site * q + p.component] += t;
        minus.values[p.site * q + p.component] -= t;
        plus = project_map(plus, target);
        minus = project_map(minus, target);
        plus.slope = phi.slope;
        minus.slope = phi.slope;
        double diff = difference(plus, psi, minus, psi);
        if (omega) diff += magnetic_action_difference(lattice, target, magnetic, phi, delta, -t, t, opts);
        return diff;
      };
      p.finite_difference = fourth_order(central, eps);
    } else {
      const int a = pick_spin(rng);
      const bool imag = pick_spin(rng) == 1;
      p.kind = imag ? "spinor-im" : "spinor-re";
      p.component = p.component * 2 + a;
      const Complex res = rs.values[p.site * q * 2 + p.component];
      p.analytic = w * (imag ? res.imag() : res.real());
      const Complex step = imag ? Complex(0.0, eps) : Complex(eps, 0.0);
      auto central = [&](double t) {
        SpinorField plus = *psi, minus = *psi;
        plus.values[p.site * q * 2 + p.component] += (t / eps) * step;
        minus.values[p.site * q * 2 + p.component] -= (t / eps) * step;
        return difference(phi, &plus, phi, &minus);
      };
      p.finite_difference = fourth_order(central, eps);
    }
    out.probes.push_back(p);
  }
  double scale = 0.0;
  for (const auto& p : out.probes) scale = std::max(scale, std::abs(p.analytic));
  for (auto& p : out.probes) {
    const double den = std::max(std::abs(p.analytic), 1e-6 * scale);
    p.rel_error = den > 0.0 ? std::abs(p.finite_difference - p.analytic) / den
                            : std::abs(p.finite_difference - p.analytic);
    out.max_rel = std::max(out.max_rel, p.rel_error);
  }
  return out;
}

// ---- small energy and decay ---------------------------------------------------------

namespace {

struct PointData {
  std::vector<double> dphi2;  // |dphi|^2
  std::vector<double> psi2;   // |psi|^2
  std::vector<double> dpsi2;  // |T d psi|^2
};

PointData point_data(const Lattice& lattice, const TargetManifold* target, const MapField& phi,
                     const SpinorField* psi, const OperatorOptions& opts) {
  const int q = phi.q;
  const std::size_t n = lattice.sites();
  const auto d = map_derivatives(lattice, phi, opts.scheme);
  PointData p{std::vector<double>(n), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for_each_index(n, [&](std::size_t s) {
    p.dphi2[s] = dot(d.d(0, s, q), d.d(0, s, q), q) + dot(d.d(1, s, q), d.d(1, s, q), q);
  });
  if (psi) {
    for_each_index(n, [&](std::size_t s) {
      double a = 0.0;
      for (int c = 0; c < 2 * q; ++c) a += std::norm(psi->at(s)[c]);
      p.psi2[s] = a;
    });
    if (target) {
      const auto dpsi = spinor_derivatives(lattice, *target, phi, *psi, opts);
      for_each_index(n, [&](std::size_t s) {
        double a = 0.0;
        for (int c = 0; c < 2 * q; ++c) a += std::norm(dpsi.d(0, s, q)[c]) + std::norm(dpsi.d(1, s, q)[c]);
        p.dpsi2[s] = a;
      });
    }
  }
  return p;
}

}  // namespace

SmallEnergyDiag small_energy_diag(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                                  const OperatorOptions& opts, double epsilon, double radius) {
  check_shapes(lattice, phi, psi, "small_energy_diag");
  double cx = 0.0, cy = 0.0;
  if (lattice.is_torus()) {
    cx = 0.5 * lattice.length(0);
    cy = 0.5 * lattice.length(1);
    if (radius <= 0.0) radius = 0.25 * std::min(lattice.length(0), lattice.length(1));
  } else if (radius <= 0.0) {
    radius = lattice.r_outer();
  }
  const auto p = point_data(lattice, nullptr, phi, psi, opts);
  const std::size_t n = lattice.sites();
  std::vector<double> e_dphi(n, 0.0), e_psi(n, 0.0);
  double c0_dphi = 0.0, c0_psi = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double dist = std::hypot(lattice.x(s) - cx, lattice.y(s) - cy);
    if (dist > radius) continue;
    e_dphi[s] = lattice.cell_area(s) * p.dphi2[s];
    e_psi[s] = lattice.cell_area(s) * p.psi2[s] * p.psi2[s];
    if (dist <= 0.5 * radius) {
      c0_dphi = std::max(c0_dphi, std::sqrt(p.dphi2[s]));
      c0_psi = std::max(c0_psi, std::sqrt(p.psi2[s]));
    }
  }
  const double l2 = pairwise_sum(e_dphi), l4 = pairwise_sum(e_psi);
  SmallEnergyDiag out;
  out.energy = l2 + l4;
  out.ratio = safe_ratio(c0_dphi + c0_psi, std::sqrt(l2) + std::pow(l4, 0.25));
  out.small = out.energy <= epsilon;
  return out;
}

DecayProfile decay_profile(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                           const TargetManifold& target) {
  if (lattice.is_torus()) throw std::invalid_argument("decay_profile: needs an annulus lattice");
  check_shapes(lattice, phi, psi, "decay_profile");
  OperatorOptions opts;
  opts.scheme = Scheme::kCentral;
  const auto p = point_data(lattice, &target, phi, psi, opts);
  const std::size_t n = lattice.sites();
  DecayProfile out;
  std::vector<double> e_dphi(n), e_psi(n);
  for (int i1 = 1; i1 < lattice.n1() - 1; ++i1) {
    const double r = lattice.radius(i1);
    if (r > 0.5 * lattice.r_outer()) break;
    double max_dphi = 0.0, max_psi = 0.0, max_dpsi = 0.0;
    for (int i2 = 0; i2 < lattice.n2(); ++i2) {
      const std::size_t s = lattice.site(i1, i2);
      max_dphi = std::max(max_dphi, std::sqrt(p.dphi2[s]));
      max_psi = std::max(max_psi, std::sqrt(p.psi2[s]));
      max_dpsi = std::max(max_dpsi, std::sqrt(p.dpsi2[s]));
    }
    for (std::size_t s = 0; s < n; ++s) {
      const bool inside = lattice.radius(lattice.index1(s)) <= 2.0 * r + 1e-12;
      e_dphi[s] = inside ? lattice.cell_area(s) * p.dphi2[s] : 0.0;
      e_psi[s] = inside ? lattice.cell_area(s) * p.psi2[s] * p.psi2[s] : 0.0;
    }
    DecayRow row;
    row.r = r;
    row.ratio_phi = safe_ratio(max_dphi * r, std::sqrt(pairwise_sum(e_dphi)));
    if (psi) {
      row.ratio_psi = safe_ratio(max_psi * std::sqrt(r) + max_dpsi * std::pow(r, 1.5),
                                 std::pow(pairwise_sum(e_psi), 0.25));
    }
    out.max_ratio = std::max({out.max_ratio, row.ratio_phi, row.ratio_psi});
    out.rows.push_back(row);
  }
  return out;
}

// ---- polar energy split -------------------------------------------------------------

PolarSplit polar_energy_split(const Lattice& lattice, const MapField& phi, const SpinorField* psi,
                              const TargetManifold& target) {
  if (lattice.is_torus()) throw std::invalid_argument("polar_energy_split: needs an annulus lattice");
  check_shapes(lattice, phi, psi, "polar_energy_split");
  const int q = phi.q;
  std::vector<double> dr(phi.values.size()), dth(phi.values.size());
  partial_polar(lattice, phi.values, q, 0, dr);
  partial_polar(lattice, phi.values, q, 1, dth);
  SpinorDerivatives dpsi;
  if (psi) {
    OperatorOptions opts;
    opts.scheme = Scheme::kCentral;
    dpsi = spinor_derivatives(lattice, target, phi, *psi, opts);
  }
  const double dtheta = lattice.spacing(1);
  PolarSplit out;
  std::vector<double> rad(lattice.n2()), ang(lattice.n2()), spin(lattice.n2(), 0.0);
  for (int i1 = 1; i1 < lattice.n1() - 1; ++i1) {
    const double r = lattice.radius(i1);
    for (int i2 = 0; i2 < lattice.n2(); ++i2) {
      const std::size_t s = lattice.site(i1, i2);
      rad[i2] = dot(&dr[s * q], &dr[s * q], q) * r * dtheta;
      ang[i2] = dot(&dth[s * q], &dth[s * q], q) / (r * r) * r * dtheta;
      if (psi) {
        const double th = lattice.angle(i2), c = std::cos(th), sn = std::sin(th);
        double acc = 0.0;
        for (int i = 0; i < q; ++i) {
          Complex d_r[2], g1[2], g2[2];
          for (int a = 0; a < 2; ++a) d_r[a] = c * dpsi.d(0, s, q)[i * 2 + a] + sn * dpsi.d(1, s, q)[i * 2 + a];
          apply_gamma(0, d_r, g1);
          apply_gamma(1, d_r, g2);
          const Complex g[2] = {c * g1[0] + sn * g2[0], c * g1[1] + sn * g2[1]};
          acc += re_inner(&psi->at(s)[i * 2], g);
        }
        spin[i2] = -acc * r * dtheta;
      }
    }
    PolarSplitRow row;
    row.r = r;
    row.radial = pairwise_sum(rad);
    row.angular = pairwise_sum(ang);
    row.energy = row.radial + row.angular;
    row.spinor = pairwise_sum(spin);
    row.residual_e = row.radial - 0.5 * row.energy - 0.5 * row.spinor;
    row.residual_i = row.angular - 0.5 * row.energy + 0.5 * row.spinor;
    const double res = std::max(std::abs(row.residual_e), std::abs(row.residual_i));
    out.max_residual = std::max(out.max_residual, res);
    out.max_relative = std::max(out.max_relative, safe_ratio(res, row.energy));
    out.rows.push_back(row);
  }
  return out;
}

std::string decay_to_csv(const DecayProfile& profile) {
  std::ostringstream os;
  os << "r,ratio_phi,ratio_psi\n";
  char buf[128];
  for (const auto& row : profile.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", row.r, row.ratio_phi, row.ratio_psi);
    os << buf;
  }
  return os.str();
}

std::string polar_to_csv(const PolarSplit& split) {
  std::ostringstream os;
  os << "r,radial,angular,energy,spinor,residual_e,residual_i\n";
  char buf[256];
  for (const auto& row : split.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.r, row.radial, row.angular,
                  row.energy, row.spinor, row.residual_e, row.residual_i);
    os << buf;
  }
  return os.str();
}

// ---- constant energy density --------------------------------------------------------

DensityConstancy energy_density_constancy(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                          const SpinorField* psi, const OperatorOptions& opts) {
  check_shapes(lattice, phi, psi, "energy_density_constancy");
  DensityConstancy out;
  bool psi_zero = true;
  if (psi)
    for (const auto& c : psi->values)
      if (c != Complex(0.0, 0.0)) psi_zero = false;
  if (target.kind() == TargetKind::kSphere || !psi_zero || !lattice.is_torus()) {
    out.status = "hypothesis-unmet";
    return out;
  }
  const auto p = point_data(lattice, nullptr, phi, nullptr, opts);
  const std::size_t n = lattice.sites();
  std::vector<double> site(n), wts(n);
  for (std::size_t s = 0; s < n; ++s) {
    wts[s] = lattice.cell_area(s);
    site[s] = wts[s] * p.dphi2[s];
  }
  const double area = pairwise_sum(wts);
  const double mean = pairwise_sum(site) / area;
  for (std::size_t s = 0; s < n; ++s) site[s] = wts[s] * (p.dphi2[s] - mean) * (p.dphi2[s] - mean);
  out.variance = pairwise_sum(site) / area;
  out.status = "ok";
  return out;
}

// ---- report -------------------------------------------------------------------------

bool DiagnosticsReport::passed() const {
  return std::none_of(checks.begin(), checks.end(), [](const DiagnosticCheck& c) { return c.status == "fail"; });
}

nlohmann::json DiagnosticsReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed();
  j["values"] = nlohmann::json::object();
  for (const auto& [k, v] : values) j["values"][k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf");
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"value", std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json("inf")},
                           {"tolerance", c.tolerance},
                           {"status", c.status}});
  }
  j["warnings"] = warnings;
  return j;
}

std::string DiagnosticsReport::to_csv() const {
  std::ostringstream os;
  os << "name,value,tolerance,status\n";
  char buf[256];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%s\n", c.name.c_str(), c.value, c.tolerance, c.status.c_str());
    os << buf;
  }
  return os.str();
}

const std::vector<std::string>& diagnostic_names() {
  static const std::vector<std::string> names = {"stress", "hopf",  "conformal", "gradcheck",
                                                 "epsreg", "decay", "polar",     "density"};
  return names;
}

namespace {

void add_check(DiagnosticsReport& rep, const std::string& name, double value, double tol) {
  rep.values[name] = value;
  rep.checks.push_back({name, value, tol, value <= tol ? "pass" : "fail"});
}

void add_status(DiagnosticsReport& rep, const std::string& name, const std::string& status, double tol = 0.0) {
  rep.checks.push_back({name, 0.0, tol, status});
}

/// L2 norm of |dphi|^2. Conformal solutions have T = 0, so ratios against ||T||
/// alone would compare truncation noise with truncation noise.
double map_density_scale(const Lattice& lattice, const MapField& phi, const OperatorOptions& opts) {
  const auto p = point_data(lattice, nullptr, phi, nullptr, opts);
  std::vector<double> site(lattice.sites());
  for (std::size_t s = 0; s < site.size(); ++s) site[s] = lattice.cell_area(s) * p.dphi2[s] * p.dphi2[s];
  return std::sqrt(pairwise_sum(site));
}

}  // namespace

DiagnosticsReport run_diagnostics(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                                  const MapField& phi, const SpinorField* psi, const OperatorOptions& opts,
                                  const DiagnosticsConfig& config) {
  if (config.enabled) {
    for (const auto& name : *config.enabled) {
      const auto& all = diagnostic_names();
      if (std::find(all.begin(), all.end(), name) == all.end()) {
        throw std::invalid_argument("run_diagnostics: unknown check '" + name + "'");
      }
    }
  }
  auto wanted = [&](const std::string& name) {
    return !config.enabled || std::find(config.enabled->begin(), config.enabled->end(), name) != config.enabled->end();
  };
  const auto& tol = config.tol;
  const bool torus = lattice.is_torus();
  const double scale = wanted("stress") || wanted("hopf") ? map_density_scale(lattice, phi, opts) : 0.0;
  DiagnosticsReport rep;
  if (config.enabled && config.enabled->empty()) rep.warnings.push_back("no diagnostics enabled");

  if (wanted("stress")) {
    const auto T = stress_tensor(lattice, phi, psi, target, opts);
    const auto sn = stress_norms(lattice, T, opts);
    const double den = std::max(sn.tensor, scale);
    rep.values["stress_norm"] = sn.tensor;
    add_check(rep, "trace_norm", safe_ratio(sn.trace, den), tol.trace_rel);
    add_check(rep, "skew_norm", safe_ratio(sn.skew, den), tol.skew_rel);
    if (torus) {
      add_check(rep, "divergence_norm", safe_ratio(sn.divergence, den), tol.divergence_rel);
    } else {
      add_status(rep, "divergence_norm", "skipped", tol.divergence_rel);
    }
  }
  if (wanted("hopf")) {
    if (torus) {
      const auto h = hopf(lattice, phi, psi, target, opts);
      rep.values["hopf_norm"] = h.norm;
      add_check(rep, "dbar_norm", safe_ratio(h.dbar_norm, std::max(h.norm, scale)), tol.dbar_rel);
    } else {
      add_status(rep, "dbar_norm", "skipped", tol.dbar_rel);
    }
  }
  if (wanted("conformal")) {
    if (torus) {
      ConformalFactor u{std::vector<double>(lattice.sites())};
      for (std::size_t s = 0; s < lattice.sites(); ++s) {
        u.u[s] = 0.3 * std::sin(2.0 * std::numbers::pi * lattice.x(s) / lattice.length(0)) *
                 std::sin(2.0 * std::numbers::pi * lattice.y(s) / lattice.length(1));
      }
      const auto c = conformal_invariance_check(lattice, target, magnetic, phi, psi, u, opts);
      add_check(rep, "conformal_drift", c.drift, tol.conformal_drift);
      if (!c.dirichlet_identical || !c.magnetic_identical) {
        rep.checks.back().status = "fail";
        rep.warnings.push_back("conformal: map or magnetic energy changed under the conformal factor");
      }
    } else {
      add_status(rep, "conformal_drift", "skipped", tol.conformal_drift);
    }
  }
  if (wanted("gradcheck")) {
    const auto g = gradient_oracle(lattice, target, magnetic, phi, psi, opts, config.oracle);
    add_check(rep, "gradcheck_maxrel", g.max_rel, tol.gradcheck_maxrel);
  }
  if (wanted("epsreg")) {
    const auto e = small_energy_diag(lattice, phi, psi, opts, tol.small_energy);
    rep.values["small_energy"] = e.energy;
    if (e.small) {
      add_check(rep, "epsreg_ratio", e.ratio, tol.epsreg_ratio);
    } else {
      rep.values["epsreg_ratio"] = e.ratio;
      rep.checks.push_back({"epsreg_ratio", e.ratio, tol.epsreg_ratio, "hypothesis-unmet"});
    }
  }
  if (wanted("decay")) {
    if (!torus) {
      rep.decay = decay_profile(lattice, phi, psi, target);
      add_check(rep, "decay_ratios", rep.decay.max_ratio, tol.decay_ratio);
    } else {
      add_status(rep, "decay_ratios", "skipped", tol.decay_ratio);
    }
  }
  if (wanted("polar")) {
    if (!torus) {
      rep.polar = polar_energy_split(lattice, phi, psi, target);
      rep.values["polar_residual"] = rep.polar.max_residual;
      add_check(rep, "polar_relative", rep.polar.max_relative, tol.polar_rel);
    } else {
      add_status(rep, "polar_relative", "skipped", tol.polar_rel);
    }
  }
  if (wanted("density")) {
    const auto d = energy_density_constancy(lattice, target, phi, psi, opts);
    if (d.status == "ok") {
      add_check(rep, "density_variance", d.variance, tol.density_variance);
    } else {
      add_status(rep, "density_variance", d.status, tol.density_variance);
    }
  }
  return rep;
}

}  // namespace magdirac
