#include "magdirac/operators.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "magdirac/parallel.hpp"

namespace magdirac {

namespace {

constexpr int kMaxQ = TargetManifold::kMaxAmbient;

Scheme effective_scheme(const Lattice& lattice, Scheme scheme) {
  return lattice.is_torus() ? scheme : Scheme::kCentral;
}

void check_map(const Lattice& lattice, const TargetManifold& target, const MapField& phi, const char* where) {
  if (phi.q != target.q() || phi.values.size() != lattice.sites() * phi.q) {
    throw std::invalid_argument(std::string(where) + ": map field shape does not match lattice/target");
  }
}

void check_spinor(const Lattice& lattice, const MapField& phi, const SpinorField& psi, const char* where) {
  if (psi.q != phi.q || psi.values.size() != lattice.sites() * 2 * psi.q) {
    throw std::invalid_argument(std::string(where) + ": spinor field shape does not match lattice/target");
  }
  if (!lattice.is_torus()) throw std::invalid_argument(std::string(where) + ": spinors require a torus lattice");
}

/// phi - A.x, periodic on the torus when the map carries an affine part.
std::vector<double> periodic_part(const Lattice& lattice, const MapField& phi) {
  std::vector<double> p = phi.values;
  if (!phi.has_slope()) return p;
  const int q = phi.q;
  for (std::size_t s = 0; s < lattice.sites(); ++s) {
    const double x = lattice.x(s), y = lattice.y(s);
    for (int i = 0; i < q; ++i) p[s * q + i] -= phi.slope[i] * x + phi.slope[q + i] * y;
  }
  return p;
}

/// chi = T psi sitewise.
std::vector<Complex> tangent_spinor(const TargetManifold& target, const MapField& phi, const SpinorField& psi) {
  std::vector<Complex> chi(psi.values.size());
  for_each_index(phi.sites(), [&](std::size_t s) {
    target.tangent_project_spinor(phi.at(s), psi.at(s), &chi[s * 2 * psi.q]);
  });
  return chi;
}

double re_inner(const Complex* a, const Complex* b) {
  return (std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1]).real();
}

double interior_weight(const Lattice& lattice, std::size_t s) {
  return lattice.on_boundary(s) ? 0.0 : lattice.cell_area(s);
}

/// G_k = sum_l Re[ sum_j J_l[j][k] <psi^j, n_l> + sum_i J_l[i][k] <nu_l.psi, w^i> ],
/// where n_l is the normal spinor; the curvature term is R = -T G.
void curvature_site(const TargetManifold& target, const double* y, const Complex* psi, const Complex* w,
                    const Complex* normal_spinors, double* out) {
  const int q = target.q();
  double G[kMaxQ] = {};
  double nu[kMaxQ], J[kMaxQ * kMaxQ];
  for (int l = 0; l < target.codim(); ++l) {
    target.normal(y, l, nu);
    target.normal_derivative(y, l, J);
    const Complex* n = &normal_spinors[2 * l];
    Complex c[2] = {0.0, 0.0};
    for (int j = 0; j < q; ++j) {
      c[0] += nu[j] * psi[2 * j];
      c[1] += nu[j] * psi[2 * j + 1];
    }
    for (int j = 0; j < q; ++j) {
      const double a = re_inner(&psi[2 * j], n);
      const double b = w ? re_inner(c, &w[2 * j]) : 0.0;
      for (int k = 0; k < q; ++k) G[k] += J[j * q + k] * (a + b);
    }
  }
  target.tangent_project(y, G, G);
  for (int k = 0; k < q; ++k) out[k] = -G[k];
}

/// Pointwise normal spinors n_l = -sum_a gamma_a sum_i chi^i (J_l dphi_a)^i.
void pointwise_normal_spinors(const TargetManifold& target, const double* y, const Complex* chi,
                              const double* dx, const double* dy, Complex* n_out) {
  const int q = target.q();
  double J[kMaxQ * kMaxQ];
  for (int l = 0; l < target.codim(); ++l) {
    target.normal_derivative(y, l, J);
    Complex total[2] = {0.0, 0.0};
    for (int a = 0; a < 2; ++a) {
      const double* d = a == 0 ? dx : dy;
      Complex acc[2] = {0.0, 0.0};
      for (int i = 0; i < q; ++i) {
        double Jd = 0.0;
        for (int j = 0; j < q; ++j) Jd += J[i * q + j] * d[j];
        acc[0] += chi[2 * i] * Jd;
        acc[1] += chi[2 * i + 1] * Jd;
      }
      Complex g[2];
      apply_gamma(a, acc, g);
      total[0] -= g[0];
      total[1] -= g[1];
    }
    n_out[2 * l] = total[0];
    n_out[2 * l + 1] = total[1];
  }
}

}  // namespace

MapDerivatives map_derivatives(const Lattice& lattice, const MapField& phi, Scheme scheme) {
  const int q = phi.q;
  if (phi.has_slope() && !lattice.is_torus()) throw std::invalid_argument("map_derivatives: affine maps need a torus");
  const auto p = periodic_part(lattice, phi);
  MapDerivatives d{std::vector<double>(p.size()), std::vector<double>(p.size())};
  const Scheme sch = effective_scheme(lattice, scheme);
  partial(lattice, p, q, Direction::kX, sch, d.dx);
  partial(lattice, p, q, Direction::kY, sch, d.dy);
  if (phi.has_slope()) {
    for (std::size_t s = 0; s < lattice.sites(); ++s)
      for (int i = 0; i < q; ++i) {
        d.dx[s * q + i] += phi.slope[i];
        d.dy[s * q + i] += phi.slope[q + i];
      }
  }
  return d;
}

double field_norm(const Lattice& lattice, std::span<const double> field, int comps) {
  std::vector<double> site(lattice.sites());
  for_each_index(lattice.sites(), [&](std::size_t s) {
    double a = 0.0;
    for (int c = 0; c < comps; ++c) a += field[s * comps + c] * field[s * comps + c];
    site[s] = interior_weight(lattice, s) * a;
  });
  return std::sqrt(pairwise_sum(site));
}

double field_norm(const Lattice& lattice, std::span<const Complex> field, int comps) {
  std::vector<double> site(lattice.sites());
  for_each_index(lattice.sites(), [&](std::size_t s) {
    double a = 0.0;
    for (int c = 0; c < comps; ++c) a += std::norm(field[s * comps + c]);
    site[s] = interior_weight(lattice, s) * a;
  });
  return std::sqrt(pairwise_sum(site));
}

namespace {

struct EnergySites {
  std::vector<double> dirichlet, spinor, magnetic;  // empty when the term is absent
  bool omega_mode = false;
};

EnergySites energy_sites(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                         const MapField& phi, const SpinorField* psi, const OperatorOptions& opts,
                         const ConformalFactor* u, bool require_primitive) {
  check_map(lattice, target, phi, "energy");
  if (u && u->u.size() != lattice.sites()) throw std::invalid_argument("energy: conformal factor shape mismatch");
  const int q = phi.q;
  const std::size_t n = lattice.sites();
  const auto d = map_derivatives(lattice, phi, opts.scheme);
  EnergySites e;

  e.dirichlet.resize(n);
  for_each_index(n, [&](std::size_t s) {
    double a = 0.0;
    for (int i = 0; i < q; ++i) a += d.dx[s * q + i] * d.dx[s * q + i] + d.dy[s * q + i] * d.dy[s * q + i];
    // |dphi|_h^2 dvol_h = e^{-2u} |dphi|^2 e^{2u} dx
    const double weight = u ? std::exp(2.0 * u->u[s] - 2.0 * u->u[s]) : 1.0;
    e.dirichlet[s] = 0.5 * lattice.cell_area(s) * weight * a;
  });

  if (psi) {
    check_spinor(lattice, phi, *psi, "energy");
    const auto chi = tangent_spinor(target, phi, *psi);
    std::vector<Complex> w(chi.size());
    dirac_untwisted(lattice, opts.spin, chi, q, w, opts.scheme);
    std::vector<double> du_x, du_y;
    if (u) {
      du_x.resize(n);
      du_y.resize(n);
      partial(lattice, u->u, 1, Direction::kX, opts.scheme, du_x);
      partial(lattice, u->u, 1, Direction::kY, opts.scheme, du_y);
    }
    e.spinor.resize(n);
    for_each_index(n, [&](std::size_t s) {
      double a = 0.0;
      for (int i = 0; i < q; ++i) {
        const Complex* c = &chi[(s * q + i) * 2];
        Complex dc[2] = {w[(s * q + i) * 2], w[(s * q + i) * 2 + 1]};
        if (u) {
          // D_h chi = e^{-u} (dslash chi + 1/2 (dslash u) . chi), weighted by e^{2u}
          Complex gx[2], gy[2];
          apply_gamma(0, c, gx);
          apply_gamma(1, c, gy);
          for (int k = 0; k < 2; ++k) {
            dc[k] += 0.5 * (du_x[s] * gx[k] + du_y[s] * gy[k]);
            dc[k] *= std::exp(u->u[s]);
          }
        }
        a += re_inner(c, dc);
      }
      e.spinor[s] = 0.5 * lattice.cell_area(s) * a;
    });
  }

  if (!magnetic.vanishes()) {
    if (magnetic.omega_mode()) {
      if (require_primitive) throw std::invalid_argument("energy: Omega-mode has no energy primitive");
      e.omega_mode = true;
    } else {
      if (phi.has_slope()) throw std::invalid_argument("energy: magnetic primitive needs a periodic map");
      e.magnetic.resize(n);
      for_each_index(n, [&](std::size_t s) {
        double B[kMaxQ * kMaxQ];
        magnetic.primitive(phi.at(s), B);
        double a = 0.0;
        for (int i = 0; i < q; ++i)
          for (int j = 0; j < q; ++j) a += B[i * q + j] * d.dx[s * q + i] * d.dy[s * q + j];
        e.magnetic[s] = lattice.cell_area(s) * a;
      });
    }
  }
  return e;
}

double sum_or_zero(const std::vector<double>& v) { return v.empty() ? 0.0 : pairwise_sum(v); }

}  // namespace

EnergyBreakdown energy(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                       const MapField& phi, const SpinorField* psi, const OperatorOptions& opts,
                       const ConformalFactor* u, bool require_primitive) {
  const auto sites = energy_sites(lattice, target, magnetic, phi, psi, opts, u, require_primitive);
  EnergyBreakdown e;
  e.dirichlet = sum_or_zero(sites.dirichlet);
  e.spinor = sum_or_zero(sites.spinor);
  e.magnetic = sum_or_zero(sites.magnetic);
  e.omega_mode = sites.omega_mode;
  e.total = e.dirichlet + e.spinor + e.magnetic;
  return e;
}

std::vector<double> energy_density(const Lattice& lattice, const TargetManifold& target,
                                   const MagneticData& magnetic, const MapField& phi, const SpinorField* psi,
                                   const OperatorOptions& opts) {
  auto sites = energy_sites(lattice, target, magnetic, phi, psi, opts, nullptr, false);
  std::vector<double> out = std::move(sites.dirichlet);
  for (std::size_t s = 0; s < out.size(); ++s) {
    if (!sites.spinor.empty()) out[s] += sites.spinor[s];
    if (!sites.magnetic.empty()) out[s] += sites.magnetic[s];
  }
  return out;
}

std::vector<double> tension(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                            const OperatorOptions& opts) {
  check_map(lattice, target, phi, "tension");
  for (std::size_t s = 0; s < phi.sites(); ++s) target.require_on_manifold(phi.at(s), "tension");
  const int q = phi.q;
  const auto p = periodic_part(lattice, phi);
  std::vector<double> lap(p.size());
  laplacian(lattice, p, q, effective_scheme(lattice, opts.scheme), lap);
  for_each_index(lattice.sites(), [&](std::size_t s) {
    if (lattice.on_boundary(s)) {
      for (int i = 0; i < q; ++i) lap[s * q + i] = 0.0;
      return;
    }
    target.tangent_project(phi.at(s), &lap[s * q], &lap[s * q]);
  });
  return lap;
}

namespace {

struct DiracData {
  std::vector<Complex> chi;  // T psi
  std::vector<Complex> w;    // dslash chi
};

DiracData dirac_data(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                     const SpinorField& psi, const OperatorOptions& opts) {
  DiracData dd;
  dd.chi = tangent_spinor(target, phi, psi);
  dd.w.resize(dd.chi.size());
  dirac_untwisted(lattice, opts.spin, dd.chi, phi.q, dd.w, opts.scheme);
  return dd;
}

/// R = -T G with normal spinors from the chosen curvature form.
std::vector<double> curvature_from(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                   const DiracData& dd, const MapDerivatives* d, CurvatureForm form) {
  const int q = phi.q;
  std::vector<double> out(lattice.sites() * q, 0.0);
  if (target.codim() == 0) return out;
  for_each_index(lattice.sites(), [&](std::size_t s) {
    Complex nspin[2 * kMaxQ];
    const Complex* chi = &dd.chi[s * 2 * q];
    if (form == CurvatureForm::kDiscrete) {
      double nu[kMaxQ];
      for (int l = 0; l < target.codim(); ++l) {
        target.normal(phi.at(s), l, nu);
        Complex acc[2] = {0.0, 0.0};
        for (int i = 0; i < q; ++i) {
          acc[0] += nu[i] * dd.w[(s * q + i) * 2];
          acc[1] += nu[i] * dd.w[(s * q + i) * 2 + 1];
        }
        nspin[2 * l] = acc[0];
        nspin[2 * l + 1] = acc[1];
      }
      curvature_site(target, phi.at(s), chi, &dd.w[s * 2 * q], nspin, &out[s * q]);
    } else {
      pointwise_normal_spinors(target, phi.at(s), chi, d->d(0, s, q), d->d(1, s, q), nspin);
      curvature_site(target, phi.at(s), chi, nullptr, nspin, &out[s * q]);
    }
  });
  return out;
}

}  // namespace

std::vector<double> curvature_term(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                   const SpinorField& psi, const OperatorOptions& opts) {
  check_map(lattice, target, phi, "curvature_term");
  check_spinor(lattice, phi, psi, "curvature_term");
  const auto dd = dirac_data(lattice, target, phi, psi, opts);
  if (opts.curvature == CurvatureForm::kPointwise) {
    const auto d = map_derivatives(lattice, phi, opts.scheme);
    return curvature_from(lattice, target, phi, dd, &d, CurvatureForm::kPointwise);
  }
  return curvature_from(lattice, target, phi, dd, nullptr, CurvatureForm::kDiscrete);
}

namespace {

std::vector<double> force_from(const Lattice& lattice, const MagneticData& magnetic, const MapField& phi,
                               const MapDerivatives& d) {
  const int q = phi.q;
  std::vector<double> out(lattice.sites() * q, 0.0);
  if (magnetic.vanishes()) return out;
  for_each_index(lattice.sites(), [&](std::size_t s) {
    magnetic_Z(magnetic, phi.at(s), d.d(0, s, q), d.d(1, s, q), &out[s * q]);
  });
  return out;
}

}  // namespace

std::vector<double> magnetic_force(const Lattice& lattice, const MagneticData& magnetic, const MapField& phi,
                                   const OperatorOptions& opts) {
  if (magnetic.q() != phi.q) throw std::invalid_argument("magnetic_force: ambient dimension mismatch");
  return force_from(lattice, magnetic, phi, map_derivatives(lattice, phi, opts.scheme));
}

SpinorField twisted_dirac(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                          const SpinorField& psi, const OperatorOptions& opts) {
  check_map(lattice, target, phi, "twisted_dirac");
  check_spinor(lattice, phi, psi, "twisted_dirac");
  const auto dd = dirac_data(lattice, target, phi, psi, opts);
  SpinorField out(lattice, phi.q);
  for_each_index(lattice.sites(), [&](std::size_t s) {
    target.tangent_project_spinor(phi.at(s), &dd.w[s * 2 * phi.q], out.at(s));
  });
  return out;
}

SpinorField ambient_dirac_residual(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                   const SpinorField& psi, const OperatorOptions& opts) {
  check_map(lattice, target, phi, "ambient_dirac_residual");
  check_spinor(lattice, phi, psi, "ambient_dirac_residual");
  const int q = phi.q;
  SpinorField out(lattice, q);
  dirac_untwisted(lattice, opts.spin, psi.values, q, out.values, opts.scheme);
  if (target.codim() == 0) return out;
  const auto d = map_derivatives(lattice, phi, opts.scheme);
  for_each_index(lattice.sites(), [&](std::size_t s) {
    // II(e_a.psi, dphi(e_a)) = sum_l nu_l sum_i (gamma_a psi^i) (J_l T dphi_a)^i
    double nu[kMaxQ], J[kMaxQ * kMaxQ], t[kMaxQ];
    const Complex* ps = psi.at(s);
    for (int l = 0; l < target.codim(); ++l) {
      target.normal(phi.at(s), l, nu);
      target.normal_derivative(phi.at(s), l, J);
      Complex acc[2] = {0.0, 0.0};
      for (int a = 0; a < 2; ++a) {
        target.tangent_project(phi.at(s), d.d(a, s, q), t);
        for (int i = 0; i < q; ++i) {
          double Jt = 0.0;
          for (int j = 0; j < q; ++j) Jt += J[i * q + j] * t[j];
          Complex g[2];
          apply_gamma(a, &ps[2 * i], g);
          acc[0] += g[0] * Jt;
          acc[1] += g[1] * Jt;
        }
      }
      for (int i = 0; i < q; ++i) {
        out.at(s)[2 * i] += nu[i] * acc[0];
        out.at(s)[2 * i + 1] += nu[i] * acc[1];
      }
    }
  });
  return out;
}

MapResidual el_residual_map(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                            const MapField& phi, const SpinorField* psi, const OperatorOptions& opts) {
  MapResidual r;
  r.field = tension(lattice, target, phi, opts);
  const int q = phi.q;
  const auto d = map_derivatives(lattice, phi, opts.scheme);
  if (psi) {
    check_spinor(lattice, phi, *psi, "el_residual_map");
    const auto dd = dirac_data(lattice, target, phi, *psi, opts);
    const auto R = curvature_from(lattice, target, phi, dd, &d, opts.curvature);
    for (std::size_t k = 0; k < R.size(); ++k) r.field[k] -= R[k];
  }
  if (!magnetic.vanishes()) {
    const auto Z = force_from(lattice, magnetic, phi, d);
    for_each_index(lattice.sites(), [&](std::size_t s) {
      if (lattice.on_boundary(s)) return;
      double z[kMaxQ];
      target.tangent_project(phi.at(s), &Z[s * q], z);
      for (int i = 0; i < q; ++i) r.field[s * q + i] -= z[i];
    });
  }
  r.norm = field_norm(lattice, r.field, q);
  return r;
}

std::vector<double> ambient_map_residual(const Lattice& lattice, const TargetManifold& target,
                                         const MagneticData& magnetic, const MapField& phi, const SpinorField* psi,
                                         const OperatorOptions& opts) {
  check_map(lattice, target, phi, "ambient_map_residual");
  for (std::size_t s = 0; s < phi.sites(); ++s) target.require_on_manifold(phi.at(s), "ambient_map_residual");
  const int q = phi.q;
  const auto p = periodic_part(lattice, phi);
  std::vector<double> out(p.size());
  laplacian(lattice, p, q, effective_scheme(lattice, opts.scheme), out);
  const auto d = map_derivatives(lattice, phi, opts.scheme);
  const auto Z = force_from(lattice, magnetic, phi, d);
  std::vector<double> R;
  if (psi) {
    check_spinor(lattice, phi, *psi, "ambient_map_residual");
    const auto dd = dirac_data(lattice, target, phi, *psi, opts);
    R = curvature_from(lattice, target, phi, dd, &d, CurvatureForm::kPointwise);
  }
  for_each_index(lattice.sites(), [&](std::size_t s) {
    if (lattice.on_boundary(s)) {
      for (int i = 0; i < q; ++i) out[s * q + i] = 0.0;
      return;
    }
    double ii[kMaxQ] = {};
    if (target.codim() > 0) {
      double tmp[kMaxQ];
      for (int a = 0; a < 2; ++a) {
        target.second_fundamental_form(phi.at(s), d.d(a, s, q), d.d(a, s, q), tmp);
        for (int i = 0; i < q; ++i) ii[i] += tmp[i];
      }
    }
    for (int i = 0; i < q; ++i) {
      out[s * q + i] += ii[i] - Z[s * q + i] - (R.empty() ? 0.0 : R[s * q + i]);
    }
  });
  return out;
}

SpinorResidual el_residual_spinor(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                                  const SpinorField& psi, const OperatorOptions& opts) {
  SpinorResidual r;
  r.field = twisted_dirac(lattice, target, phi, psi, opts);
  r.norm = field_norm(lattice, r.field.values, 2 * phi.q);
  return r;
}

RiviereForm riviere_connection(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                               const MapField& phi, const SpinorField* psi, const OperatorOptions& opts) {
  check_map(lattice, target, phi, "riviere_connection");
  if (psi) check_spinor(lattice, phi, *psi, "riviere_connection");
  const int q = phi.q;
  const auto d = map_derivatives(lattice, phi, opts.scheme);
  RiviereForm form{q, std::vector<double>(lattice.sites() * q * q, 0.0), std::vector<double>(lattice.sites() * q * q, 0.0)};
  for_each_index(lattice.sites(), [&](std::size_t s) {
    const double* y = phi.at(s);
    const double* dx = d.d(0, s, q);
    const double* dy = d.d(1, s, q);
    double* f = &form.f[s * q * q];
    double* g = &form.g[s * q * q];
    double nu[kMaxQ], J[kMaxQ * kMaxQ], Pi[kMaxQ * kMaxQ];
    for (int l = 0; l < target.codim(); ++l) {
      target.normal(y, l, nu);
      target.normal_derivative(y, l, J);
      // (d_j nu^i nu^m - d_j nu^m nu^i) dphi^j
      for (int m = 0; m < q; ++m)
        for (int i = 0; i < q; ++i) {
          double a = 0.0, b = 0.0;
          for (int j = 0; j < q; ++j) {
            const double c = J[i * q + j] * nu[m] - J[m * q + j] * nu[i];
            a += c * dx[j];
            b += c * dy[j];
          }
          f[m * q + i] += a;
          g[m * q + i] += b;
        }
      if (!psi) continue;
      // Pi_j = T (d nu_l / d y^j), Pi[i*q + j]
      for (int j = 0; j < q; ++j) {
        double col[kMaxQ];
        for (int i = 0; i < q; ++i) col[i] = J[i * q + j];
        target.tangent_project(y, col, col);
        for (int i = 0; i < q; ++i) Pi[i * q + j] = col[i];
      }
      const Complex* ps = psi->at(s);
      for (int a = 0; a < 2; ++a) {
        // S[k][j] = Re <psi^k, gamma_a psi^j>
        double S[kMaxQ * kMaxQ];
        for (int j = 0; j < q; ++j) {
          Complex gj[2];
          apply_gamma(a, &ps[2 * j], gj);
          for (int k = 0; k < q; ++k) S[k * q + j] = re_inner(&ps[2 * k], gj);
        }
        double* A = a == 0 ? f : g;
        for (int m = 0; m < q; ++m)
          for (int i = 0; i < q; ++i) {
            double acc = 0.0;
            for (int j = 0; j < q; ++j)
              for (int k = 0; k < q; ++k)
                acc += S[k * q + j] * (Pi[i * q + j] * Pi[m * q + k] - Pi[i * q + k] * Pi[m * q + j]);
            A[m * q + i] -= 0.5 * acc;
          }
      }
    }
    if (!magnetic.vanishes()) {
      double Z[kMaxQ * kMaxQ * kMaxQ];
      magnetic.tensor(y, Z);
      for (int m = 0; m < q; ++m)
        for (int i = 0; i < q; ++i) {
          double zy = 0.0, zx = 0.0;
          for (int j = 0; j < q; ++j) {
            zy += Z[(m * q + i) * q + j] * dy[j];
            zx += Z[(m * q + i) * q + j] * dx[j];
          }
          f[m * q + i] -= 0.5 * zy;
          g[m * q + i] += 0.5 * zx;
        }
    }
  });
  return form;
}

std::vector<double> riviere_apply(const RiviereForm& form, const MapDerivatives& d) {
  const int q = form.q;
  const std::size_t n = form.f.size() / (q * q);
  std::vector<double> out(n * q, 0.0);
  for_each_index(n, [&](std::size_t s) {
    for (int m = 0; m < q; ++m) {
      double acc = 0.0;
      for (int i = 0; i < q; ++i) {
        acc += form.f[(s * q + m) * q + i] * d.dx[s * q + i] + form.g[(s * q + m) * q + i] * d.dy[s * q + i];
      }
      out[s * q + m] = acc;
    }
  });
  return out;
}

double riviere_skewness(const RiviereForm& form) {
  const int q = form.q;
  double worst = 0.0;
  for (const auto* A : {&form.f, &form.g}) {
    const std::size_t n = A->size() / (q * q);
    for (std::size_t s = 0; s < n; ++s)
      for (int m = 0; m < q; ++m)
        for (int i = 0; i < q; ++i)
          worst = std::max(worst, std::abs((*A)[(s * q + m) * q + i] + (*A)[(s * q + i) * q + m]));
  }
  return worst;
}

namespace {

/// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

double magnetic_action_difference(const Lattice& lattice, const TargetManifold& target,
                                  const MagneticData& magnetic, const MapField& phi, std::span<const double> delta,
                                  double a, double b, const OperatorOptions& opts) {
  check_map(lattice, target, phi, "magnetic_action_difference");
  if (delta.size() != phi.values.size()) throw std::invalid_argument("magnetic_action_difference: perturbation shape mismatch");
  if (magnetic.vanishes()) return 0.0;
  const int q = phi.q;
  std::vector<double> nodes, weights;
  gauss_legendre(8, nodes, weights);
  double total = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double t = 0.5 * (a + b) + 0.5 * (b - a) * nodes[k];
    MapField raw = phi;
    for (std::size_t c = 0; c < raw.values.size(); ++c) raw.values[c] += t * delta[c];
    const MapField Phi = project_map(raw, target);
    std::vector<double> dPhi(raw.values.size());
    for (std::size_t s = 0; s < lattice.sites(); ++s) {
      target.project_derivative(raw.at(s), &delta[s * q], &dPhi[s * q]);
    }
    const auto d = map_derivatives(lattice, Phi, opts.scheme);
    std::vector<double> site(lattice.sites());
    for_each_index(lattice.sites(), [&](std::size_t s) {
      double z[kMaxQ];
      magnetic_Z(magnetic, Phi.at(s), d.d(0, s, q), d.d(1, s, q), z);
      double acc = 0.0;
      for (int i = 0; i < q; ++i) acc += dPhi[s * q + i] * z[i];
      site[s] = lattice.cell_area(s) * acc;
    });
    total += 0.5 * (b - a) * weights[k] * pairwise_sum(site);
  }
  return total;
}

}  // namespace magdirac
