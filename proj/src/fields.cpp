#include "magdirac/fields.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "magdirac/parallel.hpp"

namespace magdirac {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_same_sites(std::size_t a, std::size_t b, const char* where) {
  if (a != b) throw std::invalid_argument(std::string(where) + ": field sizes disagree");
}

}  // namespace

SpinorField enforce_tangency(const SpinorField& psi, const MapField& phi, const TargetManifold& target) {
  if (psi.q != target.q() || phi.q != target.q()) throw std::invalid_argument("enforce_tangency: ambient dimension mismatch");
  require_same_sites(psi.values.size() / (2 * psi.q), phi.sites(), "enforce_tangency");
  for (std::size_t s = 0; s < phi.sites(); ++s) target.require_on_manifold(phi.at(s), "enforce_tangency");
  SpinorField out = psi;
  for_each_index(phi.sites(), [&](std::size_t s) {
    target.tangent_project_spinor(phi.at(s), psi.at(s), out.at(s));
  });
  return out;
}

double tangency_violation(const SpinorField& psi, const MapField& phi, const TargetManifold& target) {
  const int q = target.q();
  std::vector<double> worst(phi.sites(), 0.0);
  std::vector<double> nu(q);
  for (std::size_t s = 0; s < phi.sites(); ++s) {
    for (int l = 0; l < target.codim(); ++l) {
      target.normal(phi.at(s), l, nu.data());
      for (int a = 0; a < 2; ++a) {
        Complex c = 0.0;
        for (int i = 0; i < q; ++i) c += nu[i] * psi.at(s)[2 * i + a];
        worst[s] = std::max(worst[s], std::abs(c));
      }
    }
  }
  double w = 0.0;
  for (double v : worst) w = std::max(w, v);
  return w;
}

MapField project_map(const MapField& raw, const TargetManifold& target) {
  if (raw.q != target.q()) throw std::invalid_argument("project_map: ambient dimension mismatch");
  MapField out = raw;
  for (std::size_t s = 0; s < raw.sites(); ++s) {
    try {
      target.project_point(raw.at(s), out.at(s));
    } catch (const std::domain_error&) {
      throw std::domain_error("project_map: value at site " + std::to_string(s) + " is outside the projection domain");
    }
  }
  return out;
}

double manifold_violation(const MapField& phi, const TargetManifold& target) {
  double w = 0.0;
  for (std::size_t s = 0; s < phi.sites(); ++s) w = std::max(w, target.distance(phi.at(s)));
  return w;
}

std::vector<double> smooth_noise(const Lattice& lattice, int comps, std::uint64_t seed, double amplitude,
                                 double cutoff) {
  if (!(cutoff >= 1.0)) throw std::invalid_argument("random-smooth: cutoff must be >= 1");
  if (!(amplitude >= 0.0)) throw std::invalid_argument("random-smooth: amplitude must be >= 0");
  const double L1 = lattice.is_torus() ? lattice.length(0) : 2.0 * lattice.r_outer();
  const double L2 = lattice.is_torus() ? lattice.length(1) : 2.0 * lattice.r_outer();
  const int mmax = static_cast<int>(std::floor(cutoff));
  struct Mode {
    int m1, m2;
  };
  std::vector<Mode> modes;
  for (int m1 = 0; m1 <= mmax; ++m1) {
    for (int m2 = -mmax; m2 <= mmax; ++m2) {
      if (m1 == 0 && m2 <= 0) continue;
      if (m1 * m1 + m2 * m2 > cutoff * cutoff) continue;
      if (lattice.is_torus() && (2 * m1 >= lattice.n1() || 2 * std::abs(m2) >= lattice.n2())) continue;
      modes.push_back({m1, m2});
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(lattice.sites() * comps, 0.0);
  for (int c = 0; c < comps; ++c) {
    std::vector<double> a(modes.size()), b(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) {
      a[k] = normal(rng);
      b[k] = normal(rng);
    }
    double ss = 0.0;
    for (std::size_t s = 0; s < lattice.sites(); ++s) {
      const double x = lattice.x(s), y = lattice.y(s);
      double v = 0.0;
      for (std::size_t k = 0; k < modes.size(); ++k) {
        const double th = kTwoPi * (modes[k].m1 * x / L1 + modes[k].m2 * y / L2);
        v += a[k] * std::cos(th) + b[k] * std::sin(th);
      }
      out[s * comps + c] = v;
      ss += v * v;
    }
    const double rms = std::sqrt(ss / lattice.sites());
    const double scale = rms > 0.0 ? amplitude / rms : 0.0;
    for (std::size_t s = 0; s < lattice.sites(); ++s) out[s * comps + c] *= scale;
  }
  return out;
}

MapField init_map(const MapInit& spec, const Lattice& lattice, const TargetManifold& target) {
  const int q = target.q();
  std::vector<double> base = spec.base;
  if (base.empty()) {
    base.assign(q, 0.0);
    base[q - 1] = 1.0;
  }
  if (static_cast<int>(base.size()) != q) throw std::invalid_argument("init: base point has the wrong dimension");
  MapField phi(lattice, q);
  switch (spec.kind) {
    case MapInitKind::kConstant: {
      if (target.distance(base.data()) > TargetManifold::kOnManifoldTol) {
        throw std::invalid_argument("init: constant base point is not on the target");
      }
      for (std::size_t s = 0; s < lattice.sites(); ++s) std::copy(base.begin(), base.end(), phi.at(s));
      return phi;
    }
    case MapInitKind::kWinding: {
      if (target.kind() == TargetKind::kSphere) {
        for (std::size_t s = 0; s < lattice.sites(); ++s) {
          double th;
          if (lattice.is_torus()) {
            th = kTwoPi * (spec.winding1 * lattice.x(s) / lattice.length(0) +
                           spec.winding2 * lattice.y(s) / lattice.length(1));
          } else {
            th = spec.winding1 * lattice.angle(lattice.index2(s));
          }
          double* v = phi.at(s);
          v[0] = std::cos(th);
          v[1] = std::sin(th);
        }
        return phi;
      }
      std::array<double, 2> a{static_cast<double>(spec.winding1), static_cast<double>(spec.winding2)};
      if (lattice.is_torus()) {
        a[0] *= kTwoPi / lattice.length(0);
        a[1] *= kTwoPi / lattice.length(1);
        phi.slope.assign(2 * q, 0.0);
        phi.slope[0 * q + 0] = a[0];
        phi.slope[1 * q + 1] = a[1];
      }
      for (std::size_t s = 0; s < lattice.sites(); ++s) {
        double* v = phi.at(s);
        std::copy(base.begin(), base.end(), v);
        v[0] += a[0] * lattice.x(s);
        v[1] += a[1] * lattice.y(s);
      }
      return phi;
    }
    case MapInitKind::kRandomSmooth: {
      const auto noise = smooth_noise(lattice, q, spec.seed, spec.amplitude, spec.cutoff);
      for (std::size_t s = 0; s < lattice.sites(); ++s)
        for (int i = 0; i < q; ++i) phi.at(s)[i] = base[i] + noise[s * q + i];
      return project_map(phi, target);
    }
    case MapInitKind::kElliptic: {
      if (target.kind() != TargetKind::kSphere || target.n() != 2) {
        throw std::invalid_argument("init: elliptic map requires the S^2 target");
      }
      return elliptic_pair(lattice, {Complex(1.0, 0.0), Complex(0.0, 0.0)}).phi;
    }
    case MapInitKind::kStereographic: {
      if (q != 3) throw std::invalid_argument("init: stereographic map requires a target in R^3");
      std::vector<double> noise;
      if (spec.amplitude > 0.0) noise = smooth_noise(lattice, q, spec.seed, spec.amplitude, spec.cutoff);
      for (std::size_t s = 0; s < lattice.sites(); ++s) {
        const double u = spec.scale * lattice.x(s), v = spec.scale * lattice.y(s);
        const double r2 = u * u + v * v;
        double* p = phi.at(s);
        p[0] = 2.0 * u / (1.0 + r2);
        p[1] = 2.0 * v / (1.0 + r2);
        p[2] = (r2 - 1.0) / (1.0 + r2);
        if (!noise.empty() && !lattice.on_boundary(s))
          for (int i = 0; i < q; ++i) p[i] += noise[s * q + i];
      }
      return project_map(phi, target);
    }
  }
  throw std::invalid_argument("init: unknown map kind");
}

SpinorField constant_spinor(const Lattice& lattice, const MapField& phi, const TargetManifold& target,
                            const std::array<Complex, 2>& eps) {
  SpinorField psi(lattice, target.q());
  for (std::size_t s = 0; s < lattice.sites(); ++s)
    for (int i = 0; i < target.q(); ++i) {
      psi.at(s)[2 * i] = eps[0];
      psi.at(s)[2 * i + 1] = eps[1];
    }
  return enforce_tangency(psi, phi, target);
}

EllipticPair elliptic_pair(const Lattice& lattice, const std::array<Complex, 2>& eps) {
  constexpr double kPi = std::numbers::pi;
  if (!lattice.is_torus() || lattice.n1() != lattice.n2() || std::abs(lattice.length(0) - kTwoPi) > 1e-12 ||
      std::abs(lattice.length(1) - kTwoPi) > 1e-12) {
    throw std::invalid_argument("elliptic map: requires the square torus of side 2 pi");
  }
  const std::size_t n = lattice.sites();
  EllipticPair out{MapField(lattice, 3), SpinorField(lattice, 3), std::vector<double>(3 * n),
                   std::vector<double>(3 * n)};
  const Complex I(0.0, 1.0);
  for (std::size_t s = 0; s < n; ++s) {
    const Complex z(lattice.x(s), lattice.y(s));
    const Complex sn = std::sin(z / 2.0), cs = std::cos(z / 2.0);
    Complex S1 = 0.0, C1 = 0.0;
    for (int k = -8; k <= 8; ++k) {
      if (k == 0) continue;
      const Complex w = z / 2.0 + double(k) * kPi * I;
      const Complex csc = 1.0 / std::sin(w);
      S1 += csc * csc;
      C1 += csc * csc * std::cos(w) * csc;
    }
    // g = 1/f with the n = 0 pole divided out; g' = -f'/f^2.
    const Complex D = 1.0 + sn * sn * S1;
    const Complex g = sn * sn / D;
    const Complex dg = sn * cs / (D * D) + g * g * C1;
    double phi[3], dphi[2][3];
    const Complex dirs[2] = {1.0, I};
    if (std::abs(g) <= 1.0) {
      const double m = 1.0 + std::norm(g);
      phi[0] = 2.0 * g.real() / m;
      phi[1] = -2.0 * g.imag() / m;
      phi[2] = (1.0 - std::norm(g)) / m;
      for (int a = 0; a < 2; ++a) {
        const Complex d = dg * dirs[a];
        const double dm = 2.0 * (std::conj(g) * d).real();
        dphi[a][0] = 2.0 * d.real() / m - 2.0 * g.real() * dm / (m * m);
        dphi[a][1] = -2.0 * d.imag() / m + 2.0 * g.imag() * dm / (m * m);
        dphi[a][2] = -2.0 * dm / (m * m);
      }
    } else {
      const Complex f = 1.0 / g;
      const Complex df = -dg / (g * g);
      const double m = 1.0 + std::norm(f);
      phi[0] = 2.0 * f.real() / m;
      phi[1] = 2.0 * f.imag() / m;
      phi[2] = (std::norm(f) - 1.0) / m;
      for (int a = 0; a < 2; ++a) {
        const Complex d = df * dirs[a];
        const double dm = 2.0 * (std::conj(f) * d).real();
        dphi[a][0] = 2.0 * d.real() / m - 2.0 * f.real() * dm / (m * m);
        dphi[a][1] = 2.0 * d.imag() / m - 2.0 * f.imag() * dm / (m * m);
        dphi[a][2] = 2.0 * dm / (m * m);
      }
    }
    Complex ge[2][2];
    apply_gamma(0, eps.data(), ge[0]);
    apply_gamma(1, eps.data(), ge[1]);
    for (int i = 0; i < 3; ++i) {
      out.phi.at(s)[i] = phi[i];
      out.dphi_x[s * 3 + i] = dphi[0][i];
      out.dphi_y[s * 3 + i] = dphi[1][i];
      for (int a = 0; a < 2; ++a) out.psi.at(s)[2 * i + a] = dphi[0][i] * ge[0][a] + dphi[1][i] * ge[1][a];
    }
  }
  return out;
}

// ---- CSV snapshots -------------------------------------------------------------

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

}  // namespace

std::string fields_to_csv(const Lattice& lattice, const MapField& phi, const SpinorField* psi) {
  const int q = phi.q;
  std::string out = "site,i1,i2,x,y";
  for (int i = 0; i < q; ++i) out += ",phi_" + std::to_string(i);
  if (psi) {
    for (int i = 0; i < q; ++i)
      for (int a = 0; a < 2; ++a) {
        const std::string p = ",psi_" + std::to_string(i) + "_" + std::to_string(a);
        out += p + "_re" + p + "_im";
      }
  }
  out += '\n';
  for (std::size_t s = 0; s < lattice.sites(); ++s) {
    out += std::to_string(s) + ',' + std::to_string(lattice.index1(s)) + ',' + std::to_string(lattice.index2(s));
    out += ',';
    append_number(out, lattice.x(s));
    out += ',';
    append_number(out, lattice.y(s));
    for (int i = 0; i < q; ++i) {
      out += ',';
      append_number(out, phi.at(s)[i]);
    }
    if (psi) {
      for (int k = 0; k < 2 * q; ++k) {
        out += ',';
        append_number(out, psi->at(s)[k].real());
        out += ',';
        append_number(out, psi->at(s)[k].imag());
      }
    }
    out += '\n';
  }
  return out;
}

void write_fields_csv(const std::string& path, const Lattice& lattice, const MapField& phi,
                      const SpinorField* psi) {
  write_text_atomic(path, fields_to_csv(lattice, phi, psi));
}

FieldSnapshot fields_from_csv(const std::string& text, const Lattice& lattice, int q) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("snapshot: empty file");
  const auto header = split_csv(line);
  const std::size_t base = 5 + q;
  const bool has_psi = header.size() == base + 4 * q;
  if (header.size() != base && !has_psi) throw std::runtime_error("snapshot: column count does not match the target dimension");
  FieldSnapshot snap{MapField(lattice, q), std::nullopt};
  if (has_psi) snap.psi = SpinorField(lattice, q);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw std::runtime_error("snapshot: ragged row " + std::to_string(row));
    if (row >= lattice.sites() || std::stoul(cells[0]) != row) throw std::runtime_error("snapshot: site index mismatch at row " + std::to_string(row));
    for (int i = 0; i < q; ++i) snap.phi.at(row)[i] = std::stod(cells[5 + i]);
    if (has_psi) {
      for (int k = 0; k < 2 * q; ++k) {
        snap.psi->at(row)[k] = Complex(std::stod(cells[base + 2 * k]), std::stod(cells[base + 2 * k + 1]));
      }
    }
    ++row;
  }
  if (row != lattice.sites()) throw std::runtime_error("snapshot: expected " + std::to_string(lattice.sites()) + " rows, got " + std::to_string(row));
  return snap;
}

FieldSnapshot read_fields_csv(const std::string& path, const Lattice& lattice, int q) {
  return fields_from_csv(read_text(path), lattice, q);
}

}  // namespace magdirac
