#include "magdirac/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "magdirac/parallel.hpp"

namespace magdirac {

std::string to_string(SolveMode mode) {
  switch (mode) {
    case SolveMode::kCoupled: return "coupled";
    case SolveMode::kMapOnly: return "map-only";
    case SolveMode::kSpinorOnly: return "spinor-only";
  }
  return "coupled";
}

SolveMode solve_mode_from_string(const std::string& name) {
  if (name == "coupled") return SolveMode::kCoupled;
  if (name == "map-only") return SolveMode::kMapOnly;
  if (name == "spinor-only") return SolveMode::kSpinorOnly;
  throw std::invalid_argument("unknown solve mode '" + name + "'");
}

void SolveConfig::validate() const {
  if (max_outer < 1) throw std::invalid_argument("solve.max_outer must be >= 1");
  if (flow_dt < 0.0 || !std::isfinite(flow_dt)) throw std::invalid_argument("solve.flow_dt must be positive");
  if (!(tol_map > 0.0) || !(tol_spinor > 0.0)) throw std::invalid_argument("solve tolerances must be positive");
  if (k_eigs < 1) throw std::invalid_argument("solve.k_eigs must be >= 1");
  if (!(spinor_norm > 0.0)) throw std::invalid_argument("solve.spinor_norm must be positive");
  if (refresh_interval < 1) throw std::invalid_argument("solve.refresh_interval must be >= 1");
  if (!(near_kernel > 0.0)) throw std::invalid_argument("solve.near_kernel must be positive");
}

// ---- spinor eigen-solve ---------------------------------------------------------

namespace {

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

class DiracOperator {
 public:
  DiracOperator(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                const SpinStructure& spin, Scheme scheme, double sigma)
      : lattice_(lattice), target_(target), phi_(phi), sigma_(sigma) {
    opts_.scheme = scheme;
    opts_.spin = spin;
    buf_ = SpinorField(lattice, phi.q);
  }

  Eigen::Index dim() const { return static_cast<Eigen::Index>(buf_.values.size()); }

  Vec apply(const Vec& x) {
    std::copy(x.data(), x.data() + x.size(), buf_.values.begin());
    const SpinorField out = twisted_dirac(lattice_, target_, phi_, buf_, opts_);
    return Eigen::Map<const Vec>(out.values.data(), dim());
  }

  double sigma() const { return sigma_; }
  /// (A^2 + sigma) x
  Vec apply_shifted_square(const Vec& x) {
    Vec y = apply(apply(x));
    y += sigma_ * x;
    return y;
  }

  Vec project(const Vec& x) {
    Vec out(x.size());
    const int q = phi_.q;
    for_each_index(lattice_.sites(), [&](std::size_t s) {
      target_.tangent_project_spinor(phi_.at(s), x.data() + s * 2 * q, out.data() + s * 2 * q);
    });
    return out;
  }

  /// T (sigma - lap)^{-1} T x
  Vec precondition(const Vec& x) {
    const Vec px = project(x);
    Vec y(px.size());
    shifted_inverse_laplacian_complex(lattice_, opts_.spin, std::span<const Complex>(px.data(), px.size()),
                                      2 * phi_.q, sigma_, std::span<Complex>(y.data(), y.size()));
    return project(y);
  }

 private:
  const Lattice& lattice_;
  const TargetManifold& target_;
  const MapField& phi_;
  double sigma_;
  OperatorOptions opts_;
  SpinorField buf_;
};

/// Preconditioned CG for (A^2 + sigma) x = b on the tangent subspace.
Vec pcg(DiracOperator& op, const Vec& rhs, const Vec& guess, double rel_tol, int max_iter) {
  const Vec b = op.project(rhs);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Vec::Zero(b.size());
  Vec x = op.project(guess);
  Vec r = b - op.apply_shifted_square(x);
  if (r.norm() <= rel_tol * bnorm) return x;
  Vec z = op.precondition(r);
  Vec p = z;
  double rz = r.dot(z).real();
  for (int it = 0; it < max_iter && rz > 0.0; ++it) {
    const Vec Ap = op.apply_shifted_square(p);
    const double pap = p.dot(Ap).real();
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * Ap;
    if (r.norm() <= rel_tol * bnorm) break;
    z = op.precondition(r);
    const double rz_new = r.dot(z).real();
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return x;
}

Mat orthonormalize(const Mat& X) {
  Eigen::HouseholderQR<Mat> qr(X);
  return qr.householderQ() * Mat::Identity(X.rows(), X.cols());
}

Mat reference_block(Eigen::Index dim, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat R(dim, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      R(r, c) = Complex(re, im);
    }
  return R;
}

}  // namespace

SpinorSpectrum solve_spinor(const Lattice& lattice, const TargetManifold& target, const MapField& phi,
                            const SpinStructure& spin, int k_eigs, double tol_spinor,
                            const Eigen::MatrixXcd* warm_start, Scheme scheme) {
  if (!lattice.is_torus()) throw std::invalid_argument("solve_spinor: spinors require a torus lattice");
  if (phi.q != target.q() || phi.values.size() != lattice.sites() * phi.q) {
    throw std::invalid_argument("solve_spinor: map field shape does not match lattice/target");
  }
  if (k_eigs < 1) throw std::invalid_argument("solve_spinor: k_eigs must be >= 1");
  for (std::size_t s = 0; s < phi.sites(); ++s) target.require_on_manifold(phi.at(s), "solve_spinor");

  const double kmin = lattice.min_wavenumber();
  DiracOperator op(lattice, target, phi, spin, scheme, 0.05 * kmin * kmin);
  const Eigen::Index dim = op.dim();
  const Eigen::Index tangent_dim = static_cast<Eigen::Index>(lattice.sites()) * 2 * target.n();
  if (k_eigs > tangent_dim) throw std::invalid_argument("solve_spinor: k_eigs exceeds the tangent dimension");
  const Eigen::Index p = std::min<Eigen::Index>(k_eigs + 6, tangent_dim);

  Mat X = reference_block(dim, p, 0x5eed5eedULL);
  if (warm_start && warm_start->rows() == dim) {
    const Eigen::Index c = std::min<Eigen::Index>(warm_start->cols(), p);
    X.leftCols(c) = warm_start->leftCols(c);
  }
  for (Eigen::Index c = 0; c < p; ++c) X.col(c) = op.project(X.col(c));

  constexpr double kResidualTarget = 1e-9;
  constexpr int kMaxIter = 200;
  SpinorSpectrum out;
  Eigen::VectorXd lambda;
  Mat V, AV;
  std::vector<Eigen::Index> order;
  double worst = 0.0;
  for (int iter = 0;; ++iter) {
    const Mat Q = orthonormalize(X);
    Mat AQ(dim, p);
    for (Eigen::Index c = 0; c < p; ++c) AQ.col(c) = op.apply(Q.col(c));
    // Rayleigh-Ritz with A^2 = (AQ)^* (AQ) drives span Q to an A^2-invariant subspace.
    Mat H2 = AQ.adjoint() * AQ;
    H2 = 0.5 * (H2 + H2.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es2(H2);
    const Mat U = Q * es2.eigenvectors();
    const Mat AU = AQ * es2.eigenvectors();
    double worst2 = 0.0;
    for (int i = 0; i < k_eigs; ++i) {
      const double res = (op.apply(AU.col(i)) - es2.eigenvalues()[i] * U.col(i)).norm();
      if (!(res <= worst2)) worst2 = res;
    }
    if (!std::isfinite(worst2)) throw std::runtime_error("solve_spinor: non-finite eigen residual");
    worst = worst2;
    out.iterations = iter;
    if (worst2 <= 0.1 * kResidualTarget * kmin * kmin) {
      // A-invariant extension span[U, Y], Y the part of AU orthogonal to U; on an
      // A^2-invariant block Y only holds the +-lambda mixing directions.
      Mat Y = AU - U * (U.adjoint() * AU);
      Y -= U * (U.adjoint() * Y);
      Eigen::SelfAdjointEigenSolver<Mat> gram(Y.adjoint() * Y);
      std::vector<Eigen::Index> keep;
      for (Eigen::Index c = 0; c < p; ++c)
        if (std::sqrt(std::max(gram.eigenvalues()[c], 0.0)) > std::sqrt(kResidualTarget) * kmin) keep.push_back(c);
      const Eigen::Index r = p + static_cast<Eigen::Index>(keep.size());
      Mat W(dim, r);
      W.leftCols(p) = U;
      for (std::size_t j = 0; j < keep.size(); ++j) {
        Vec y = op.project(Y * gram.eigenvectors().col(keep[j]));
        for (Eigen::Index i = 0; i < p + static_cast<Eigen::Index>(j); ++i) y -= W.col(i) * W.col(i).dot(y);
        W.col(p + j) = y / y.norm();
      }
      Mat AW(dim, r);
      for (Eigen::Index c = 0; c < r; ++c) AW.col(c) = op.apply(W.col(c));
      Mat H = W.adjoint() * AW;
      H = 0.5 * (H + H.adjoint()).eval();
      Eigen::SelfAdjointEigenSolver<Mat> es(H);
      lambda = es.eigenvalues();
      V = W * es.eigenvectors();
      AV = AW * es.eigenvectors();
      order.resize(r);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double da = std::abs(lambda[a]), db = std::abs(lambda[b]);
        if (std::abs(da - db) > 1e-12 * std::max(1.0, da)) return da < db;
        return lambda[a] < lambda[b];
      });
      worst = 0.0;
      for (int i = 0; i < k_eigs; ++i) {
        const Eigen::Index c = order[i];
        const double res = (AV.col(c) - lambda[c] * V.col(c)).norm() / V.col(c).norm();
        if (!(res <= worst)) worst = res;
      }
      if (worst <= kResidualTarget) break;
    }
    if (iter >= kMaxIter) {
      throw std::runtime_error("solve_spinor: eigen-iteration did not converge (worst residual " +
                               std::to_string(worst) + " after " + std::to_string(iter) + " iterations)");
    }
    // Inner accuracy tracks the outer residual; exact solves early on are wasted work.
    const double inner_tol = std::clamp(1e-2 * worst2 / (kmin * kmin), 1e-13, 1e-4);
    for (Eigen::Index c = 0; c < p; ++c) {
      const Vec guess = U.col(c) / (es2.eigenvalues()[c] + op.sigma());
      X.col(c) = op.project(pcg(op, U.col(c), guess, inner_tol, 500));
    }
  }

  // Canonical basis inside each degenerate cluster: Gram-Schmidt of the
  // projections of fixed reference vectors, independent of iteration history.
  Mat sorted(dim, p);
  Eigen::VectorXd sorted_lambda(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    sorted.col(i) = V.col(order[i]);
    sorted_lambda[i] = lambda[order[i]];
  }
  const Mat ref = reference_block(dim, p, 0xca11ab1eULL);
  Eigen::Index start = 0;
  while (start < p) {
    Eigen::Index end = start + 1;
    while (end < p && std::abs(sorted_lambda[end] - sorted_lambda[start]) <=
                          1e-8 * std::max(1.0, std::abs(sorted_lambda[start]))) {
      ++end;
    }
    const Eigen::Index m = end - start;
    if (m > 1) {
      const Mat B = sorted.middleCols(start, m);
      Mat C(dim, m);
      for (Eigen::Index j = 0; j < m; ++j) {
        Vec v = B * (B.adjoint() * ref.col(j));
        for (Eigen::Index i = 0; i < j; ++i) v -= C.col(i) * C.col(i).dot(v);
        v /= v.norm();
        C.col(j) = v;
      }
      sorted.middleCols(start, m) = C;
    }
    start = end;
  }

  for (int i = 0; i < k_eigs; ++i) {
    SpinorField mode(lattice, phi.q);
    Vec v = op.project(sorted.col(i));
    v /= v.norm();
    std::copy(v.data(), v.data() + dim, mode.values.begin());
    const Vec Av = op.apply(v);
    const double lam = v.dot(Av).real();
    out.eigenvalues.push_back(lam);
    out.residuals.push_back((Av - lam * v).norm());
    out.modes.push_back(std::move(mode));
    if (std::abs(lam) <= tol_spinor * kmin) ++out.kernel_dim;
  }
  out.subspace = sorted;
  return out;
}

// ---- map flow -------------------------------------------------------------------

double laplacian_spectral_radius(const Lattice& lattice, Scheme scheme) {
  if (!lattice.is_torus()) {
    const double dr = lattice.spacing(0), dth = lattice.spacing(1);
    const double rin = lattice.r_inner() + dr;  // innermost interior ring
    return 4.0 / (dr * dr) + 4.0 / (rin * rin * dth * dth) + 1.0 / (rin * dr);
  }
  if (scheme == Scheme::kCentral) {
    const double h1 = lattice.spacing(0), h2 = lattice.spacing(1);
    return 4.0 / (h1 * h1) + 4.0 / (h2 * h2);
  }
  double total = 0.0;
  for (int axis = 0; axis < 2; ++axis) {
    double kmax = 0.0;
    for (double k : lattice.wavenumbers(axis, 0.0, true)) kmax = std::max(kmax, std::abs(k));
    total += kmax * kmax;
  }
  return total;
}

double stable_dt(const Lattice& lattice, Scheme scheme) { return 2.0 / laplacian_spectral_radius(lattice, scheme); }

namespace {

bool energy_is_exact(const MagneticData& magnetic, const SpinorField* psi) {
  return !psi && !magnetic.omega_mode();
}

}  // namespace

FlowResult flow_map(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                    const MapField& phi, const SpinorField* psi, double dt, const OperatorOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("flow_map: dt must be positive");
  const auto r = el_residual_map(lattice, target, magnetic, phi, psi, opts);
  FlowResult out;
  out.energy_checked = energy_is_exact(magnetic, psi) && !(phi.has_slope() && magnetic.has_primitive());
  if (out.energy_checked) out.energy_before = energy(lattice, target, magnetic, phi, nullptr, opts).total;
  const double dt0 = dt;
  while (true) {
    MapField raw = phi;
    for (std::size_t k = 0; k < raw.values.size(); ++k) raw.values[k] += dt * r.field[k];
    out.phi = project_map(raw, target);
    if (!out.energy_checked) break;
    out.energy_after = energy(lattice, target, magnetic, out.phi, nullptr, opts).total;
    if (out.energy_after <= out.energy_before + 1e-12 * std::max(1.0, std::abs(out.energy_before))) break;
    dt *= 0.5;
    ++out.halvings;
    if (dt < 1e-12 * dt0) throw std::runtime_error("flow_map: step size underflow (energy keeps increasing)");
  }
  out.dt = dt;
  if (psi) {
    out.psi = enforce_tangency(*psi, out.phi, target);
  }
  return out;
}

// ---- coupled solve ----------------------------------------------------------------

nlohmann::json SolveReport::to_json(bool include_wall_time) const {
  nlohmann::json j;
  j["status"] = status;
  j["mode"] = to_string(mode);
  j["iterations"] = iterations;
  j["flow_steps"] = flow_steps;
  j["dt"] = dt;
  j["energy"] = {{"dirichlet", energy.dirichlet},
                 {"spinor", energy.spinor},
                 {"magnetic", energy.magnetic},
                 {"total", energy.total},
                 {"omega_mode", energy.omega_mode}};
  j["map_residual"] = map_residual;
  j["spinor_residual"] = spinor_residual;
  j["map_residual_history"] = map_residual_history;
  j["spinor_residual_history"] = spinor_residual_history;
  j["energy_history"] = energy_history;
  j["eigenvalue_history"] = eigenvalue_history;
  j["kernel_dim"] = kernel_dim;
  j["flags"] = flags;
  if (!message.empty()) j["message"] = message;
  if (include_wall_time) j["wall_time"] = wall_time;
  return j;
}

double spinor_l4_norm(const Lattice& lattice, const SpinorField& psi) {
  std::vector<double> site(lattice.sites());
  const int q = psi.q;
  for_each_index(lattice.sites(), [&](std::size_t s) {
    double a = 0.0;
    for (int c = 0; c < 2 * q; ++c) a += std::norm(psi.at(s)[c]);
    site[s] = lattice.cell_area(s) * a * a;
  });
  return std::pow(pairwise_sum(site), 0.25);
}

namespace {

void scale_spinor(SpinorField& psi, double factor) {
  for (auto& v : psi.values) v *= factor;
}

/// Picks psi in the span of the near-kernel modes: the projection of the
/// current psi if it is non-negligible, else the lowest mode; L4-normalized.
bool refresh_spinor(const Lattice& lattice, const SpinorSpectrum& spec, double threshold, double l4,
                    SpinorField& psi) {
  std::vector<int> near;
  for (std::size_t i = 0; i < spec.eigenvalues.size(); ++i)
    if (std::abs(spec.eigenvalues[i]) <= threshold) near.push_back(static_cast<int>(i));
  if (near.empty()) return false;
  SpinorField next(lattice, psi.q);
  double proj_norm2 = 0.0, cur_norm2 = 0.0;
  for (const auto& v : psi.values) cur_norm2 += std::norm(v);
  if (cur_norm2 > 0.0) {
    for (int i : near) {
      const auto& m = spec.modes[i].values;
      Complex c = 0.0;
      for (std::size_t k = 0; k < m.size(); ++k) c += std::conj(m[k]) * psi.values[k];
      for (std::size_t k = 0; k < m.size(); ++k) next.values[k] += c * m[k];
      proj_norm2 += std::norm(c);
    }
  }
  if (!(proj_norm2 > 1e-16 * cur_norm2) || cur_norm2 == 0.0) next = spec.modes[near.front()];
  const double n4 = spinor_l4_norm(lattice, next);
  scale_spinor(next, l4 / n4);
  psi = std::move(next);
  return true;
}

}  // namespace

SolveResult solve_coupled(const Lattice& lattice, const TargetManifold& target, const MagneticData& magnetic,
                          const MapField& phi0, const SpinorField* psi0, const SolveConfig& config, bool progress) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const OperatorOptions& ops = config.ops;
  const bool use_spinor = config.mode != SolveMode::kMapOnly;
  if (use_spinor && !lattice.is_torus()) {
    throw std::invalid_argument("solve: spinor modes require a torus lattice (use mode map-only)");
  }
  SolveResult res;
  SolveReport& rep = res.report;
  rep.mode = config.mode;
  if (target.kind() == TargetKind::kFlat) rep.flags.push_back("model-limit");
  if (magnetic.omega_mode()) rep.flags.push_back("omega-mode");

  res.phi = project_map(phi0, target);
  res.psi = SpinorField(lattice, target.q());
  if (use_spinor && psi0) res.psi = enforce_tangency(*psi0, res.phi, target);

  const double dt_bound = 0.5 * stable_dt(lattice, ops.scheme);
  const double dt = config.flow_dt > 0.0 ? std::min(config.flow_dt, dt_bound) : dt_bound;
  rep.dt = dt;
  if (config.flow_dt > dt_bound) rep.flags.push_back("dt-clamped");
  const double kmin = lattice.is_torus() ? lattice.min_wavenumber() : 1.0;

  Eigen::MatrixXcd subspace;
  rep.status = "max_outer";
  for (int outer = 1; outer <= config.max_outer; ++outer) {
    rep.iterations = outer;
    if (use_spinor) {
      SpinorSpectrum spec;
      try {
        spec = solve_spinor(lattice, target, res.phi, ops.spin, config.k_eigs, config.tol_spinor,
                            subspace.size() ? &subspace : nullptr, ops.scheme);
      } catch (const std::runtime_error& e) {
        rep.status = "failed";
        rep.message = e.what();
        break;
      }
      subspace = spec.subspace;
      rep.kernel_dim = spec.kernel_dim;
      rep.eigenvalue_history.push_back(spec.eigenvalues);
      if (!refresh_spinor(lattice, spec, config.near_kernel * kmin, config.spinor_norm, res.psi)) {
        rep.status = "no-kernel";
        rep.message = "smallest |lambda| = " + std::to_string(std::abs(spec.eigenvalues.front()));
        break;
      }
    }
    const SpinorField* psi = use_spinor ? &res.psi : nullptr;
    const double rmap = el_residual_map(lattice, target, magnetic, res.phi, psi, ops).norm;
    const double rspin = use_spinor ? el_residual_spinor(lattice, target, res.phi, res.psi, ops).norm : 0.0;
    rep.map_residual_history.push_back(rmap);
    rep.spinor_residual_history.push_back(rspin);
    rep.energy_history.push_back(energy(lattice, target, magnetic, res.phi, psi, ops).total);
    if (progress) {
      std::cerr << "outer " << outer << "  map " << rmap << "  spinor " << rspin << "  energy "
                << rep.energy_history.back() << '\n';
    }
    if (!std::isfinite(rmap) || !std::isfinite(rspin)) {
      rep.status = "failed";
      rep.message = "non-finite residual";
      break;
    }
    const bool map_ok = config.mode == SolveMode::kSpinorOnly || rmap <= config.tol_map;
    const bool spin_ok = !use_spinor || rspin <= config.tol_spinor;
    if (map_ok && spin_ok) {
      rep.status = "converged";
      break;
    }
    if (config.mode == SolveMode::kSpinorOnly) {
      rep.status = "no-kernel";
      rep.message = "spinor residual above tolerance for fixed map";
      break;
    }
    if (outer == config.max_outer) break;
    try {
      for (int step = 0; step < config.refresh_interval; ++step) {
        auto fr = flow_map(lattice, target, magnetic, res.phi, psi, dt, ops);
        res.phi = std::move(fr.phi);
        if (use_spinor) res.psi = std::move(fr.psi);
        ++rep.flow_steps;
      }
    } catch (const std::runtime_error& e) {
      rep.status = "failed";
      rep.message = e.what();
      break;
    }
  }
  rep.map_residual = rep.map_residual_history.empty() ? 0.0 : rep.map_residual_history.back();
  rep.spinor_residual = rep.spinor_residual_history.empty() ? 0.0 : rep.spinor_residual_history.back();
  rep.energy = energy(lattice, target, magnetic, res.phi, use_spinor ? &res.psi : nullptr, ops);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace magdirac
