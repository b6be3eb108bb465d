#include "magdirac/target.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace magdirac {

namespace {

double norm(const double* y, int q) {
  double s = 0.0;
  for (int i = 0; i < q; ++i) s += y[i] * y[i];
  return std::sqrt(s);
}

double dot(const double* a, const double* b, int q) {
  double s = 0.0;
  for (int i = 0; i < q; ++i) s += a[i] * b[i];
  return s;
}

// Sign of the permutation (idx[0..k-1]) of distinct integers, 0 if repeated.
int permutation_sign(std::vector<int> idx) {
  int sign = 1;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      if (idx[i] == idx[j]) return 0;
      if (idx[i] > idx[j]) sign = -sign;
    }
  }
  return sign;
}

template <int D>
const std::vector<int>& levi_civita() {
  static const std::vector<int> table = [] {
    std::vector<int> t;
    int total = 1;
    for (int d = 0; d < D; ++d) total *= D;
    t.resize(total);
    for (int code = 0; code < total; ++code) {
      std::vector<int> idx(D);
      int c = code;
      for (int d = D - 1; d >= 0; --d) {
        idx[d] = c % D;
        c /= D;
      }
      t[code] = permutation_sign(idx);
    }
    return t;
  }();
  return table;
}

}  // namespace

TargetManifold TargetManifold::sphere(int n) {
  if (n < 1) throw std::invalid_argument("sphere_target: need n >= 1");
  if (n + 1 > kMaxAmbient) throw std::invalid_argument("sphere_target: ambient dimension too large");
  TargetManifold t;
  t.kind_ = TargetKind::kSphere;
  t.n_ = n;
  t.q_ = n + 1;
  return t;
}

TargetManifold TargetManifold::flat(int q) {
  if (q < 2) throw std::invalid_argument("flat_target: need q >= 2");
  if (q > kMaxAmbient) throw std::invalid_argument("flat_target: ambient dimension too large");
  TargetManifold t;
  t.kind_ = TargetKind::kFlat;
  t.n_ = q;
  t.q_ = q;
  return t;
}

std::string TargetManifold::name() const {
  return kind_ == TargetKind::kSphere ? "S^" + std::to_string(n_) : "R^" + std::to_string(q_);
}

void TargetManifold::project_point(const double* y, double* out) const {
  if (kind_ == TargetKind::kFlat) {
    std::copy(y, y + q_, out);
    return;
  }
  const double r = norm(y, q_);
  if (!(r > 1e-14) || !std::isfinite(r)) throw std::domain_error("project_point: undefined at the origin");
  for (int i = 0; i < q_; ++i) out[i] = y[i] / r;
}

void TargetManifold::project_derivative(const double* y, const double* v, double* out) const {
  if (kind_ == TargetKind::kFlat) {
    std::copy(v, v + q_, out);
    return;
  }
  const double r = norm(y, q_);
  if (!(r > 1e-14)) throw std::domain_error("project_derivative: undefined at the origin");
  const double c = dot(y, v, q_) / (r * r);
  for (int i = 0; i < q_; ++i) out[i] = (v[i] - c * y[i]) / r;
}

double TargetManifold::distance(const double* y) const {
  if (kind_ == TargetKind::kFlat) return 0.0;
  return std::abs(norm(y, q_) - 1.0);
}

void TargetManifold::require_on_manifold(const double* y, const char* where) const {
  const double d = distance(y);
  if (!(d <= kOnManifoldTol)) {
    throw std::domain_error(std::string(where) + ": point is off the target manifold (distance " +
                            std::to_string(d) + ")");
  }
}

void TargetManifold::tangent_project(const double* y, const double* v, double* out) const {
  if (kind_ == TargetKind::kFlat) {
    if (out != v) std::copy(v, v + q_, out);
    return;
  }
  const double r2 = dot(y, y, q_);
  const double c = dot(y, v, q_) / r2;
  for (int i = 0; i < q_; ++i) out[i] = v[i] - c * y[i];
}

void TargetManifold::tangent_project_spinor(const double* y, const Complex* psi, Complex* out) const {
  if (kind_ == TargetKind::kFlat) {
    if (out != psi) std::copy(psi, psi + 2 * q_, out);
    return;
  }
  const double r2 = dot(y, y, q_);
  Complex c0 = 0.0, c1 = 0.0;
  for (int i = 0; i < q_; ++i) {
    c0 += y[i] * psi[2 * i];
    c1 += y[i] * psi[2 * i + 1];
  }
  c0 /= r2;
  c1 /= r2;
  for (int i = 0; i < q_; ++i) {
    out[2 * i] = psi[2 * i] - c0 * y[i];
    out[2 * i + 1] = psi[2 * i + 1] - c1 * y[i];
  }
}

Eigen::MatrixXd TargetManifold::tangent_projector(const double* y) const {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(q_, q_);
  if (kind_ == TargetKind::kSphere) {
    Eigen::Map<const Eigen::VectorXd> yv(y, q_);
    P -= yv * yv.transpose() / yv.squaredNorm();
  }
  return P;
}

void TargetManifold::normal(const double* y, int l, double* out) const {
  if (l < 0 || l >= codim()) throw std::out_of_range("normal: index out of range");
  const double r = norm(y, q_);
  for (int i = 0; i < q_; ++i) out[i] = y[i] / r;
}

void TargetManifold::normal_derivative(const double* y, int l, double* J) const {
  if (l < 0 || l >= codim()) throw std::out_of_range("normal_derivative: index out of range");
  const double r = norm(y, q_);
  for (int i = 0; i < q_; ++i) {
    for (int j = 0; j < q_; ++j) {
      J[i * q_ + j] = ((i == j ? 1.0 : 0.0) - y[i] * y[j] / (r * r)) / r;
    }
  }
}

void TargetManifold::second_fundamental_form(const double* y, const double* X, const double* Y,
                                             double* out) const {
  require_on_manifold(y, "second_fundamental_form");
  std::fill(out, out + q_, 0.0);
  if (kind_ == TargetKind::kFlat) return;
  std::vector<double> x(q_), yy(q_), J(q_ * q_), nu(q_), JY(q_);
  tangent_project(y, X, x.data());
  tangent_project(y, Y, yy.data());
  for (int l = 0; l < codim(); ++l) {
    normal(y, l, nu.data());
    normal_derivative(y, l, J.data());
    for (int i = 0; i < q_; ++i) JY[i] = dot(&J[i * q_], yy.data(), q_);
    const double c = dot(x.data(), JY.data(), q_);
    for (int i = 0; i < q_; ++i) out[i] += c * nu[i];
  }
}

void TargetManifold::shape_operator(const double* y, const double* xi, const double* X, double* out) const {
  require_on_manifold(y, "shape_operator");
  std::fill(out, out + q_, 0.0);
  if (kind_ == TargetKind::kFlat) return;
  std::vector<double> J(q_ * q_), nu(q_), JtX(q_);
  for (int l = 0; l < codim(); ++l) {
    normal(y, l, nu.data());
    normal_derivative(y, l, J.data());
    const double c = dot(nu.data(), xi, q_);
    for (int j = 0; j < q_; ++j) {
      double s = 0.0;
      for (int i = 0; i < q_; ++i) s += J[i * q_ + j] * X[i];
      JtX[j] = s;
    }
    tangent_project(y, JtX.data(), JtX.data());
    for (int i = 0; i < q_; ++i) out[i] += c * JtX[i];
  }
}

// ---- magnetic data -----------------------------------------------------------

MagneticData MagneticData::none(int q) {
  MagneticData m;
  m.q_ = q;
  return m;
}

MagneticData MagneticData::volume_form(const TargetManifold& target, double lambda) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("volume-form: lambda must be finite");
  MagneticData m;
  m.kind_ = MagneticKind::kVolumeForm;
  m.q_ = target.q();
  m.lambda_ = lambda;
  if (target.n() <= 2 || lambda == 0.0) return m;  // a 3-form on a surface is zero
  if (target.n() != 3) throw std::invalid_argument("volume-form: only 3-dimensional targets are supported");
  if (target.kind() == TargetKind::kFlat) {
    m.tensor_ = [lambda](const double*, double* Z) {
      const auto& eps = levi_civita<3>();
      for (int c = 0; c < 27; ++c) Z[c] = lambda * eps[c];
    };
    m.primitive_ = [lambda](const double* y, double* B) {
      const auto& eps = levi_civita<3>();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double s = 0.0;
          for (int k = 0; k < 3; ++k) s += eps[(i * 3 + j) * 3 + k] * y[k];
          B[i * 3 + j] = lambda / 3.0 * s;
        }
    };
  } else {
    // Omega(u, v, w) = lambda det(y, u, v, w) on S^3.
    m.tensor_ = [lambda](const double* y, double* Z) {
      const auto& eps = levi_civita<4>();
      for (int c = 0; c < 64; ++c) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += eps[k * 64 + c] * y[k];
        Z[c] = lambda * s;
      }
    };
  }
  return m;
}

MagneticData MagneticData::h_surface(const TargetManifold& target, double H) {
  if (target.kind() != TargetKind::kFlat || target.q() != 3) {
    throw std::invalid_argument("h-surface: requires the flat target R^3");
  }
  MagneticData m = volume_form(target, 2.0 * H);
  m.kind_ = MagneticKind::kHSurface;
  return m;
}

MagneticData MagneticData::custom(int q, TensorFn tensor, PrimitiveFn primitive) {
  if (q < 2 || q > TargetManifold::kMaxAmbient) throw std::invalid_argument("custom magnetic data: bad ambient dimension");
  MagneticData m;
  m.kind_ = MagneticKind::kCustom;
  m.q_ = q;
  m.tensor_ = std::move(tensor);
  m.primitive_ = std::move(primitive);
  return m;
}

std::string MagneticData::name() const {
  switch (kind_) {
    case MagneticKind::kNone: return "none";
    case MagneticKind::kVolumeForm: return "volume-form";
    case MagneticKind::kHSurface: return "h-surface";
    case MagneticKind::kCustom: return "custom";
  }
  return "unknown";
}

void MagneticData::tensor(const double* y, double* Z) const {
  if (!tensor_) {
    std::fill(Z, Z + q_ * q_ * q_, 0.0);
    return;
  }
  tensor_(y, Z);
}

void MagneticData::primitive(const double* y, double* B) const {
  if (!primitive_) {
    std::fill(B, B + q_ * q_, 0.0);
    return;
  }
  primitive_(y, B);
}

double MagneticData::omega(const double* y, const double* u, const double* v, const double* w) const {
  std::vector<double> z(q_);
  magnetic_Z(*this, y, v, w, z.data());
  return dot(u, z.data(), q_);
}

void magnetic_Z(const MagneticData& magnetic, const double* y, const double* v, const double* w, double* out) {
  const int q = magnetic.q();
  std::fill(out, out + q, 0.0);
  if (magnetic.vanishes()) return;
  constexpr int kMax = TargetManifold::kMaxAmbient;
  double Z[kMax * kMax * kMax];
  magnetic.tensor(y, Z);
  for (int m = 0; m < q; ++m) {
    double s = 0.0;
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) s += Z[(m * q + i) * q + j] * v[i] * w[j];
    out[m] = s;
  }
}

double check_magnetic_skew(const MagneticData& magnetic, std::span<const double> samples) {
  const int q = magnetic.q();
  if (samples.empty() || samples.size() % q != 0) throw std::invalid_argument("check_magnetic_skew: need >= 1 sample point");
  std::vector<double> Z(q * q * q);
  double worst = 0.0;
  for (std::size_t p = 0; p < samples.size() / q; ++p) {
    magnetic.tensor(&samples[p * q], Z.data());
    auto z = [&](int m, int i, int j) { return Z[(m * q + i) * q + j]; };
    for (int k = 0; k < q; ++k)
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
          worst = std::max(worst, std::abs(z(k, i, j) + z(i, k, j)));
          worst = std::max(worst, std::abs(z(k, i, j) + z(k, j, i)));
        }
  }
  return worst;
}

}  // namespace magdirac
