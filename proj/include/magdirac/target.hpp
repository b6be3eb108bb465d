#pragma once

// Embedded target manifolds N in R^q and the magnetic 3-form data.
//
// Pointwise routines take raw pointers to q-vectors; J matrices are row-major
// q*q with J[i*q + j] = d nu^i / d y^j.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "magdirac/spectral.hpp"

namespace magdirac {

enum class TargetKind { kSphere, kFlat };

class TargetManifold {
 public:
  static constexpr double kOnManifoldTol = 1e-8;
  static constexpr int kMaxAmbient = 8;

  /// Unit sphere S^n in R^{n+1}, 1 <= n < kMaxAmbient.
  static TargetManifold sphere(int n);
  /// Flat R^q, 2 <= q <= kMaxAmbient.
  static TargetManifold flat(int q);

  TargetKind kind() const { return kind_; }
  int q() const { return q_; }
  int n() const { return n_; }
  int codim() const { return q_ - n_; }
  std::string name() const;

  /// Nearest-point projection; throws std::domain_error for y = 0 on spheres.
  void project_point(const double* y, double* out) const;
  /// d/dt project(y + t v) at t = 0 for raw (not necessarily on-N) y.
  void project_derivative(const double* y, const double* v, double* out) const;
  double distance(const double* y) const;
  /// Throws std::domain_error if y is further than kOnManifoldTol from N.
  void require_on_manifold(const double* y, const char* where) const;

  /// out = T(y) v. Valid for v == out.
  void tangent_project(const double* y, const double* v, double* out) const;
  /// Same for q ambient 2-spinors psi[i*2 + a].
  void tangent_project_spinor(const double* y, const Complex* psi, Complex* out) const;
  Eigen::MatrixXd tangent_projector(const double* y) const;

  /// Unit normal nu_l(y), l < codim, extended off N as a function of y.
  void normal(const double* y, int l, double* out) const;
  /// J_l = d nu_l / dy, row-major.
  void normal_derivative(const double* y, int l, double* J) const;

  /// II(X, Y) = sum_l <X, J_l Y> nu_l after projecting X, Y to T_yN.
  void second_fundamental_form(const double* y, const double* X, const double* Y, double* out) const;
  /// P(xi, X) = sum_l <nu_l, xi> T J_l^T X, dual to II: <P(xi,X),Y> = <II(X,Y),xi>.
  void shape_operator(const double* y, const double* xi, const double* X, double* out) const;

 private:
  TargetKind kind_ = TargetKind::kFlat;
  int q_ = 0, n_ = 0;
};

enum class MagneticKind { kNone, kVolumeForm, kHSurface, kCustom };

/// Z^m_ij(y) with <eta, Z(v ^ w)> = Omega(eta, v, w) = sum eta^m Z^m_ij v^i w^j.
/// Tensor layout: Z[(m*q + i)*q + j].
class MagneticData {
 public:
  using TensorFn = std::function<void(const double* y, double* tensor)>;
  using PrimitiveFn = std::function<void(const double* y, double* b)>;  // b[i*q + j] = B_ij

  static MagneticData none(int q);
  /// Omega = lambda * volume form of the target. Zero for 2D targets; requires
  /// a 3D target (flat R^3 or S^3) otherwise.
  static MagneticData volume_form(const TargetManifold& target, double lambda);
  /// Flat R^3 with Omega = 2H dy1^dy2^dy3.
  static MagneticData h_surface(const TargetManifold& target, double H);
  /// Arbitrary tensor, optionally with primitive.
  static MagneticData custom(int q, TensorFn tensor, PrimitiveFn primitive = {});

  MagneticKind kind() const { return kind_; }
  int q() const { return q_; }
  double lambda() const { return lambda_; }
  std::string name() const;
  /// True when Omega is identically zero (none, or a 2D target).
  bool vanishes() const { return !tensor_; }
  bool has_primitive() const { return static_cast<bool>(primitive_); }
  /// Nonzero Omega without a primitive B.
  bool omega_mode() const { return !vanishes() && !has_primitive(); }

  void tensor(const double* y, double* Z) const;
  void primitive(const double* y, double* B) const;
  double omega(const double* y, const double* u, const double* v, const double* w) const;

 private:
  MagneticKind kind_ = MagneticKind::kNone;
  int q_ = 0;
  double lambda_ = 0.0;
  TensorFn tensor_;
  PrimitiveFn primitive_;
};

/// out = Z(v ^ w) at y.
void magnetic_Z(const MagneticData& magnetic, const double* y, const double* v, const double* w, double* out);

/// max over samples and index triples of |Z^k_ij + Z^i_kj| and |Z^m_ij + Z^m_ji|.
/// Samples are concatenated q-vectors.
double check_magnetic_skew(const MagneticData& magnetic, std::span<const double> samples);

}  // namespace magdirac
