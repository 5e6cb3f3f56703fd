#pragma once

#include <limits>
#include <vector>

#include "sgsadmm/errors.hpp"

namespace sgsadmm {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class FunctionKind {
  Zero,
  IndicatorPsd,     // delta of the PSD cone, acting on svec coordinates
  IndicatorBox,     // delta of {L <= x <= U}
  IndicatorNonneg,  // delta of {x >= 0}
  SupportOfBox,     // x -> delta_N^*(-x) = sup_{L <= t <= U} <-x, t>
};

const char* to_string(FunctionKind kind);

/// Closed proper convex function with a closed-form proximal mapping under a
/// scalar or diagonal metric.
class SimpleFunctionSpec {
 public:
  static SimpleFunctionSpec zero(Index dim);
  /// PSD-cone indicator on svec coordinates of order-n symmetric matrices.
  static SimpleFunctionSpec indicator_psd(Index order);
  static SimpleFunctionSpec indicator_box(Vector lower, Vector upper);
  static SimpleFunctionSpec indicator_nonneg(Index dim);
  /// delta_N^*(-x) for the box N = {L <= t <= U}; bounds may be infinite.
  static SimpleFunctionSpec support_of_box(Vector lower, Vector upper);

  FunctionKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  Index order() const { return order_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  bool is_zero() const { return kind_ == FunctionKind::Zero; }

  /// Function value; +infinity outside the domain (with a 1e-12 relative slack).
  double value(const Vector& x) const;

  /// argmin_v { theta(v) + 1/2 ||v - y||_M^2 } for M = Diag(metric). The PSD
  /// kind requires a scalar metric.
  Vector prox(const Vector& y, const Vector& metric) const;

  /// Nearest point of the effective domain (Euclidean).
  Vector project_domain(const Vector& x) const;

  /// dist(0, d theta(x) + g); +infinity when x is outside the domain.
  double subgradient_distance(const Vector& x, const Vector& g) const;

 private:
  SimpleFunctionSpec(FunctionKind kind, Index dim) : kind_(kind), dim_(dim) {}

  FunctionKind kind_ = FunctionKind::Zero;
  Index dim_ = 0;
  Index order_ = 0;
  Vector lower_;
  Vector upper_;
};

/// Direct sum of simple functions acting on consecutive segments of a block.
class SeparableFunction {
 public:
  SeparableFunction() = default;
  explicit SeparableFunction(std::vector<SimpleFunctionSpec> parts);
  static SeparableFunction zero(Index dim);

  Index dim() const { return dim_; }
  bool is_zero() const;
  const std::vector<SimpleFunctionSpec>& parts() const { return parts_; }
  /// True if some part needs a scalar (not just diagonal) metric.
  bool needs_scalar_metric() const;

  double value(const Vector& x) const;
  Vector prox(const Vector& y, const Vector& metric) const;
  Vector project_domain(const Vector& x) const;
  double subgradient_distance(const Vector& x, const Vector& g) const;

 private:
  std::vector<SimpleFunctionSpec> parts_;
  Index dim_ = 0;
};

/// Projection onto the PSD cone via a symmetric eigendecomposition of
/// (X + X^T) / 2.
Matrix project_psd(const Matrix& X);

/// svec-coordinate version of project_psd.
Vector project_psd_svec(const Vector& x);

/// Entrywise clamp min(max(X, L), U).
Matrix project_box(const Matrix& X, const Matrix& L, const Matrix& U);

/// Proximal mapping of spec under the metric M restricted to one block. M
/// must be diagonal unless spec is zero, and scalar for the PSD kind.
Vector prox_metric(const SimpleFunctionSpec& spec, const Matrix& M, const Vector& y);
Vector prox_metric(const SeparableFunction& fn, const Matrix& M, const Vector& y);

/// delta_N^*(-Z) = sum_ij max(-Z_ij U_ij, -Z_ij L_ij) for N = {L <= X <= U};
/// +infinity when the supremum is unbounded.
double support_value(const Matrix& L, const Matrix& U, const Matrix& Z);

/// delta_N^*(-z) for a SupportOfBox or box-type spec in vector coordinates.
double support_value(const SimpleFunctionSpec& spec, const Vector& z);

/// Extracts the diagonal of M after checking that M is diagonal; throws
/// UnsupportedError otherwise.
Vector diagonal_metric(const Matrix& M);

}  // namespace sgsadmm
