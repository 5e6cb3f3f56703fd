#include "sgsadmm/proxlib.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "sgsadmm/svec.hpp"

namespace sgsadmm {

namespace {

constexpr double kDomainSlack = 1e-12;

bool near(double a, double b) {
  return std::isfinite(b) && std::abs(a - b) <= kDomainSlack * std::max(1.0, std::abs(b));
}

void check_length(const Vector& v, Index dim, const char* where) {
  if (v.size() != dim) {
    throw StructuralError(std::string(where) + ": expected length " + std::to_string(dim) +
                          ", got " + std::to_string(v.size()));
  }
}

// dist(g, [lo, hi]) for a closed interval that may be unbounded.
double interval_distance(double g, double lo, double hi) {
  if (g < lo) return lo - g;
  if (g > hi) return g - hi;
  return 0.0;
}

double psd_subgradient_distance(const Vector& x, const Vector& g, Index order) {
  const Matrix S = smat(x, order);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Vector& s = eig.eigenvalues();
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if (s.minCoeff() < -1e-9 * scale) return kInfinity;
  const Matrix G = eig.eigenvectors().transpose() * smat(g, order) * eig.eigenvectors();
  std::vector<Index> null_idx;
  for (Index i = 0; i < s.size(); ++i) {
    if (s[i] <= 1e-9 * scale) null_idx.push_back(i);
  }
  double total = G.squaredNorm();
  if (!null_idx.empty()) {
    const auto k = static_cast<Index>(null_idx.size());
    Matrix gkk(k, k);
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) gkk(a, b) = G(null_idx[a], null_idx[b]);
    // The normal-cone element absorbs the PSD part of the null-space block.
    total -= project_psd(gkk).squaredNorm();
  }
  return std::sqrt(std::max(0.0, total));
}

}  // namespace

const char* to_string(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::Zero: return "zero";
    case FunctionKind::IndicatorPsd: return "indicator-psd-cone";
    case FunctionKind::IndicatorBox: return "indicator-box";
    case FunctionKind::IndicatorNonneg: return "indicator-nonneg";
    case FunctionKind::SupportOfBox: return "support-of-box";
  }
  return "unknown";
}

SimpleFunctionSpec SimpleFunctionSpec::zero(Index dim) {
  return SimpleFunctionSpec(FunctionKind::Zero, dim);
}

SimpleFunctionSpec SimpleFunctionSpec::indicator_psd(Index order) {
  SimpleFunctionSpec s(FunctionKind::IndicatorPsd, svec_dim(order));
  s.order_ = order;
  return s;
}

SimpleFunctionSpec SimpleFunctionSpec::indicator_nonneg(Index dim) {
  return SimpleFunctionSpec(FunctionKind::IndicatorNonneg, dim);
}

namespace {
void check_bounds(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw StructuralError("box bounds differ in length");
  for (Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      throw DomainError("box requires L <= U entrywise (violated at index " + std::to_string(i) +
                        ")");
    }
  }
}
}  // namespace

SimpleFunctionSpec SimpleFunctionSpec::indicator_box(Vector lower, Vector upper) {
  check_bounds(lower, upper);
  SimpleFunctionSpec s(FunctionKind::IndicatorBox, lower.size());
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

SimpleFunctionSpec SimpleFunctionSpec::support_of_box(Vector lower, Vector upper) {
  check_bounds(lower, upper);
  SimpleFunctionSpec s(FunctionKind::SupportOfBox, lower.size());
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

double SimpleFunctionSpec::value(const Vector& x) const {
  check_length(x, dim_, "SimpleFunctionSpec::value");
  switch (kind_) {
    case FunctionKind::Zero: return 0.0;
    case FunctionKind::IndicatorNonneg:
      return x.minCoeff() >= -kDomainSlack * std::max(1.0, x.cwiseAbs().maxCoeff()) ? 0.0
                                                                                    : kInfinity;
    case FunctionKind::IndicatorBox:
      for (Index i = 0; i < dim_; ++i) {
        if ((x[i] < lower_[i] && !near(x[i], lower_[i])) ||
            (x[i] > upper_[i] && !near(x[i], upper_[i])))
          return kInfinity;
      }
      return 0.0;
    case FunctionKind::IndicatorPsd: {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(smat(x, order_), Eigen::EigenvaluesOnly);
      const Vector& s = eig.eigenvalues();
      return s.minCoeff() >= -kDomainSlack * std::max(1.0, s.cwiseAbs().maxCoeff()) ? 0.0
                                                                                     : kInfinity;
    }
    case FunctionKind::SupportOfBox: return support_value(*this, x);
  }
  return 0.0;
}

Vector SimpleFunctionSpec::prox(const Vector& y, const Vector& metric) const {
  check_length(y, dim_, "SimpleFunctionSpec::prox");
  check_length(metric, dim_, "SimpleFunctionSpec::prox metric");
  if (dim_ > 0 && metric.minCoeff() <= 0.0) {
    throw DomainError("prox: metric must be positive definite");
  }
  switch (kind_) {
    case FunctionKind::Zero: return y;
    case FunctionKind::IndicatorNonneg: return y.cwiseMax(0.0);
    case FunctionKind::IndicatorBox: return y.cwiseMax(lower_).cwiseMin(upper_);
    case FunctionKind::IndicatorPsd: {
      const double m0 = metric[0];
      if ((metric.array() - m0).abs().maxCoeff() > 1e-12 * m0) {
        throw UnsupportedError("prox of the PSD-cone indicator needs a scalar metric");
      }
      return project_psd_svec(y);
    }
    case FunctionKind::SupportOfBox: {
      // Moreau: prox_{h/m}(y) = y + clamp(-m y, L, U) / m for h(x) = sup_{t in [L,U]} <-x, t>.
      Vector out(dim_);
      for (Index i = 0; i < dim_; ++i) {
        const double t = -metric[i] * y[i];
        if (t >= lower_[i] && t <= upper_[i]) {
          out[i] = 0.0;
        } else {
          const double c = std::clamp(t, lower_[i], upper_[i]);
          out[i] = y[i] + c / metric[i];
        }
      }
      return out;
    }
  }
  return y;
}

Vector SimpleFunctionSpec::project_domain(const Vector& x) const {
  check_length(x, dim_, "SimpleFunctionSpec::project_domain");
  switch (kind_) {
    case FunctionKind::Zero: return x;
    case FunctionKind::IndicatorNonneg: return x.cwiseMax(0.0);
    case FunctionKind::IndicatorBox: return x.cwiseMax(lower_).cwiseMin(upper_);
    case FunctionKind::IndicatorPsd: return project_psd_svec(x);
    case FunctionKind::SupportOfBox: {
      Vector out = x;
      for (Index i = 0; i < dim_; ++i) {
        if (!std::isfinite(upper_[i])) out[i] = std::max(out[i], 0.0);
        if (!std::isfinite(lower_[i])) out[i] = std::min(out[i], 0.0);
      }
      return out;
    }
  }
  return x;
}

double SimpleFunctionSpec::subgradient_distance(const Vector& x, const Vector& g) const {
  check_length(x, dim_, "subgradient_distance");
  check_length(g, dim_, "subgradient_distance");
  double sq = 0.0;
  switch (kind_) {
    case FunctionKind::Zero: return g.norm();
    case FunctionKind::IndicatorPsd: return psd_subgradient_distance(x, g, order_);
    case FunctionKind::IndicatorNonneg:
    case FunctionKind::IndicatorBox:
      for (Index i = 0; i < dim_; ++i) {
        const double lo = kind_ == FunctionKind::IndicatorBox ? lower_[i] : 0.0;
        const double hi = kind_ == FunctionKind::IndicatorBox ? upper_[i] : kInfinity;
        const bool at_lo = x[i] == lo || near(x[i], lo);
        const bool at_hi = x[i] == hi || near(x[i], hi);
        if ((x[i] < lo && !at_lo) || (x[i] > hi && !at_hi)) return kInfinity;
        double r = g[i];
        if (at_lo && at_hi) {
          r = 0.0;
        } else if (at_lo) {
          r = std::min(g[i], 0.0);  // normal cone (-inf, 0]
        } else if (at_hi) {
          r = std::max(g[i], 0.0);  // normal cone [0, inf)
        }
        sq += r * r;
      }
      return std::sqrt(sq);
    case FunctionKind::SupportOfBox:
      // d h(x) = -argmax_{t in [L,U]} <-x, t>, so dist(0, d h(x) + g) = dist(g, argmax set).
      for (Index i = 0; i < dim_; ++i) {
        double r = 0.0;
        if (x[i] == 0.0 || near(x[i], 0.0)) {
          r = interval_distance(g[i], lower_[i], upper_[i]);
        } else if (x[i] < 0.0) {
          if (!std::isfinite(upper_[i])) return kInfinity;
          r = g[i] - upper_[i];
        } else {
          if (!std::isfinite(lower_[i])) return kInfinity;
          r = g[i] - lower_[i];
        }
        sq += r * r;
      }
      return std::sqrt(sq);
  }
  return 0.0;
}

SeparableFunction::SeparableFunction(std::vector<SimpleFunctionSpec> parts)
    : parts_(std::move(parts)) {
  for (const auto& p : parts_) dim_ += p.dim();
}

SeparableFunction SeparableFunction::zero(Index dim) {
  return SeparableFunction({SimpleFunctionSpec::zero(dim)});
}

bool SeparableFunction::is_zero() const {
  return std::all_of(parts_.begin(), parts_.end(), [](const auto& p) { return p.is_zero(); });
}

bool SeparableFunction::needs_scalar_metric() const {
  return std::any_of(parts_.begin(), parts_.end(),
                     [](const auto& p) { return p.kind() == FunctionKind::IndicatorPsd; });
}

double SeparableFunction::value(const Vector& x) const {
  check_length(x, dim_, "SeparableFunction::value");
  double total = 0.0;
  Index off = 0;
  for (const auto& p : parts_) {
    total += p.value(x.segment(off, p.dim()));
    off += p.dim();
  }
  return total;
}

Vector SeparableFunction::prox(const Vector& y, const Vector& metric) const {
  check_length(y, dim_, "SeparableFunction::prox");
  Vector out(dim_);
  Index off = 0;
  for (const auto& p : parts_) {
    out.segment(off, p.dim()) = p.prox(y.segment(off, p.dim()), metric.segment(off, p.dim()));
    off += p.dim();
  }
  return out;
}

Vector SeparableFunction::project_domain(const Vector& x) const {
  check_length(x, dim_, "SeparableFunction::project_domain");
  Vector out(dim_);
  Index off = 0;
  for (const auto& p : parts_) {
    out.segment(off, p.dim()) = p.project_domain(x.segment(off, p.dim()));
    off += p.dim();
  }
  return out;
}

double SeparableFunction::subgradient_distance(const Vector& x, const Vector& g) const {
  check_length(x, dim_, "SeparableFunction::subgradient_distance");
  double sq = 0.0;
  Index off = 0;
  for (const auto& p : parts_) {
    const double d = p.subgradient_distance(x.segment(off, p.dim()), g.segment(off, p.dim()));
    if (!std::isfinite(d)) return kInfinity;
    sq += d * d;
    off += p.dim();
  }
  return std::sqrt(sq);
}

Matrix project_psd(const Matrix& X) {
  if (X.rows() != X.cols()) throw StructuralError("project_psd: matrix is not square");
  const Matrix sym = 0.5 * (X + X.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("project_psd: eigendecomposition failed (|X|_F = " +
                         std::to_string(sym.norm()) + ", max |X_ij| = " +
                         std::to_string(sym.cwiseAbs().maxCoeff()) + ")");
  }
  const Vector& lam = eig.eigenvalues();  // ascending
  const Matrix& V = eig.eigenvectors();
  const Index n = lam.size();
  Index negatives = 0;
  while (negatives < n && lam[negatives] < 0.0) ++negatives;
  if (negatives == 0) return sym;
  if (negatives == n) return Matrix::Zero(n, n);
  // Reconstruct from the smaller of the two spectral pieces.
  if (negatives <= n - negatives) {
    const auto Vn = V.leftCols(negatives);
    Matrix out = sym - Vn * lam.head(negatives).asDiagonal() * Vn.transpose();
    return 0.5 * (out + out.transpose());
  }
  const auto Vp = V.rightCols(n - negatives);
  Matrix out = Vp * lam.tail(n - negatives).asDiagonal() * Vp.transpose();
  return 0.5 * (out + out.transpose());
}

Vector project_psd_svec(const Vector& x) { return svec(project_psd(smat(x))); }

Matrix project_box(const Matrix& X, const Matrix& L, const Matrix& U) {
  if (X.rows() != L.rows() || X.cols() != L.cols() || X.rows() != U.rows() ||
      X.cols() != U.cols()) {
    throw StructuralError("project_box: shape mismatch");
  }
  if ((L.array() > U.array()).any()) throw DomainError("project_box: L <= U violated");
  return X.cwiseMax(L).cwiseMin(U);
}

Vector diagonal_metric(const Matrix& M) {
  if (M.rows() != M.cols()) throw StructuralError("metric is not square");
  Matrix off = M;
  off.diagonal().setZero();
  const double scale = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
  if (off.size() > 0 && off.cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw UnsupportedError("prox with a non-diagonal metric is not supported for this function");
  }
  return M.diagonal();
}

Vector prox_metric(const SimpleFunctionSpec& spec, const Matrix& M, const Vector& y) {
  if (M.rows() != spec.dim() || M.cols() != spec.dim()) {
    throw StructuralError("prox_metric: metric dimension mismatch");
  }
  if (spec.is_zero()) return y;
  return spec.prox(y, diagonal_metric(M));
}

Vector prox_metric(const SeparableFunction& fn, const Matrix& M, const Vector& y) {
  if (M.rows() != fn.dim() || M.cols() != fn.dim()) {
    throw StructuralError("prox_metric: metric dimension mismatch");
  }
  if (fn.is_zero()) return y;
  return fn.prox(y, diagonal_metric(M));
}

double support_value(const Matrix& L, const Matrix& U, const Matrix& Z) {
  if (Z.rows() != L.rows() || Z.cols() != L.cols() || Z.rows() != U.rows() ||
      Z.cols() != U.cols()) {
    throw StructuralError("support_value: shape mismatch");
  }
  const double tol = kDomainSlack * std::max(1.0, Z.cwiseAbs().maxCoeff());
  double total = 0.0;
  for (Index j = 0; j < Z.cols(); ++j) {
    for (Index i = 0; i < Z.rows(); ++i) {
      const double w = -Z(i, j);
      if (w > tol) {
        if (!std::isfinite(U(i, j))) return kInfinity;
        total += w * U(i, j);
      } else if (w < -tol) {
        if (!std::isfinite(L(i, j))) return kInfinity;
        total += w * L(i, j);
      }
    }
  }
  return total;
}

double support_value(const SimpleFunctionSpec& spec, const Vector& z) {
  if (spec.kind() != FunctionKind::SupportOfBox && spec.kind() != FunctionKind::IndicatorBox) {
    throw UnsupportedError("support_value needs a box-type spec");
  }
  check_length(z, spec.dim(), "support_value");
  return support_value(Matrix(spec.lower()), Matrix(spec.upper()), Matrix(z));
}

}  // namespace sgsadmm
