#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "sgsadmm/errors.hpp"

namespace sgsadmm {

using LinearMap = std::function<Vector(const Vector&)>;

struct CgStats {
  int iterations = 0;
  double residual = 0.0;  // final ||op x - rhs||
  bool converged = false;
  /// Quadratic model 1/2 <x, op x> - <rhs, x> after each iteration; equals
  /// 1/2 ||x - x*||_op^2 up to a constant, so it must not increase.
  std::vector<double> energy;
};

/// Leading eigenpairs of a symmetric PSD matrix, largest first. Dense
/// eigendecomposition; an iterative Lanczos routine can replace this without
/// changing callers.
struct Eigenpairs {
  Vector values;   // descending
  Matrix vectors;  // columns match values
};
Eigenpairs leading_eigenpairs(const Matrix& V, Index count);

/// Proximal term T = sigma * sum_{i>l} (lambda_{l+1} - lambda_i) P_i P_i^* built
/// from the top l+1 eigenpairs of V, together with the closed-form inverse of
/// sigma V + T.
class TruncatedEigProx {
 public:
  static TruncatedEigProx build(const Matrix& V, Index l, double sigma);

  Index rank() const { return l_; }
  double sigma() const { return sigma_; }
  /// lambda_1 >= ... >= lambda_{l+1}.
  const Vector& lambdas() const { return lambdas_; }
  double lambda_tail() const { return lambdas_[l_]; }
  /// n x l orthonormal block of leading eigenvectors.
  const Matrix& P() const { return P_; }
  Index dim() const { return V_.rows(); }

  Vector apply_T(const Vector& x) const;
  Matrix T_matrix() const;
  /// (sigma V + T)^{-1} x = x / (sigma lambda_{l+1}) + sum_{i<=l} ((sigma lambda_i)^{-1} - (sigma lambda_{l+1})^{-1}) P_i <P_i, x>.
  Vector apply_inverse(const Vector& x) const;
  /// (sigma V + T) x.
  Vector apply_regularized(const Vector& x) const;

 private:
  Matrix V_;
  Matrix P_;
  Vector lambdas_;
  Index l_ = 0;
  double sigma_ = 1.0;
};

/// Preconditioned conjugate gradients. Stops once ||op x - rhs|| <= tol *
/// max(1, ||rhs||) or after maxit iterations (converged = false). Throws
/// IndefiniteError when <p, op p> <= 0.
std::pair<Vector, CgStats> pcg_solve(const LinearMap& op, const Vector& rhs,
                                     const LinearMap& precond, double tol, int maxit,
                                     const std::optional<Vector>& x0 = std::nullopt,
                                     bool record_energy = false);

/// Cached Cholesky factor of A A^* for a constraint matrix A (rows are
/// constraints). Construction rejects rank-deficient A and names the
/// dependent rows.
class NormalEquations {
 public:
  explicit NormalEquations(const Matrix& A);

  Index dim() const { return gram_.rows(); }
  const Matrix& gram() const { return gram_; }
  Vector solve(const Vector& rhs) const;

 private:
  Matrix gram_;
  Eigen::LLT<Matrix> llt_;
};

/// Indices of rows of A that are linearly dependent on earlier rows.
std::vector<Index> dependent_rows(const Matrix& A, double tol = 1e-10);

Vector solve_normal_equations(const NormalEquations& gram_factor, const Vector& rhs);

/// Solver for one diagonal block H_ii x = rhs of an sGS sweep.
class BlockSolver {
 public:
  virtual ~BlockSolver() = default;
  /// Returns x with ||H_ii x - rhs|| <= tol when possible; exact solvers
  /// ignore tol. Iteration counts go to stats.
  virtual Vector solve(const Vector& rhs, const Vector& warm, double tol, CgStats& stats) const = 0;
  virtual bool exact() const = 0;
};

class CholeskyBlockSolver final : public BlockSolver {
 public:
  explicit CholeskyBlockSolver(const Matrix& H);
  Vector solve(const Vector& rhs, const Vector& warm, double tol, CgStats& stats) const override;
  bool exact() const override { return true; }

 private:
  Eigen::LLT<Matrix> llt_;
};

/// Exact solve with sigma V + T through the closed-form inverse.
class TruncatedBlockSolver final : public BlockSolver {
 public:
  explicit TruncatedBlockSolver(TruncatedEigProx prox) : prox_(std::move(prox)) {}
  Vector solve(const Vector& rhs, const Vector& warm, double tol, CgStats& stats) const override;
  bool exact() const override { return true; }

 private:
  TruncatedEigProx prox_;
};

/// Warm-started PCG on H_ii with a truncated-eigenvalue preconditioner.
class PcgBlockSolver final : public BlockSolver {
 public:
  PcgBlockSolver(Matrix H, TruncatedEigProx precond);
  Vector solve(const Vector& rhs, const Vector& warm, double tol, CgStats& stats) const override;
  bool exact() const override { return false; }

 private:
  Matrix H_;
  TruncatedEigProx precond_;
};

}  // namespace sgsadmm
