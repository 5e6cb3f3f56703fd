#include "sgsadmm/subsolve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

namespace sgsadmm {

namespace {
// Relative residual tolerance floor for iterative block solves.
constexpr double kPcgFloor = 1e-12;
}  // namespace

Eigenpairs leading_eigenpairs(const Matrix& V, Index count) {
  if (V.rows() != V.cols()) throw StructuralError("leading_eigenpairs: matrix is not square");
  if (count < 0 || count > V.rows()) throw DomainError("leading_eigenpairs: bad count");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (V + V.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("leading_eigenpairs: eigensolver failed");
  const Index n = V.rows();
  Eigenpairs out;
  out.values = eig.eigenvalues().tail(count).reverse();
  out.vectors = eig.eigenvectors().rightCols(count).rowwise().reverse();
  (void)n;
  return out;
}

TruncatedEigProx TruncatedEigProx::build(const Matrix& V, Index l, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("TruncatedEigProx: sigma must be positive");
  if (l < 0 || l + 1 > V.rows()) {
    throw DomainError("TruncatedEigProx: need 0 <= l < n (l = " + std::to_string(l) +
                      ", n = " + std::to_string(V.rows()) + ")");
  }
  TruncatedEigProx t;
  t.V_ = 0.5 * (V + V.transpose());
  t.l_ = l;
  t.sigma_ = sigma;
  Eigenpairs ep = leading_eigenpairs(t.V_, l + 1);
  t.lambdas_ = ep.values;
  t.P_ = ep.vectors.leftCols(l);
  const double scale = std::max(1.0, std::abs(t.lambdas_[0]));
  if (!(t.lambdas_[l] > 1e-14 * scale)) {
    std::ostringstream msg;
    msg << "TruncatedEigProx: lambda_{l+1} = " << t.lambdas_[l]
        << " is not positive; V is singular on the truncated subspace";
    throw NumericalError(msg.str());
  }
  return t;
}

Vector TruncatedEigProx::apply_T(const Vector& x) const {
  // T x = sigma (lambda_{l+1} (I - P P^*) - (V - P Lambda_l P^*)) x
  const Vector px = P_.transpose() * x;
  const Vector lam = lambdas_.head(l_);
  const Vector tail = lambda_tail() * (x - P_ * px) - (V_ * x - P_ * lam.cwiseProduct(px));
  return sigma_ * tail;
}

Matrix TruncatedEigProx::T_matrix() const {
  const Index n = dim();
  const Matrix proj = P_ * P_.transpose();
  const Matrix lead = P_ * lambdas_.head(l_).asDiagonal() * P_.transpose();
  Matrix T = sigma_ * (lambda_tail() * (Matrix::Identity(n, n) - proj) - (V_ - lead));
  return 0.5 * (T + T.transpose());
}

Vector TruncatedEigProx::apply_inverse(const Vector& x) const {
  const double inv_tail = 1.0 / (sigma_ * lambda_tail());
  const Vector px = P_.transpose() * x;
  Vector coef(l_);
  for (Index i = 0; i < l_; ++i) coef[i] = (1.0 / (sigma_ * lambdas_[i]) - inv_tail) * px[i];
  return inv_tail * x + P_ * coef;
}

Vector TruncatedEigProx::apply_regularized(const Vector& x) const {
  return sigma_ * (V_ * x) + apply_T(x);
}

std::pair<Vector, CgStats> pcg_solve(const LinearMap& op, const Vector& rhs,
                                     const LinearMap& precond, double tol, int maxit,
                                     const std::optional<Vector>& x0, bool record_energy) {
  CgStats stats;
  Vector x = x0 ? *x0 : Vector::Zero(rhs.size());
  if (x.size() != rhs.size()) throw StructuralError("pcg_solve: starting point has wrong length");
  const double target = tol * std::max(1.0, rhs.norm());
  Vector r = rhs - op(x);
  double rnorm = r.norm();
  auto energy = [&]() { return -0.5 * x.dot(rhs + r); };
  if (record_energy) stats.energy.push_back(energy());
  if (rnorm <= target) {
    stats.residual = rnorm;
    stats.converged = true;
    return {x, stats};
  }
  Vector z = precond(r);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 0; it < maxit; ++it) {
    const Vector q = op(p);
    const double curvature = p.dot(q);
    if (!(curvature > 0.0)) {
      throw IndefiniteError("pcg_solve: nonpositive curvature <p, op p> = " +
                            std::to_string(curvature) + " at iteration " + std::to_string(it));
    }
    const double step = rz / curvature;
    x += step * p;
    r -= step * q;
    rnorm = r.norm();
    stats.iterations = it + 1;
    if (record_energy) stats.energy.push_back(energy());
    if (rnorm <= target) {
      stats.converged = true;
      break;
    }
    z = precond(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  stats.residual = rnorm;
  return {x, stats};
}

std::vector<Index> dependent_rows(const Matrix& A, double tol) {
  std::vector<Index> dependent;
  Matrix basis(A.cols(), 0);
  for (Index i = 0; i < A.rows(); ++i) {
    Vector v = A.row(i).transpose();
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass) v -= basis * (basis.transpose() * v);
    if (v.norm() <= tol * std::max(1.0, norm0)) {
      dependent.push_back(i);
      continue;
    }
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = v / v.norm();
  }
  return dependent;
}

NormalEquations::NormalEquations(const Matrix& A) : gram_(A * A.transpose()) {
  const auto dep = dependent_rows(A);
  if (!dep.empty()) {
    std::ostringstream msg;
    msg << "constraint matrix is rank deficient; dependent rows:";
    for (Index i : dep) msg << ' ' << i;
    throw StructuralError(msg.str());
  }
  llt_.compute(gram_);
  if (llt_.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization of A A^* failed");
  }
}

Vector NormalEquations::solve(const Vector& rhs) const {
  if (rhs.size() != gram_.rows()) throw StructuralError("NormalEquations::solve: size mismatch");
  return llt_.solve(rhs);
}

Vector solve_normal_equations(const NormalEquations& gram_factor, const Vector& rhs) {
  return gram_factor.solve(rhs);
}

CholeskyBlockSolver::CholeskyBlockSolver(const Matrix& H) : llt_(H) {
  if (llt_.info() != Eigen::Success) throw NumericalError("block is not positive definite");
}

Vector CholeskyBlockSolver::solve(const Vector& rhs, const Vector&, double, CgStats& stats) const {
  stats = CgStats{};
  stats.converged = true;
  return llt_.solve(rhs);
}

Vector TruncatedBlockSolver::solve(const Vector& rhs, const Vector&, double, CgStats& stats) const {
  stats = CgStats{};
  stats.converged = true;
  return prox_.apply_inverse(rhs);
}

PcgBlockSolver::PcgBlockSolver(Matrix H, TruncatedEigProx precond)
    : H_(std::move(H)), precond_(std::move(precond)) {
  if (H_.rows() != precond_.dim()) throw StructuralError("PcgBlockSolver: dimension mismatch");
}

Vector PcgBlockSolver::solve(const Vector& rhs, const Vector& warm, double tol,
                             CgStats& stats) const {
  const double scale = std::max(1.0, rhs.norm());
  const double rel = std::max(tol / scale, kPcgFloor);
  const int maxit = static_cast<int>(10 * H_.rows());
  auto op = [this](const Vector& v) -> Vector { return H_ * v; };
  auto pre = [this](const Vector& v) -> Vector { return precond_.apply_inverse(v); };
  auto [x, st] = pcg_solve(op, rhs, pre, rel, maxit, warm);
  // The recursive residual can drift from the true one; restart once from x.
  const double true_res = (H_ * x - rhs).norm();
  if (true_res > rel * scale) {
    auto [x2, st2] = pcg_solve(op, rhs, pre, rel, maxit, x);
    st.iterations += st2.iterations;
    x = std::move(x2);
  }
  st.residual = (H_ * x - rhs).norm();
  st.converged = st.residual <= rel * scale;
  stats = st;
  return x;
}

}  // namespace sgsadmm
