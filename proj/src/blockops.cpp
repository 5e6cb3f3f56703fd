#include "sgsadmm/blockops.hpp"

#include <cmath>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

namespace sgsadmm {

namespace {

constexpr double kPsdTolerance = 1e-12;

std::string block_name(Index i) { return "block " + std::to_string(i + 1); }

}  // namespace

BlockPartition::BlockPartition(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw StructuralError("BlockPartition: at least one block is required");
  offsets_.reserve(sizes_.size());
  for (Index s : sizes_) {
    if (s <= 0) throw StructuralError("BlockPartition: block sizes must be positive");
    offsets_.push_back(total_);
    total_ += s;
  }
}

BlockVector::BlockVector(BlockPartition partition, Vector data)
    : partition_(std::move(partition)), data_(std::move(data)) {
  if (data_.size() != partition_.total()) {
    throw StructuralError("BlockVector: data length " + std::to_string(data_.size()) +
                          " does not match partition total " +
                          std::to_string(partition_.total()));
  }
}

BlockVector BlockVector::zeros(const BlockPartition& partition) {
  return BlockVector(partition, Vector::Zero(partition.total()));
}

struct BlockOperator::FactorCache {
  std::mutex mutex;
  std::vector<std::optional<Eigen::LLT<Matrix>>> factors;
};

BlockOperator::BlockOperator(BlockPartition partition, Matrix matrix, Structure structure)
    : partition_(std::move(partition)),
      matrix_(std::move(matrix)),
      structure_(structure),
      cache_(std::make_shared<FactorCache>()) {
  if (matrix_.rows() != matrix_.cols()) {
    throw StructuralError("BlockOperator: matrix is not square (" +
                          std::to_string(matrix_.rows()) + "x" + std::to_string(matrix_.cols()) +
                          ")");
  }
  if (matrix_.rows() != partition_.total()) {
    throw StructuralError("BlockOperator: matrix order " + std::to_string(matrix_.rows()) +
                          " does not match partition total " +
                          std::to_string(partition_.total()));
  }
  scale_ = std::max(1.0, matrix_.cwiseAbs().maxCoeff() * std::sqrt(double(matrix_.rows())));
  if (structure_ != Structure::General) {
    const double asym = (matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale_) {
      throw StructuralError("BlockOperator: matrix declared symmetric has asymmetry " +
                            std::to_string(asym));
    }
    matrix_ = 0.5 * (matrix_ + matrix_.transpose()).eval();
  }
  if (structure_ == Structure::PositiveSemidefinite) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(matrix_, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("BlockOperator: eigenvalue computation failed during PSD check");
    }
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (lmin < -kPsdTolerance * lmax) {
      throw IndefiniteError("BlockOperator: operator declared PSD has eigenvalue " +
                            std::to_string(lmin));
    }
  }
  cache_->factors.resize(static_cast<size_t>(partition_.num_blocks()));
}

Vector BlockOperator::apply(const Vector& v) const {
  if (v.size() != partition_.total()) throw StructuralError("BlockOperator::apply: size mismatch");
  return matrix_ * v;
}

BlockVector BlockOperator::apply(const BlockVector& v) const {
  if (!(v.partition() == partition_)) {
    throw StructuralError("BlockOperator::apply: partition mismatch");
  }
  return BlockVector(partition_, matrix_ * v.data());
}

const Eigen::LLT<Matrix>& BlockOperator::diagonal_factor(Index i) const {
  if (i < 0 || i >= partition_.num_blocks()) {
    throw StructuralError("BlockOperator: block index out of range");
  }
  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto& slot = cache_->factors[static_cast<size_t>(i)];
  if (!slot) {
    Matrix hii = block(i, i);
    Eigen::LLT<Matrix> llt(hii);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      // LLT only checks pivots for positivity; reject numerically singular blocks too.
      const Matrix& l = llt.matrixLLT();
      const double dmax = l.diagonal().cwiseAbs().maxCoeff();
      const double dmin = l.diagonal().cwiseAbs().minCoeff();
      ok = dmin > 1e-10 * std::max(1.0, dmax);
    }
    if (!ok) {
      throw NumericalError("diagonal " + block_name(i) +
                           " is not positive definite (singular H_ii)");
    }
    slot = std::move(llt);
  }
  return *slot;
}

Vector BlockOperator::solve_diagonal(Index i, const Vector& rhs) const {
  return diagonal_factor(i).solve(rhs);
}

void BlockOperator::require_positive_diagonal() const {
  for (Index i = 0; i < partition_.num_blocks(); ++i) diagonal_factor(i);
}

std::pair<BlockOperator, BlockOperator> split_blocks(const BlockOperator& H) {
  if (H.structure() == BlockOperator::Structure::General) {
    throw StructuralError("split_blocks: operator must be self-adjoint");
  }
  const auto& p = H.partition();
  const Index n = p.total();
  Matrix hd = Matrix::Zero(n, n);
  Matrix hu = Matrix::Zero(n, n);
  for (Index i = 0; i < p.num_blocks(); ++i) {
    hd.block(p.offset(i), p.offset(i), p.size(i), p.size(i)) = H.block(i, i);
    for (Index j = i + 1; j < p.num_blocks(); ++j) {
      hu.block(p.offset(i), p.offset(j), p.size(i), p.size(j)) = H.block(i, j);
    }
  }
  return {BlockOperator(p, std::move(hd), H.structure()),
          BlockOperator(p, std::move(hu), BlockOperator::Structure::General)};
}

namespace {

// H_u^* v: block i receives sum_{j<i} H_ji^* v_j = sum_{j<i} H_ij v_j.
Vector apply_upper_adjoint(const BlockOperator& H, const Vector& v) {
  const auto& p = H.partition();
  Vector out = Vector::Zero(p.total());
  for (Index i = 1; i < p.num_blocks(); ++i) {
    out.segment(p.offset(i), p.size(i)) =
        H.matrix().block(p.offset(i), 0, p.size(i), p.offset(i)) * v.head(p.offset(i));
  }
  return out;
}

// H_u v: block i receives sum_{j>i} H_ij v_j.
Vector apply_upper(const BlockOperator& H, const Vector& v) {
  const auto& p = H.partition();
  Vector out = Vector::Zero(p.total());
  for (Index i = 0; i + 1 < p.num_blocks(); ++i) {
    const Index start = p.offset(i + 1);
    out.segment(p.offset(i), p.size(i)) =
        H.matrix().block(p.offset(i), start, p.size(i), p.total() - start) *
        v.tail(p.total() - start);
  }
  return out;
}

Vector apply_diag_inverse(const BlockOperator& H, const Vector& v) {
  const auto& p = H.partition();
  Vector out(p.total());
  for (Index i = 0; i < p.num_blocks(); ++i) {
    out.segment(p.offset(i), p.size(i)) = H.solve_diagonal(i, v.segment(p.offset(i), p.size(i)));
  }
  return out;
}

Vector apply_diag(const BlockOperator& H, const Vector& v) {
  const auto& p = H.partition();
  Vector out(p.total());
  for (Index i = 0; i < p.num_blocks(); ++i) {
    out.segment(p.offset(i), p.size(i)) = H.block(i, i) * v.segment(p.offset(i), p.size(i));
  }
  return out;
}

void check_vector(const BlockOperator& H, const Vector& v, const char* where) {
  if (v.size() != H.partition().total()) {
    throw StructuralError(std::string(where) + ": vector length does not match operator");
  }
}

}  // namespace

Vector sgs_operator_apply(const BlockOperator& H, const Vector& v) {
  check_vector(H, v, "sgs_operator_apply");
  return apply_upper(H, apply_diag_inverse(H, apply_upper_adjoint(H, v)));
}

BlockVector sgs_operator_apply(const BlockOperator& H, const BlockVector& v) {
  if (!(v.partition() == H.partition())) {
    throw StructuralError("sgs_operator_apply: partition mismatch");
  }
  return BlockVector(H.partition(), sgs_operator_apply(H, v.data()));
}

Matrix sgs_operator_matrix(const BlockOperator& H) {
  const Index n = H.partition().total();
  Matrix out(n, n);
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    out.col(j) = sgs_operator_apply(H, e);
    e[j] = 0.0;
  }
  return 0.5 * (out + out.transpose());
}

Vector hat_operator_apply(const BlockOperator& H, const Vector& v) {
  check_vector(H, v, "hat_operator_apply");
  const Vector right = apply_diag(H, v) + apply_upper_adjoint(H, v);
  const Vector mid = apply_diag_inverse(H, right);
  return apply_diag(H, mid) + apply_upper(H, mid);
}

BlockVector hat_operator_apply(const BlockOperator& H, const BlockVector& v) {
  if (!(v.partition() == H.partition())) {
    throw StructuralError("hat_operator_apply: partition mismatch");
  }
  return BlockVector(H.partition(), hat_operator_apply(H, v.data()));
}

Vector upper_block_solve(const BlockOperator& H, const Vector& rhs) {
  check_vector(H, rhs, "upper_block_solve");
  const auto& p = H.partition();
  Vector w = Vector::Zero(p.total());
  for (Index i = p.num_blocks() - 1; i >= 0; --i) {
    Vector r = rhs.segment(p.offset(i), p.size(i));
    if (i + 1 < p.num_blocks()) {
      const Index start = p.offset(i + 1);
      r -= H.matrix().block(p.offset(i), start, p.size(i), p.total() - start) *
           w.tail(p.total() - start);
    }
    w.segment(p.offset(i), p.size(i)) = H.solve_diagonal(i, r);
  }
  return w;
}

Vector lower_block_solve(const BlockOperator& H, const Vector& rhs) {
  check_vector(H, rhs, "lower_block_solve");
  const auto& p = H.partition();
  Vector w = Vector::Zero(p.total());
  for (Index i = 0; i < p.num_blocks(); ++i) {
    Vector r = rhs.segment(p.offset(i), p.size(i));
    if (i > 0) r -= H.matrix().block(p.offset(i), 0, p.size(i), p.offset(i)) * w.head(p.offset(i));
    w.segment(p.offset(i), p.size(i)) = H.solve_diagonal(i, r);
  }
  return w;
}

double hat_inverse_norm(const BlockOperator& H, const Vector& d) {
  const Vector w = upper_block_solve(H, d);
  const double q = w.dot(apply_diag(H, w));
  return std::sqrt(std::max(0.0, q));
}

double weighted_norm(const Vector& v, const Matrix& H) {
  if (H.rows() != v.size() || H.cols() != v.size()) {
    throw StructuralError("weighted_norm: dimension mismatch");
  }
  const double q = v.dot(H * v);
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff() * std::sqrt(double(H.rows())));
  if (q < -kPsdTolerance * v.squaredNorm() * scale) {
    throw IndefiniteError("weighted_norm: <v, Hv> = " + std::to_string(q) +
                          " is negative; H is not positive semidefinite");
  }
  return std::sqrt(std::max(0.0, q));
}

double weighted_norm(const BlockVector& v, const BlockOperator& H) {
  if (!(v.partition() == H.partition())) throw StructuralError("weighted_norm: partition mismatch");
  return weighted_norm(v.data(), H.matrix());
}

}  // namespace sgsadmm
