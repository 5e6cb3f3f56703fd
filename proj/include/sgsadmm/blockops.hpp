#pragma once

#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "sgsadmm/errors.hpp"

namespace sgsadmm {

/// Sizes of the factors U_1 x ... x U_s of a product space.
class BlockPartition {
 public:
  BlockPartition() = default;
  explicit BlockPartition(std::vector<Index> sizes);

  Index num_blocks() const { return static_cast<Index>(sizes_.size()); }
  Index size(Index i) const { return sizes_[static_cast<size_t>(i)]; }
  Index offset(Index i) const { return offsets_[static_cast<size_t>(i)]; }
  Index total() const { return total_; }
  const std::vector<Index>& sizes() const { return sizes_; }

  bool operator==(const BlockPartition& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  Index total_ = 0;
};

/// Element of a product space. The data is stored contiguously so that the
/// whole vector can be handed to dense kernels.
class BlockVector {
 public:
  BlockVector() = default;
  BlockVector(BlockPartition partition, Vector data);

  static BlockVector zeros(const BlockPartition& partition);

  const BlockPartition& partition() const { return partition_; }
  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  auto block(Index i) { return data_.segment(partition_.offset(i), partition_.size(i)); }
  auto block(Index i) const { return data_.segment(partition_.offset(i), partition_.size(i)); }

 private:
  BlockPartition partition_;
  Vector data_;
};

/// Linear operator on a product space with access to its blocks H_ij.
///
/// Storage is dense. Symmetric and PSD structure are verified at
/// construction; a declared-PSD operator whose smallest eigenvalue falls
/// below -1e-12 * max(1, |H|) is rejected. Factorizations of the diagonal
/// blocks H_ii are computed on first use and shared between copies.
class BlockOperator {
 public:
  enum class Structure { General, Symmetric, PositiveSemidefinite };

  BlockOperator() = default;
  BlockOperator(BlockPartition partition, Matrix matrix,
                Structure structure = Structure::PositiveSemidefinite);

  const BlockPartition& partition() const { return partition_; }
  const Matrix& matrix() const { return matrix_; }
  Structure structure() const { return structure_; }
  Index num_blocks() const { return partition_.num_blocks(); }

  Vector apply(const Vector& v) const;
  BlockVector apply(const BlockVector& v) const;

  /// H_ij as a map U_j -> U_i.
  auto block(Index i, Index j) const {
    return matrix_.block(partition_.offset(i), partition_.offset(j), partition_.size(i),
                         partition_.size(j));
  }
  /// Rows of block i across all columns.
  auto block_rows(Index i) const {
    return matrix_.middleRows(partition_.offset(i), partition_.size(i));
  }

  /// Cholesky factor of H_ii. Throws NumericalError naming the block when
  /// H_ii is not positive definite.
  const Eigen::LLT<Matrix>& diagonal_factor(Index i) const;

  /// H_ii^{-1} rhs.
  Vector solve_diagonal(Index i, const Vector& rhs) const;

  /// Throws NumericalError if some H_ii is not positive definite.
  void require_positive_diagonal() const;

  double norm_estimate() const { return scale_; }

 private:
  struct FactorCache;

  BlockPartition partition_;
  Matrix matrix_;
  Structure structure_ = Structure::General;
  double scale_ = 1.0;
  std::shared_ptr<FactorCache> cache_;
};

/// H = H_d + H_u + H_u^*, with H_d block diagonal and H_u strictly block upper.
std::pair<BlockOperator, BlockOperator> split_blocks(const BlockOperator& H);

/// sGS(H) v = H_u H_d^{-1} H_u^* v.
BlockVector sgs_operator_apply(const BlockOperator& H, const BlockVector& v);
Vector sgs_operator_apply(const BlockOperator& H, const Vector& v);

/// Dense matrix of sGS(H), assembled column by column from the factored form.
Matrix sgs_operator_matrix(const BlockOperator& H);

/// (H_d + H_u) H_d^{-1} (H_d + H_u^*) v, which equals H v + sGS(H) v.
BlockVector hat_operator_apply(const BlockOperator& H, const BlockVector& v);
Vector hat_operator_apply(const BlockOperator& H, const Vector& v);

/// Solves (H_d + H_u) w = rhs by block back substitution.
Vector upper_block_solve(const BlockOperator& H, const Vector& rhs);

/// Solves (H_d + H_u^*) w = rhs by block forward substitution.
Vector lower_block_solve(const BlockOperator& H, const Vector& rhs);

/// ||Hhat^{-1/2} d|| using Hhat^{-1} = (H_d + H_u^*)^{-1} H_d (H_d + H_u)^{-1}.
double hat_inverse_norm(const BlockOperator& H, const Vector& d);

/// ||v||_H = sqrt(<v, H v>). Roundoff negatives down to -1e-12 |v|^2 |H| are
/// clamped to zero; anything below throws IndefiniteError.
double weighted_norm(const BlockVector& v, const BlockOperator& H);
double weighted_norm(const Vector& v, const Matrix& H);

}  // namespace sgsadmm
