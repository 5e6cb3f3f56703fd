#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "sgsadmm/blockops.hpp"
#include "sgsadmm/svec.hpp"
#include "test_util.hpp"

using namespace sgsadmm;
using namespace testutil;

namespace {

BlockOperator two_by_two() {
  Matrix H(2, 2);
  H << 2, 1, 1, 2;
  return BlockOperator(BlockPartition({1, 1}), H);
}

BlockOperator random_block_operator(std::mt19937& rng, Index blocks, Index max_size) {
  BlockPartition p(random_sizes(rng, blocks, max_size));
  return BlockOperator(p, random_spd(rng, p.total()));
}

}  // namespace

TEST_CASE("partition and block vector invariants") {
  BlockPartition p({2, 3, 1});
  CHECK(p.total() == 6);
  CHECK(p.offset(2) == 5);
  CHECK_THROWS_AS(BlockPartition(std::vector<Index>{}), StructuralError);
  CHECK_THROWS_AS(BlockPartition({2, 0}), StructuralError);
  CHECK_THROWS_AS(BlockVector(p, Vector::Zero(5)), StructuralError);
  BlockVector v(p, Vector::LinSpaced(6, 0, 5));
  CHECK(v.block(1)(0) == 2.0);
}

TEST_CASE("split_blocks on the two-by-two example") {
  auto [Hd, Hu] = split_blocks(two_by_two());
  Matrix d(2, 2), u(2, 2);
  d << 2, 0, 0, 2;
  u << 0, 1, 0, 0;
  CHECK(Hd.matrix() == d);
  CHECK(Hu.matrix() == u);
}

TEST_CASE("split_blocks of a block-diagonal operator has zero upper part") {
  Matrix H = Matrix::Zero(3, 3);
  H(0, 0) = 1;
  H.block(1, 1, 2, 2) << 3, 1, 1, 3;
  auto parts = split_blocks(BlockOperator(BlockPartition({1, 2}), H));
  CHECK(parts.second.matrix().norm() == 0.0);
}

TEST_CASE("split_blocks reassembles a random three-block operator") {
  std::mt19937 rng(1);
  const BlockOperator H = random_block_operator(rng, 3, 4);
  auto [Hd, Hu] = split_blocks(H);
  const Matrix back = Hd.matrix() + Hu.matrix() + Hu.matrix().transpose();
  CHECK((back - H.matrix()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("split_blocks errors") {
  CHECK_THROWS_AS(BlockOperator(BlockPartition({1, 1}), Matrix::Identity(3, 3)), StructuralError);
  CHECK_THROWS_AS(BlockOperator(BlockPartition({2}), Matrix::Zero(2, 3)), StructuralError);
  Matrix A(2, 2);
  A << 1, 2, 0, 1;
  const BlockOperator general(BlockPartition({1, 1}), A, BlockOperator::Structure::General);
  CHECK_THROWS_AS(split_blocks(general), StructuralError);
  // Declared self-adjoint but not.
  CHECK_THROWS_AS(BlockOperator(BlockPartition({1, 1}), A, BlockOperator::Structure::Symmetric),
                  StructuralError);
}

TEST_CASE("declared PSD operators must be PSD") {
  Matrix A(2, 2);
  A << 1, 0, 0, -1;
  CHECK_THROWS_AS(BlockOperator(BlockPartition({2}), A), IndefiniteError);
  CHECK_NOTHROW(BlockOperator(BlockPartition({2}), A, BlockOperator::Structure::Symmetric));
}

TEST_CASE("sgs operator on the two-by-two example") {
  const BlockOperator H = two_by_two();
  const Vector r = sgs_operator_apply(H, Vector(Vector::Unit(2, 0)));
  CHECK(r(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r(1) == 0.0);
  Matrix expect(2, 2);
  expect << 0.5, 0, 0, 0;
  CHECK((sgs_operator_matrix(H) - expect).norm() <= 1e-15);
}

TEST_CASE("sgs operator of a block-diagonal operator vanishes") {
  std::mt19937 rng(2);
  Matrix H = Matrix::Zero(5, 5);
  H.block(0, 0, 2, 2) = random_spd(rng, 2);
  H.block(2, 2, 3, 3) = random_spd(rng, 3);
  const BlockOperator op(BlockPartition({2, 3}), H);
  CHECK(sgs_operator_apply(op, random_vector(rng, 5)).norm() == 0.0);
  CHECK((hat_operator_apply(op, Vector(Vector::Ones(5))) - H * Vector::Ones(5)).norm() <= 1e-14);
}

TEST_CASE("sgs operator matches a dense product on random operators") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const BlockOperator H = random_block_operator(rng, 3, 4);
    auto [Hd, Hu] = split_blocks(H);
    const Vector v = random_vector(rng, H.partition().total());
    const Vector dense = Hu.matrix() * Hd.matrix().inverse() * Hu.matrix().transpose() * v;
    CHECK((sgs_operator_apply(H, v) - dense).norm() <= 1e-12 * std::max(1.0, dense.norm()));
    const BlockVector bv(H.partition(), v);
    CHECK((sgs_operator_apply(H, bv).data() - dense).norm() <= 1e-12 * std::max(1.0, dense.norm()));
  }
}

TEST_CASE("singular diagonal block is reported by index") {
  Matrix H = Matrix::Identity(3, 3);
  H(2, 2) = 0.0;
  const BlockOperator op(BlockPartition({2, 1}), H);
  try {
    sgs_operator_apply(op, Vector(Vector::Ones(3)));
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("block 2") != std::string::npos);
  }
  CHECK_THROWS_AS(hat_operator_apply(op, Vector(Vector::Ones(3))), NumericalError);
  CHECK_THROWS_AS(op.require_positive_diagonal(), NumericalError);
}

TEST_CASE("hat operator on the two-by-two example") {
  const BlockOperator H = two_by_two();
  Matrix hat(2, 2);
  for (Index j = 0; j < 2; ++j) hat.col(j) = hat_operator_apply(H, Vector(Vector::Unit(2, j)));
  Matrix expect(2, 2);
  expect << 2.5, 1, 1, 2;
  CHECK((hat - expect).norm() <= 1e-14);
}

TEST_CASE("factored and additive hat forms agree on a random four-block operator") {
  std::mt19937 rng(4);
  const BlockOperator H = random_block_operator(rng, 4, 3);
  auto [Hd, Hu] = split_blocks(H);
  const Matrix DU = Hd.matrix() + Hu.matrix();
  const Matrix factored = DU * Hd.matrix().inverse() * DU.transpose();
  for (int k = 0; k < 10; ++k) {
    const Vector v = random_vector(rng, H.partition().total());
    const Vector a = hat_operator_apply(H, v);
    CHECK((a - factored * v).norm() <= 1e-12 * std::max(1.0, a.norm()));
    CHECK((a - H.matrix() * v - sgs_operator_apply(H, v)).norm() <= 1e-12 * std::max(1.0, a.norm()));
  }
}

TEST_CASE("sgs and hat operators are self-adjoint, PSD and PD respectively") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const BlockOperator H = random_block_operator(rng, 1 + trial % 4, 4);
    const Index n = H.partition().total();
    double min_rq = 1e300;
    for (int probe = 0; probe < 100; ++probe) {
      const Vector u = random_vector(rng, n);
      const Vector v = random_vector(rng, n);
      const double bound = 1e-12 * u.norm() * v.norm() * std::max(1.0, H.matrix().norm());
      CHECK(std::abs(sgs_operator_apply(H, u).dot(v) - u.dot(sgs_operator_apply(H, v))) <= bound);
      CHECK(std::abs(hat_operator_apply(H, u).dot(v) - u.dot(hat_operator_apply(H, v))) <= bound);
      CHECK(v.dot(sgs_operator_apply(H, v)) >= -1e-12 * v.squaredNorm());
      min_rq = std::min(min_rq, v.dot(hat_operator_apply(H, v)) / v.squaredNorm());
    }
    CHECK(min_rq > 0.0);
  }
}

TEST_CASE("block triangular solves invert D + U and D + U^T") {
  std::mt19937 rng(6);
  const BlockOperator H = random_block_operator(rng, 3, 3);
  auto [Hd, Hu] = split_blocks(H);
  const Vector r = random_vector(rng, H.partition().total());
  const Vector x = upper_block_solve(H, r);
  CHECK(((Hd.matrix() + Hu.matrix()) * x - r).norm() <= 1e-12);
  const Vector y = lower_block_solve(H, r);
  CHECK(((Hd.matrix() + Hu.matrix().transpose()) * y - r).norm() <= 1e-12);
  const Matrix hat = H.matrix() + sgs_operator_matrix(H);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(hat.inverse());
  const Matrix isqrt = es.operatorSqrt();
  CHECK(hat_inverse_norm(H, r) == doctest::Approx((isqrt * r).norm()).epsilon(1e-10));
}

TEST_CASE("weighted norm") {
  const BlockPartition p({2});
  const Vector v = Vector::Ones(2);
  CHECK(weighted_norm(BlockVector(p, v), BlockOperator(p, Matrix::Identity(2, 2))) ==
        doctest::Approx(std::sqrt(2.0)));
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 4;
  D(1, 1) = 9;
  CHECK(weighted_norm(BlockVector(p, v), BlockOperator(p, D)) == doctest::Approx(std::sqrt(13.0)));
  CHECK(weighted_norm(BlockVector::zeros(p), BlockOperator(p, D)) == 0.0);
  Matrix ind = Matrix::Zero(2, 2);
  ind(0, 0) = 1;
  ind(1, 1) = -1;
  CHECK_THROWS_AS(weighted_norm(Vector(Vector::Unit(2, 1)), ind), IndefiniteError);
  // Roundoff-level negatives clamp to zero.
  Matrix tiny = Matrix::Zero(2, 2);
  tiny(0, 0) = -1e-15;
  CHECK(weighted_norm(Vector(Vector::Unit(2, 0)), tiny) == 0.0);
}

TEST_CASE("svec is an isometry and smat inverts it") {
  std::mt19937 rng(7);
  for (Index n = 1; n <= 6; ++n) {
    const Matrix X = random_symmetric(rng, n);
    const Matrix Y = random_symmetric(rng, n);
    CHECK(svec(X).size() == svec_dim(n));
    CHECK(svec(X).dot(svec(Y)) == doctest::Approx((X * Y).trace()).epsilon(1e-12));
    CHECK((smat(svec(X), n) - X).norm() <= 1e-14);
    CHECK(svec_order(svec_dim(n)) == n);
    for (Index k = 0; k < svec_dim(n); ++k) {
      auto [i, j] = svec_entry(k, n);
      CHECK(svec_index(i, j, n) == k);
    }
  }
  CHECK_THROWS_AS(svec_order(4), StructuralError);
  CHECK_THROWS_AS(svec(Matrix::Zero(2, 3)), StructuralError);
  CHECK_THROWS_AS(smat(Vector::Zero(5)), StructuralError);
}
