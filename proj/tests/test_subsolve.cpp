#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "sgsadmm/subsolve.hpp"
#include "test_util.hpp"

using namespace sgsadmm;
using namespace testutil;

namespace {

Matrix dense_of(const TruncatedEigProx& t, bool inverse) {
  const Index n = t.dim();
  Matrix M(n, n);
  for (Index j = 0; j < n; ++j) {
    const Vector e = Vector::Unit(n, j);
    M.col(j) = inverse ? t.apply_inverse(e) : t.apply_regularized(e);
  }
  return M;
}

LinearMap matrix_map(const Matrix& A) {
  return [A](const Vector& v) -> Vector { return A * v; };
}

}  // namespace

TEST_CASE("truncated proximal term on diag(4,2,1) with l = 1") {
  Vector d(3);
  d << 4, 2, 1;
  const Matrix V = d.asDiagonal();
  const TruncatedEigProx t = TruncatedEigProx::build(V, 1, 1.0);
  CHECK(t.rank() == 1);
  CHECK(t.lambda_tail() == doctest::Approx(2.0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(dense_of(t, false));
  CHECK(es.eigenvalues()(0) == doctest::Approx(2.0));
  CHECK(es.eigenvalues()(1) == doctest::Approx(2.0));
  CHECK(es.eigenvalues()(2) == doctest::Approx(4.0));
  const Vector inv0 = t.apply_inverse(Vector::Unit(3, 0));
  const Vector inv2 = t.apply_inverse(Vector::Unit(3, 2));
  CHECK(inv0(0) == doctest::Approx(0.25));
  CHECK(inv2(2) == doctest::Approx(0.5));
  CHECK((t.P().transpose() * t.P() - Matrix::Identity(1, 1)).norm() <= 1e-10);
}

TEST_CASE("nothing truncated when l = n - 1") {
  std::mt19937 rng(21);
  const Matrix V = random_spd(rng, 5);
  const TruncatedEigProx t = TruncatedEigProx::build(V, 4, 2.0);
  CHECK(t.T_matrix().norm() <= 1e-12 * V.norm());
  CHECK(rel_err(dense_of(t, true), (2.0 * V).inverse()) <= 1e-10);
}

TEST_CASE("closed-form inverse is consistent and T is PSD") {
  std::mt19937 rng(22);
  for (Index n : {3, 10, 30, 50}) {
    const Matrix V = random_spd(rng, n);
    for (Index l : {0, 1, 2, 3}) {
      if (l >= n) continue;
      const double sigma = 0.7;
      const TruncatedEigProx t = TruncatedEigProx::build(V, l, sigma);
      const Matrix R = dense_of(t, false);
      CHECK(rel_err(dense_of(t, true), R.inverse()) <= 1e-10);
      for (int p = 0; p < 5; ++p) {
        const Vector x = random_vector(rng, n);
        CHECK((t.apply_regularized(t.apply_inverse(x)) - x).norm() <= 1e-10 * x.norm());
        CHECK(x.dot(t.apply_T(x)) >= -1e-12 * x.squaredNorm() * sigma * V.norm());
        CHECK(x.dot(R * x) >= sigma * t.lambda_tail() * x.squaredNorm() * (1 - 1e-10));
      }
      CHECK(rel_err(R, sigma * V + t.T_matrix()) <= 1e-12);
    }
  }
}

TEST_CASE("truncated proximal term errors") {
  std::mt19937 rng(23);
  const Matrix V = random_spd(rng, 4);
  CHECK_THROWS_AS(TruncatedEigProx::build(V, -1, 1.0), DomainError);
  CHECK_THROWS_AS(TruncatedEigProx::build(V, 4, 1.0), DomainError);
  CHECK_THROWS_AS(TruncatedEigProx::build(V, 1, 0.0), DomainError);
  // lambda_{l+1} = 0.
  CHECK_THROWS_AS(TruncatedEigProx::build(random_psd_rank(rng, 4, 1), 1, 1.0), NumericalError);
}

TEST_CASE("pcg examples") {
  const Vector rhs = Vector::LinSpaced(4, 1, 4);
  const LinearMap id = [](const Vector& v) { return v; };
  auto [x, st] = pcg_solve(id, rhs, id, 1e-12, 10);
  CHECK((x - rhs).norm() <= 1e-14);
  CHECK(st.iterations == 1);
  CHECK(st.converged);

  Vector d(3);
  d << 4, 2, 1;
  const TruncatedEigProx t = TruncatedEigProx::build(Matrix(d.asDiagonal()), 1, 1.0);
  const Matrix A = Matrix(d.asDiagonal()) + t.T_matrix();
  const LinearMap pre = [&](const Vector& v) { return t.apply_inverse(v); };
  auto [y, st2] = pcg_solve(matrix_map(A), Vector::Ones(3), pre, 1e-12, 10);
  CHECK(st2.iterations <= 2);
  CHECK((A * y - Vector::Ones(3)).norm() <= 1e-12);
}

TEST_CASE("pcg on a random SPD system matches a dense solve and has monotone energy") {
  std::mt19937 rng(24);
  const Matrix A = random_spd(rng, 50);
  const Vector b = random_vector(rng, 50);
  const TruncatedEigProx t = TruncatedEigProx::build(A, 5, 1.0);
  const LinearMap pre = [&](const Vector& v) { return t.apply_inverse(v); };
  auto [x, st] = pcg_solve(matrix_map(A), b, pre, 1e-10, 500, std::nullopt, true);
  CHECK(st.converged);
  CHECK((A * x - b).norm() <= 1e-10 * std::max(1.0, b.norm()));
  CHECK((x - A.llt().solve(b)).norm() <= 1e-8 * x.norm());
  // One entry for the starting point, then one per iteration.
  REQUIRE(st.energy.size() == static_cast<size_t>(st.iterations) + 1);
  for (size_t i = 1; i < st.energy.size(); ++i) {
    CHECK(st.energy[i] <= st.energy[i - 1] + 1e-12 * std::abs(st.energy[i - 1]));
  }
}

TEST_CASE("pcg converges in at most l + 2 steps on a clustered trailing spectrum") {
  std::mt19937 rng(25);
  for (Index l : {0, 1, 2, 3}) {
    const Index n = 40;
    const Matrix Q = random_matrix(rng, n, n).householderQr().householderQ();
    Vector lam = Vector::Constant(n, 0.5);
    for (Index i = 0; i < l; ++i) lam[i] = 10.0 + 5.0 * double(i);
    const Matrix V = Q * lam.asDiagonal() * Q.transpose();
    const double sigma = 1.3;
    const TruncatedEigProx t = TruncatedEigProx::build(V, l, sigma);
    const LinearMap pre = [&](const Vector& v) { return t.apply_inverse(v); };
    const Vector r = random_vector(rng, n);
    auto [x, st] = pcg_solve(matrix_map(sigma * V), r, pre, 1e-10, 100);
    CHECK(st.converged);
    CHECK(st.iterations <= l + 2);
  }
}

TEST_CASE("pcg detects indefiniteness and reports non-convergence") {
  Matrix A = Matrix::Identity(2, 2);
  A(1, 1) = -1.0;
  const LinearMap id = [](const Vector& v) { return v; };
  CHECK_THROWS_AS(pcg_solve(matrix_map(A), Vector::Unit(2, 1), id, 1e-12, 10), IndefiniteError);
  std::mt19937 rng(26);
  const Matrix B = random_spd(rng, 20, 1e-3);
  auto [x, st] = pcg_solve(matrix_map(B), random_vector(rng, 20), id, 1e-14, 2);
  CHECK_FALSE(st.converged);
  CHECK(st.iterations == 2);
}

TEST_CASE("normal equations") {
  const Matrix I = Matrix::Identity(3, 3);
  const Vector r = Vector::LinSpaced(3, -1, 1);
  CHECK((solve_normal_equations(NormalEquations(I), r) - r).norm() <= 1e-15);

  // A A^T = [[2,1],[1,1]], inverse [[1,-1],[-1,2]].
  Matrix A(2, 2);
  A << 1, 1, 0, 1;
  Vector rhs(2);
  rhs << 1, 2;
  Vector expect(2);
  expect << -1, 3;
  CHECK((NormalEquations(A).solve(rhs) - expect).norm() <= 1e-12);

  std::mt19937 rng(27);
  const Matrix R = random_matrix(rng, 6, 15);
  const NormalEquations ne(R);
  const Vector b = random_vector(rng, 6);
  CHECK((R * R.transpose() * ne.solve(b) - b).norm() <= 1e-10);
}

TEST_CASE("rank-deficient constraints list the dependent rows") {
  Matrix A(3, 4);
  A << 1, 0, 0, 1,  //
      0, 1, 0, 0,   //
      2, 1, 0, 2;
  const auto dep = dependent_rows(A);
  REQUIRE(dep.size() == 1);
  CHECK(dep[0] == 2);
  try {
    NormalEquations ne(A);
    FAIL("expected StructuralError");
  } catch (const StructuralError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("block solvers") {
  std::mt19937 rng(28);
  const Matrix H = random_spd(rng, 12);
  const Vector b = random_vector(rng, 12);
  CgStats st;
  const CholeskyBlockSolver chol(H);
  CHECK(chol.exact());
  CHECK((H * chol.solve(b, Vector::Zero(12), 0.0, st) - b).norm() <= 1e-12);

  const PcgBlockSolver pcg(H, TruncatedEigProx::build(H, 3, 1.0));
  CHECK_FALSE(pcg.exact());
  const Vector x = pcg.solve(b, Vector::Zero(12), 1e-9, st);
  CHECK((H * x - b).norm() <= 1e-9);
  CHECK(st.converged);
  // Warm start at the solution costs nothing.
  pcg.solve(b, x, 1e-9, st);
  CHECK(st.iterations == 0);

  const TruncatedEigProx t = TruncatedEigProx::build(H, 2, 1.5);
  const TruncatedBlockSolver tb(t);
  CHECK(tb.exact());
  CHECK((t.apply_regularized(tb.solve(b, Vector::Zero(12), 0.0, st)) - b).norm() <= 1e-10);
}
