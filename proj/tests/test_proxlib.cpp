#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "sgsadmm/proxlib.hpp"
#include "sgsadmm/svec.hpp"
#include "test_util.hpp"

using namespace sgsadmm;
using namespace testutil;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix M(2, 2);
  M << a, b, c, d;
  return M;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("project_psd examples") {
  std::mt19937 rng(11);
  const Matrix P = random_psd_rank(rng, 4, 3);
  CHECK((project_psd(P) - P).norm() <= 1e-12 * std::max(1.0, P.norm()));
  CHECK((project_psd(mat2(0, 1, 1, 0)) - mat2(0.5, 0.5, 0.5, 0.5)).norm() <= 1e-15);
  CHECK(project_psd(-Matrix::Identity(3, 3)).norm() == 0.0);
  CHECK_THROWS_AS(project_psd(Matrix::Zero(2, 3)), StructuralError);
}

TEST_CASE("project_psd symmetrizes, is idempotent and has PSD output") {
  std::mt19937 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Matrix X = random_matrix(rng, 5, 5);
    const Matrix P = project_psd(X);
    CHECK((P - P.transpose()).norm() == 0.0);
    CHECK((project_psd(P) - P).norm() <= 1e-12 * std::max(1.0, P.norm()));
    Eigen::SelfAdjointEigenSolver<Matrix> es(P);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, P.norm()));
    // Moreau: X_sym = P - P_minus with <P, P_minus> = 0.
    const Matrix S = 0.5 * (X + X.transpose());
    const Matrix N = P - S;
    CHECK(std::abs((P * N).trace()) <= 1e-12 * std::max(1.0, S.squaredNorm()));
  }
  const Vector x = svec(mat2(0, 1, 1, 0));
  CHECK((project_psd_svec(x) - svec(mat2(0.5, 0.5, 0.5, 0.5))).norm() <= 1e-15);
}

TEST_CASE("project_box examples") {
  const Matrix X = mat2(2, -1, -1, 0.5);
  const Matrix inf = Matrix::Constant(2, 2, kInfinity);
  CHECK(project_box(X, Matrix::Zero(2, 2), inf) == mat2(2, 0, 0, 0.5));
  CHECK(project_box(X, Matrix::Constant(2, 2, -5), Matrix::Constant(2, 2, 5)) == X);
  CHECK(project_box(X, Matrix::Zero(2, 2), Matrix::Ones(2, 2)) == mat2(1, 0, 0, 0.5));
  CHECK_THROWS_AS(project_box(X, Matrix::Zero(3, 3), Matrix::Ones(2, 2)), StructuralError);
  CHECK_THROWS_AS(project_box(X, Matrix::Ones(2, 2), Matrix::Zero(2, 2)), DomainError);
}

TEST_CASE("prox_metric examples") {
  CHECK(prox_metric(SimpleFunctionSpec::zero(2), Matrix::Identity(2, 2), vec2(3, -4)) == vec2(3, -4));
  CHECK(prox_metric(SimpleFunctionSpec::indicator_nonneg(2), 2.0 * Matrix::Identity(2, 2),
                    vec2(-1, 3)) == vec2(0, 3));
  Matrix M = Matrix::Zero(2, 2);
  M(0, 0) = 1;
  M(1, 1) = 5;
  CHECK(prox_metric(SimpleFunctionSpec::indicator_box(Vector::Zero(2), Vector::Ones(2)), M,
                    vec2(2, -0.2)) == vec2(1, 0));
}

TEST_CASE("prox_metric rejects unsupported metrics") {
  Matrix full = Matrix::Identity(2, 2);
  full(0, 1) = full(1, 0) = 0.3;
  CHECK_THROWS_AS(prox_metric(SimpleFunctionSpec::indicator_nonneg(2), full, vec2(1, 1)),
                  UnsupportedError);
  // The PSD cone needs a scalar metric.
  Matrix diag = Matrix::Identity(3, 3);
  diag(2, 2) = 2.0;
  CHECK_THROWS_AS(prox_metric(SimpleFunctionSpec::indicator_psd(2), diag, Vector::Ones(3)),
                  UnsupportedError);
  CHECK_THROWS_AS(prox_metric(SimpleFunctionSpec::indicator_nonneg(2), -Matrix::Identity(2, 2),
                              vec2(1, 1)),
                  DomainError);
  CHECK_THROWS_AS(SimpleFunctionSpec::indicator_box(Vector::Ones(2), Vector::Zero(2)), DomainError);
  CHECK_THROWS_AS(prox_metric(SimpleFunctionSpec::indicator_nonneg(3), Matrix::Identity(2, 2),
                              vec2(1, 1)),
                  StructuralError);
}

TEST_CASE("support_value examples") {
  const Matrix inf = Matrix::Constant(2, 2, kInfinity);
  CHECK(support_value(Matrix::Zero(2, 2), inf, Matrix::Zero(2, 2)) == 0.0);
  // -Z <= 0 entrywise on the nonnegative orthant.
  CHECK(support_value(Matrix::Zero(2, 2), inf, mat2(1, 2, 0, 3)) == 0.0);
  CHECK(support_value(Matrix::Zero(2, 2), inf, mat2(-1, 2, 0, 3)) == kInfinity);
  // -Z = [[1,-1],[0,2]] on [0,1]^{2x2}.
  CHECK(support_value(Matrix::Zero(2, 2), Matrix::Ones(2, 2), -mat2(1, -1, 0, 2)) ==
        doctest::Approx(3.0));
  const SimpleFunctionSpec s = SimpleFunctionSpec::support_of_box(Vector::Zero(2), Vector::Ones(2));
  CHECK(support_value(s, vec2(-1, 1)) == doctest::Approx(1.0));
  CHECK(s.value(vec2(-1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("Moreau identity for the box") {
  std::mt19937 rng(13);
  Vector lo(4), hi(4);
  lo << 0, -1, -kInfinity, 0;
  hi << 1, 2, 3, kInfinity;
  const SimpleFunctionSpec box = SimpleFunctionSpec::indicator_box(lo, hi);
  const SimpleFunctionSpec sup = SimpleFunctionSpec::support_of_box(lo, hi);
  const Vector one = Vector::Ones(4);
  for (int t = 0; t < 50; ++t) {
    const Vector y = 3.0 * random_vector(rng, 4);
    // The support kind acts on -x, so its prox at y pairs with the box projection of -y.
    const Vector p = sup.prox(y, one);
    const Vector q = box.prox(-y, one);
    CHECK((p - q - y).norm() <= 1e-14);
  }
}

TEST_CASE("firm nonexpansiveness and idempotence of the proximal maps") {
  std::mt19937 rng(14);
  Vector lo(3), hi(3);
  lo << 0, -1, -kInfinity;
  hi << 1, kInfinity, 2;
  std::vector<SimpleFunctionSpec> specs{
      SimpleFunctionSpec::indicator_nonneg(3), SimpleFunctionSpec::indicator_box(lo, hi),
      SimpleFunctionSpec::support_of_box(lo, hi), SimpleFunctionSpec::indicator_psd(2),
      SimpleFunctionSpec::zero(3)};
  std::uniform_real_distribution<double> ud(0.5, 4.0);
  for (const auto& spec : specs) {
    for (int t = 0; t < 100; ++t) {
      Vector metric(3);
      if (spec.kind() == FunctionKind::IndicatorPsd) {
        metric.setConstant(ud(rng));
      } else {
        for (Index i = 0; i < 3; ++i) metric[i] = ud(rng);
      }
      const Vector v = 2.0 * random_vector(rng, 3);
      const Vector w = 2.0 * random_vector(rng, 3);
      const Vector pv = spec.prox(v, metric);
      const Vector pw = spec.prox(w, metric);
      const Vector dp = pv - pw;
      const double lhs = dp.dot(metric.cwiseProduct(dp));
      const double rhs = (v - w).dot(metric.cwiseProduct(dp));
      CHECK(lhs <= rhs + 1e-10);
      if (spec.kind() != FunctionKind::SupportOfBox && spec.kind() != FunctionKind::Zero) {
        CHECK((spec.prox(pv, metric) - pv).norm() <= 1e-12 * std::max(1.0, pv.norm()));
      }
    }
  }
}

TEST_CASE("subgradient distance of the nonnegative orthant") {
  const SimpleFunctionSpec s = SimpleFunctionSpec::indicator_nonneg(2);
  // At x = 0 the normal cone is (-inf, 0]; g >= 0 is absorbed, g < 0 is not.
  CHECK(s.subgradient_distance(vec2(0, 0), vec2(2, 3)) == 0.0);
  CHECK(s.subgradient_distance(vec2(0, 0), vec2(-3, 4)) == doctest::Approx(3.0));
  CHECK(s.subgradient_distance(vec2(1, 0), vec2(-3, 4)) == doctest::Approx(3.0));
  CHECK(s.subgradient_distance(vec2(-1, 0), vec2(0, 0)) == kInfinity);
  const SimpleFunctionSpec b = SimpleFunctionSpec::indicator_box(Vector::Zero(2), Vector::Ones(2));
  // At the upper bound the normal cone is [0, inf).
  CHECK(b.subgradient_distance(vec2(1, 1), vec2(-2, 5)) == doctest::Approx(5.0));
}

TEST_CASE("subgradient distance vanishes at proximal points") {
  // v = prox(y) satisfies 0 in d theta(v) + M (v - y).
  std::mt19937 rng(15);
  Vector lo(3), hi(3);
  lo << 0, -1, -kInfinity;
  hi << 1, kInfinity, 2;
  std::vector<SimpleFunctionSpec> specs{
      SimpleFunctionSpec::indicator_nonneg(3), SimpleFunctionSpec::indicator_box(lo, hi),
      SimpleFunctionSpec::support_of_box(lo, hi), SimpleFunctionSpec::indicator_psd(2),
      SimpleFunctionSpec::zero(3)};
  for (const auto& spec : specs) {
    for (int t = 0; t < 50; ++t) {
      const Vector metric = Vector::Constant(3, 1.5);
      const Vector y = 2.0 * random_vector(rng, 3);
      const Vector v = spec.prox(y, metric);
      const Vector g = metric.cwiseProduct(v - y);
      CHECK(spec.subgradient_distance(v, g) <= 1e-9);
    }
  }
}

TEST_CASE("separable functions act part by part") {
  const SeparableFunction f({SimpleFunctionSpec::indicator_nonneg(2), SimpleFunctionSpec::zero(1)});
  Vector y(3);
  y << -1, 2, -3;
  Vector expect(3);
  expect << 0, 2, -3;
  CHECK(f.prox(y, Vector::Ones(3)) == expect);
  CHECK(f.value(expect) == 0.0);
  CHECK(f.value(y) == kInfinity);
  CHECK(f.project_domain(y) == expect);
  CHECK(!f.is_zero());
  CHECK(SeparableFunction::zero(3).is_zero());
  CHECK_THROWS_AS(f.prox(Vector::Ones(2), Vector::Ones(2)), StructuralError);
}

TEST_CASE("diagonal_metric") {
  CHECK(diagonal_metric(2.0 * Matrix::Identity(2, 2)) == vec2(2, 2));
  CHECK_THROWS_AS(diagonal_metric(mat2(1, 0.5, 0.5, 1)), UnsupportedError);
}
