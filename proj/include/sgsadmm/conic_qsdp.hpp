#pragma once

#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "sgsadmm/admm_core.hpp"
#include "sgsadmm/svec.hpp"

namespace sgsadmm {

enum class QKind { Vacuous, Explicit, SymKronecker, Lyapunov };

const char* to_string(QKind kind);
QKind q_kind_from_string(const std::string& name);

/// Self-adjoint PSD operator Q on S^n.
struct QOperatorSpec {
  QKind kind = QKind::Vacuous;
  Index n = 0;
  Matrix A;         // sym-kronecker and lyapunov operand
  Matrix B;         // sym-kronecker operand
  Matrix explicit_svec;  // svec-coordinate matrix for the explicit kind

  static QOperatorSpec vacuous(Index n);
  /// Q(X) = (A X B + B X A) / 2.
  static QOperatorSpec sym_kronecker(Matrix A, Matrix B);
  /// Q(X) = (A X + X A) / 2.
  static QOperatorSpec lyapunov(Matrix A);
  /// Q acts as M on svec coordinates.
  static QOperatorSpec explicit_matrix(Matrix M);

  bool is_vacuous() const { return kind == QKind::Vacuous; }
  void validate() const;
};

Matrix apply_Q(const QOperatorSpec& spec, const Matrix& X);

/// Matrix of Q in svec coordinates (svec_dim(n) square).
Matrix q_svec_matrix(const QOperatorSpec& spec);

/// Linear constraints <A_i, X> (op) b_i stored as svec triplets.
struct SvecConstraints {
  Index m = 0;
  std::vector<Eigen::Triplet<double>> entries;  // (row, svec index, value)
  Vector b;

  void add(Index row, Index svec_idx, double value) { entries.emplace_back(row, svec_idx, value); }
  /// m x svec_dim(n) matrix.
  Matrix dense(Index n) const;
};

/// N = {L <= X <= U}; infinite entries are allowed.
struct BoxSet {
  Matrix lower;
  Matrix upper;

  static BoxSet nonneg(Index n);
  static BoxSet free(Index n);
  Matrix project(const Matrix& X) const { return project_box(X, lower, upper); }
};

/// min 1/2 <X, Q X> + <C, X>  s.t.  A_E X = b_E, A_I X >= b_I, X in S^n_+ and N.
class QsdpProblem {
 public:
  QsdpProblem(Index n, QOperatorSpec Q, Matrix C, SvecConstraints eq, SvecConstraints ineq,
              BoxSet box);

  Index n() const { return n_; }
  Index svec_size() const { return svec_dim(n_); }
  Index m_E() const { return eq_.m; }
  Index m_I() const { return ineq_.m; }
  const QOperatorSpec& Q() const { return Q_; }
  const Matrix& C() const { return C_; }
  const SvecConstraints& equalities() const { return eq_; }
  const SvecConstraints& inequalities() const { return ineq_; }
  const BoxSet& box() const { return box_; }

  const Matrix& A_E() const { return AE_; }  // m_E x svec_dim
  const Matrix& A_I() const { return AI_; }
  const Vector& b_E() const { return eq_.b; }
  const Vector& b_I() const { return ineq_.b; }
  const Matrix& Q_svec() const { return Qsvec_; }
  double Q_norm() const { return Qnorm_; }

 private:
  Index n_;
  QOperatorSpec Q_;
  Matrix C_;
  SvecConstraints eq_;
  SvecConstraints ineq_;
  BoxSet box_;
  Matrix AE_;
  Matrix AI_;
  Matrix Qsvec_;
  double Qnorm_ = 0.0;
};

struct DualIterate {
  Matrix Z;
  Vector v;
  Matrix W;
  Matrix S;
  Vector y_E;
  Vector y_I;
  Matrix X;
  Vector u;
};

struct ResidualReport {
  double eta_D = 0.0;
  double eta_X = 0.0;
  double eta_Z = 0.0;
  double eta_P = 0.0;
  double eta_W = 0.0;
  double eta_S = 0.0;
  double eta_I = 0.0;
  double eta_qsdp = 0.0;
  double obj_primal = 0.0;
  double obj_dual = 0.0;
  double eta_gap = 0.0;
};

ResidualReport kkt_residuals(const QsdpProblem& problem, const DualIterate& point);

/// alpha = sqrt(||A_I||) / 2 with ||A_I|| from power iteration on A_I A_I^*;
/// 1 when A_I is empty.
double scaling_matrix(const Matrix& A_I);

enum class DualFormulation {
  SlackSplit,  // (Z, v) | W | S | y_E | y_I with D (v - y_I) = 0
  Direct,      // Z | W | S | y_E | y_I with y_I >= 0 handled in its own block
};

struct DualBlockOptions {
  DualFormulation formulation = DualFormulation::SlackSplit;
  /// Solve the W block of a Lyapunov Q in the eigenbasis of its operand.
  bool lyapunov_fast_path = false;
};

/// The dual of a QSDP cast as a multi-block problem for admm_core.
struct DualBlocks {
  MultiBlockProblem problem;
  std::vector<BlockSetup> x_setup;
  std::vector<BlockSetup> y_setup;
  DualFormulation formulation = DualFormulation::SlackSplit;
  double alpha = 1.0;
  Index n = 0;
  Index m_E = 0;
  Index m_I = 0;
  bool has_W = false;
  Index y_E_block = -1;
  Index y_I_block = -1;

  DualIterate to_iterate(const IterateState& state) const;
  IterateState from_iterate(const DualIterate& point) const;
};

DualBlocks build_dual_blocks(const QsdpProblem& problem, const DualBlockOptions& options = {});

/// BIQ relaxation of min 1/2 <x, Qbar x> + <c, x> over binary x (order n =
/// size(Qbar) + 1 lifted matrix). Q is applied to the whole lifted matrix.
QsdpProblem generate_biq(const Matrix& Qbar, const Vector& c, const QOperatorSpec& Qspec);

}  // namespace sgsadmm
