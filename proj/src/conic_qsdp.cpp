#include "sgsadmm/conic_qsdp.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace sgsadmm {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

void require_psd_operand(const Matrix& M, Index n, const char* what) {
  if (M.rows() != n || M.cols() != n) {
    throw StructuralError(std::string(what) + " must be " + std::to_string(n) + "x" +
                          std::to_string(n));
  }
  require_symmetric(M, 1e-12, what);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw DomainError(std::string(what) + " is not positive semidefinite");
  }
}

/// (Q + sigma Q^2) W = R for a Lyapunov Q, diagonalized by the eigenvectors of
/// its operand.
class LyapunovBlockSolver final : public BlockSolver {
 public:
  LyapunovBlockSolver(const Matrix& A, double sigma, Index n) : n_(n), sigma_(sigma) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
    P_ = eig.eigenvectors();
    const Vector lam = eig.eigenvalues();
    denom_.resize(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double q = 0.5 * (lam[i] + lam[j]);
        denom_(i, j) = q + sigma_ * q * q;
      }
    }
    if (!(denom_.minCoeff() > 0.0)) {
      throw NumericalError("Lyapunov fast path needs a positive definite operand");
    }
  }

  Vector solve(const Vector& rhs, const Vector&, double, CgStats& stats) const override {
    stats = CgStats{};
    stats.converged = true;
    const Matrix R = P_.transpose() * smat(rhs, n_) * P_;
    const Matrix W = P_ * R.cwiseQuotient(denom_) * P_.transpose();
    return svec(W);
  }
  bool exact() const override { return true; }

 private:
  Index n_;
  double sigma_;
  Matrix P_;
  Matrix denom_;
};

}  // namespace

const char* to_string(QKind kind) {
  switch (kind) {
    case QKind::Vacuous: return "vacuous";
    case QKind::Explicit: return "explicit";
    case QKind::SymKronecker: return "sym-kronecker";
    case QKind::Lyapunov: return "lyapunov";
  }
  return "?";
}

QKind q_kind_from_string(const std::string& name) {
  if (name == "vacuous" || name == "none" || name == "linear") return QKind::Vacuous;
  if (name == "explicit") return QKind::Explicit;
  if (name == "sym-kronecker") return QKind::SymKronecker;
  if (name == "lyapunov") return QKind::Lyapunov;
  throw DomainError("unknown Q kind '" + name + "'");
}

QOperatorSpec QOperatorSpec::vacuous(Index n) {
  QOperatorSpec s;
  s.kind = QKind::Vacuous;
  s.n = n;
  return s;
}

QOperatorSpec QOperatorSpec::sym_kronecker(Matrix A, Matrix B) {
  QOperatorSpec s;
  s.kind = QKind::SymKronecker;
  s.n = A.rows();
  s.A = std::move(A);
  s.B = std::move(B);
  s.validate();
  return s;
}

QOperatorSpec QOperatorSpec::lyapunov(Matrix A) {
  QOperatorSpec s;
  s.kind = QKind::Lyapunov;
  s.n = A.rows();
  s.A = std::move(A);
  s.validate();
  return s;
}

QOperatorSpec QOperatorSpec::explicit_matrix(Matrix M) {
  QOperatorSpec s;
  s.kind = QKind::Explicit;
  if (M.rows() != M.cols()) throw StructuralError("explicit Q must be square");
  s.n = svec_order(M.rows());
  s.explicit_svec = std::move(M);
  s.validate();
  return s;
}

void QOperatorSpec::validate() const {
  if (n < 0) throw StructuralError("Q: negative order");
  switch (kind) {
    case QKind::Vacuous:
      break;
    case QKind::SymKronecker:
      require_psd_operand(A, n, "sym-kronecker operand A");
      require_psd_operand(B, n, "sym-kronecker operand B");
      break;
    case QKind::Lyapunov:
      require_psd_operand(A, n, "lyapunov operand A");
      break;
    case QKind::Explicit:
      require_psd_operand(explicit_svec, svec_dim(n), "explicit Q matrix");
      break;
  }
}

Matrix apply_Q(const QOperatorSpec& spec, const Matrix& X) {
  require_symmetric(X, 1e-12, "apply_Q");
  if (X.rows() != spec.n) throw StructuralError("apply_Q: order mismatch");
  switch (spec.kind) {
    case QKind::Vacuous:
      return Matrix::Zero(spec.n, spec.n);
    case QKind::SymKronecker: {
      const Matrix AXB = spec.A * X * spec.B;
      return 0.5 * (AXB + AXB.transpose());
    }
    case QKind::Lyapunov: {
      const Matrix AX = spec.A * X;
      return 0.5 * (AX + AX.transpose());
    }
    case QKind::Explicit:
      return smat(spec.explicit_svec * svec(X), spec.n);
  }
  return Matrix();
}

Matrix q_svec_matrix(const QOperatorSpec& spec) {
  const Index d = svec_dim(spec.n);
  if (spec.kind == QKind::Vacuous) return Matrix::Zero(d, d);
  if (spec.kind == QKind::Explicit) return 0.5 * (spec.explicit_svec + spec.explicit_svec.transpose());
  Matrix M(d, d);
  for (Index k = 0; k < d; ++k) M.col(k) = svec(apply_Q(spec, smat(Vector::Unit(d, k), spec.n)));
  return 0.5 * (M + M.transpose());
}

Matrix SvecConstraints::dense(Index n) const {
  const Index d = svec_dim(n);
  Matrix A = Matrix::Zero(m, d);
  for (const auto& t : entries) {
    if (t.row() < 0 || t.row() >= m || t.col() < 0 || t.col() >= d) {
      std::ostringstream msg;
      msg << "constraint triplet (" << t.row() << ", " << t.col() << ") out of range for m = " << m
          << ", svec dimension " << d;
      throw StructuralError(msg.str());
    }
    if (!std::isfinite(t.value())) throw DomainError("constraint triplet value is not finite");
    A(t.row(), t.col()) += t.value();
  }
  return A;
}

BoxSet BoxSet::nonneg(Index n) {
  return {Matrix::Zero(n, n), Matrix::Constant(n, n, kInfinity)};
}

BoxSet BoxSet::free(Index n) {
  return {Matrix::Constant(n, n, -kInfinity), Matrix::Constant(n, n, kInfinity)};
}

QsdpProblem::QsdpProblem(Index n, QOperatorSpec Q, Matrix C, SvecConstraints eq,
                         SvecConstraints ineq, BoxSet box)
    : n_(n), Q_(std::move(Q)), C_(std::move(C)), eq_(std::move(eq)), ineq_(std::move(ineq)),
      box_(std::move(box)) {
  if (n_ < 1) throw StructuralError("QSDP order must be positive");
  if (Q_.n != n_) throw StructuralError("Q order does not match the problem order");
  Q_.validate();
  if (C_.rows() != n_ || C_.cols() != n_) throw StructuralError("C has the wrong shape");
  require_symmetric(C_, 1e-12, "C");
  if (eq_.m < 0 || ineq_.m < 0) throw StructuralError("negative constraint count");
  if (eq_.b.size() != eq_.m) throw StructuralError("b_E length does not match m_E");
  if (ineq_.b.size() != ineq_.m) throw StructuralError("b_I length does not match m_I");
  if (box_.lower.rows() != n_ || box_.lower.cols() != n_ || box_.upper.rows() != n_ ||
      box_.upper.cols() != n_) {
    throw StructuralError("box bounds have the wrong shape");
  }
  if ((box_.lower - box_.upper).array().isNaN().any() ||
      (box_.lower.array() > box_.upper.array()).any()) {
    throw DomainError("box lower bound exceeds upper bound");
  }
  if ((box_.lower.array() != box_.lower.transpose().array()).any() ||
      (box_.upper.array() != box_.upper.transpose().array()).any()) {
    throw StructuralError("box bounds must be symmetric");
  }
  AE_ = eq_.dense(n_);
  AI_ = ineq_.dense(n_);
  Qsvec_ = q_svec_matrix(Q_);
  if (Q_.is_vacuous()) {
    Qnorm_ = 0.0;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Qsvec_, Eigen::EigenvaluesOnly);
    Qnorm_ = eig.eigenvalues().cwiseAbs().maxCoeff();
  }
}

ResidualReport kkt_residuals(const QsdpProblem& pb, const DualIterate& pt) {
  const Index n = pb.n();
  auto check = [n](const Matrix& M, const char* name) {
    if (M.rows() != n || M.cols() != n) {
      throw StructuralError(std::string("kkt_residuals: ") + name + " has the wrong shape");
    }
  };
  check(pt.Z, "Z");
  check(pt.S, "S");
  check(pt.X, "X");
  if (pt.y_E.size() != pb.m_E() || pt.y_I.size() != pb.m_I()) {
    throw StructuralError("kkt_residuals: multiplier lengths do not match the problem");
  }
  const bool hasW = !pb.Q().is_vacuous();
  const Matrix W = hasW ? pt.W : Matrix::Zero(n, n);
  if (hasW) check(W, "W");

  const Vector x = svec(pt.X);
  const double nX = pt.X.norm();
  ResidualReport r;

  Vector dual = pb.A_E().transpose() * pt.y_E + pb.A_I().transpose() * pt.y_I + svec(pt.S) +
                svec(pt.Z) - pb.Q_svec() * svec(W) - svec(pb.C());
  r.eta_D = dual.norm() / (1.0 + pb.C().norm());

  const Matrix& L = pb.box().lower;
  const Matrix& U = pb.box().upper;
  r.eta_X = (pt.X - project_box(pt.X, L, U)).norm() / (1.0 + nX);
  r.eta_Z = (pt.X - project_box(pt.X - pt.Z, L, U)).norm() / (1.0 + nX + pt.Z.norm());
  if (pb.m_E() > 0) r.eta_P = (pb.A_E() * x - pb.b_E()).norm() / (1.0 + pb.b_E().norm());
  if (hasW) r.eta_W = (pb.Q_svec() * (x - svec(W))).norm() / (1.0 + pb.Q_norm());
  r.eta_S = std::max((pt.X - project_psd(pt.X)).norm() / (1.0 + nX),
                     std::abs((pt.X.cwiseProduct(pt.S)).sum()) / (1.0 + nX + pt.S.norm()));
  if (pb.m_I() > 0) {
    const Vector slack = pb.A_I() * x - pb.b_I();
    const double t1 = pt.y_I.cwiseMin(0.0).norm() / (1.0 + pt.y_I.norm());
    const double t2 = slack.cwiseMin(0.0).norm() / (1.0 + pb.b_I().norm());
    const double t3 = std::abs(slack.dot(pt.y_I)) / (1.0 + slack.norm() + pt.y_I.norm());
    r.eta_I = std::max({t1, t2, t3});
  }
  r.eta_qsdp = std::max({r.eta_D, r.eta_X, r.eta_Z, r.eta_P, r.eta_W, r.eta_S, r.eta_I});

  const Vector qx = pb.Q_svec() * x;
  r.obj_primal = 0.5 * x.dot(qx) + (pb.C().cwiseProduct(pt.X)).sum();
  const Vector w = svec(W);
  r.obj_dual = -support_value(L, U, pt.Z) - 0.5 * w.dot(pb.Q_svec() * w) +
               pb.b_E().dot(pt.y_E) + pb.b_I().dot(pt.y_I);
  if (std::isfinite(r.obj_dual)) {
    r.eta_gap = (r.obj_primal - r.obj_dual) /
                (1.0 + std::abs(r.obj_primal) + std::abs(r.obj_dual));
  } else {
    r.eta_gap = r.obj_dual < 0 ? 1.0 : -1.0;
  }
  return r;
}

double scaling_matrix(const Matrix& A_I) {
  if (A_I.rows() == 0) return 1.0;
  const Matrix G = A_I * A_I.transpose();
  std::mt19937 rng(20160101);
  std::normal_distribution<double> normal;
  Vector v(G.rows());
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < 5000; ++it) {
    const Vector w = G * v;
    const double lam_new = w.norm();
    if (lam_new == 0.0) return 1.0;
    v = w / lam_new;
    const bool done = std::abs(lam_new - lam) <= 1e-10 * lam_new;
    lam = lam_new;
    if (done) break;
  }
  return std::sqrt(std::sqrt(lam)) / 2.0;
}

DualBlocks build_dual_blocks(const QsdpProblem& pb, const DualBlockOptions& opts) {
  DualBlocks db;
  db.formulation = opts.formulation;
  db.n = pb.n();
  db.m_E = pb.m_E();
  db.m_I = pb.m_I();
  db.has_W = !pb.Q().is_vacuous();
  const Index nsv = pb.svec_size();
  const Index mE = db.m_E;
  const Index mI = db.m_I;
  const bool slack = opts.formulation == DualFormulation::SlackSplit && mI > 0;
  db.alpha = slack ? scaling_matrix(pb.A_I()) : 1.0;
  const double a = db.alpha;
  const Index zdim = nsv + (slack ? mI : 0);

  if (mE > 0) {
    const auto dep = dependent_rows(pb.A_E());
    if (!dep.empty()) {
      std::ostringstream msg;
      msg << "equality constraints are linearly dependent; dependent rows:";
      for (Index i : dep) msg << ' ' << i;
      throw StructuralError(msg.str());
    }
  }

  MultiBlockProblem& mp = db.problem;
  // x-group
  const Vector lo = svec(pb.box().lower);
  const Vector up = svec(pb.box().upper);
  std::vector<SimpleFunctionSpec> first{SimpleFunctionSpec::support_of_box(lo, up)};
  std::vector<Index> xsizes{nsv + (slack ? mI : 0)};
  if (slack) first.push_back(SimpleFunctionSpec::indicator_nonneg(mI));
  mp.p.emplace_back(first);
  mp.x_names.push_back(slack ? "Z,v" : "Z");
  if (db.has_W) {
    xsizes.push_back(nsv);
    mp.p.push_back(SeparableFunction::zero(nsv));
    mp.x_names.push_back("W");
  }
  mp.x_blocks = BlockPartition(xsizes);
  const Index xdim = mp.x_blocks.total();
  mp.A_adj = Matrix::Zero(zdim, xdim);
  mp.A_adj.topLeftCorner(nsv, nsv).setIdentity();
  if (slack) mp.A_adj.block(nsv, nsv, mI, mI) = a * Matrix::Identity(mI, mI);
  if (db.has_W) {
    mp.A_adj.block(0, mp.x_blocks.offset(1), nsv, nsv) = -pb.Q_svec();
    Matrix H = Matrix::Zero(xdim, xdim);
    H.bottomRightCorner(nsv, nsv) = pb.Q_svec();
    mp.f = SmoothFunction::quadratic(H, Vector::Zero(xdim));
  } else {
    mp.f = SmoothFunction::zero(xdim);
  }

  // y-group
  std::vector<Index> ysizes{nsv};
  mp.q.push_back(SeparableFunction({SimpleFunctionSpec::indicator_psd(pb.n())}));
  mp.y_names.push_back("S");
  if (mE > 0) {
    db.y_E_block = static_cast<Index>(ysizes.size());
    ysizes.push_back(mE);
    mp.q.push_back(SeparableFunction::zero(mE));
    mp.y_names.push_back("y_E");
  }
  if (mI > 0) {
    db.y_I_block = static_cast<Index>(ysizes.size());
    ysizes.push_back(mI);
    mp.q.push_back(slack ? SeparableFunction::zero(mI)
                         : SeparableFunction({SimpleFunctionSpec::indicator_nonneg(mI)}));
    mp.y_names.push_back("y_I");
  }
  mp.y_blocks = BlockPartition(ysizes);
  const Index ydim = mp.y_blocks.total();
  mp.B_adj = Matrix::Zero(zdim, ydim);
  mp.B_adj.topLeftCorner(nsv, nsv).setIdentity();
  Vector gq = Vector::Zero(ydim);
  if (mE > 0) {
    const Index off = mp.y_blocks.offset(db.y_E_block);
    mp.B_adj.block(0, off, nsv, mE) = pb.A_E().transpose();
    gq.segment(off, mE) = -pb.b_E();
  }
  if (mI > 0) {
    const Index off = mp.y_blocks.offset(db.y_I_block);
    mp.B_adj.block(0, off, nsv, mI) = pb.A_I().transpose();
    if (slack) mp.B_adj.block(nsv, off, mI, mI) = -a * Matrix::Identity(mI, mI);
    gq.segment(off, mI) = -pb.b_I();
  }
  mp.g = SmoothFunction::linear(gq);
  mp.c = Vector::Zero(zdim);
  mp.c.head(nsv) = svec(pb.C());

  // Block recipes.
  db.x_setup.assign(static_cast<size_t>(mp.x_blocks.num_blocks()), BlockSetup{});
  if (db.has_W) {
    BlockSetup& w = db.x_setup[1];
    Eigen::SelfAdjointEigenSolver<Matrix> eig(pb.Q_svec(), Eigen::EigenvaluesOnly);
    const bool definite = eig.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, pb.Q_norm());
    if (!definite) {
      w.recipe = BlockRecipe::Truncated;
    } else if (opts.formulation == DualFormulation::Direct) {
      w.recipe = BlockRecipe::Direct;
    } else {
      w.recipe = BlockRecipe::Pcg;
    }
    if (definite && opts.lyapunov_fast_path && pb.Q().kind == QKind::Lyapunov) {
      w.recipe = BlockRecipe::Direct;
      const Matrix A = pb.Q().A;
      const Index n = pb.n();
      w.make_solver = [A, n](double sigma) -> std::shared_ptr<const BlockSolver> {
        return std::make_shared<LyapunovBlockSolver>(A, sigma, n);
      };
    }
  }
  db.y_setup.assign(static_cast<size_t>(mp.y_blocks.num_blocks()), BlockSetup{});
  if (mE > 0) db.y_setup[static_cast<size_t>(db.y_E_block)].recipe = BlockRecipe::Direct;
  if (mI > 0) {
    db.y_setup[static_cast<size_t>(db.y_I_block)].recipe =
        slack ? BlockRecipe::Pcg : BlockRecipe::Linearized;
  }
  mp.validate();
  return db;
}

DualIterate DualBlocks::to_iterate(const IterateState& s) const {
  const Index nsv = svec_dim(n);
  const bool slack = formulation == DualFormulation::SlackSplit && m_I > 0;
  DualIterate pt;
  pt.Z = smat(s.x.head(nsv), n);
  pt.W = has_W ? smat(s.x.segment(problem.x_blocks.offset(1), nsv), n) : Matrix::Zero(n, n);
  pt.S = smat(s.y.head(nsv), n);
  pt.y_E = y_E_block >= 0 ? Vector(s.y.segment(problem.y_blocks.offset(y_E_block), m_E))
                          : Vector::Zero(0);
  pt.y_I = y_I_block >= 0 ? Vector(s.y.segment(problem.y_blocks.offset(y_I_block), m_I))
                          : Vector::Zero(0);
  pt.v = slack ? Vector(s.x.segment(nsv, m_I)) : pt.y_I;
  pt.X = smat(s.z.head(nsv), n);
  pt.u = slack ? Vector(s.z.tail(m_I)) : Vector::Zero(m_I);
  return pt;
}

IterateState DualBlocks::from_iterate(const DualIterate& pt) const {
  const Index nsv = svec_dim(n);
  const bool slack = formulation == DualFormulation::SlackSplit && m_I > 0;
  IterateState s;
  s.x = Vector::Zero(problem.x_dim());
  s.y = Vector::Zero(problem.y_dim());
  s.z = Vector::Zero(problem.z_dim());
  s.x.head(nsv) = svec(pt.Z);
  if (slack) s.x.segment(nsv, m_I) = pt.v;
  if (has_W) s.x.segment(problem.x_blocks.offset(1), nsv) = svec(pt.W);
  s.y.head(nsv) = svec(pt.S);
  if (y_E_block >= 0) s.y.segment(problem.y_blocks.offset(y_E_block), m_E) = pt.y_E;
  if (y_I_block >= 0) s.y.segment(problem.y_blocks.offset(y_I_block), m_I) = pt.y_I;
  s.z.head(nsv) = svec(pt.X);
  if (slack) s.z.tail(m_I) = pt.u;
  return s;
}

QsdpProblem generate_biq(const Matrix& Qbar, const Vector& c, const QOperatorSpec& Qspec) {
  const Index n1 = Qbar.rows();
  const Index n = n1 + 1;
  if (n < 3) throw DomainError("BIQ instances need n >= 3 (Qbar of order >= 2)");
  if (Qbar.cols() != n1) throw StructuralError("Qbar must be square");
  require_symmetric(Qbar, 1e-12, "Qbar");
  if (c.size() != n1) throw StructuralError("c must have length n - 1");
  QOperatorSpec Q = Qspec;
  if (Q.kind == QKind::Vacuous) Q.n = n;
  if (Q.n != n) throw StructuralError("Q order must equal n = size(Qbar) + 1");

  Matrix C = Matrix::Zero(n, n);
  C.topLeftCorner(n1, n1) = 0.5 * Qbar;
  C.block(0, n1, n1, 1) = 0.5 * c;
  C.block(n1, 0, 1, n1) = 0.5 * c.transpose();
  C = 0.5 * (C + C.transpose());

  const Index last = n - 1;
  SvecConstraints eq;
  eq.m = n;
  eq.b = Vector::Zero(n);
  for (Index i = 0; i < n1; ++i) {
    eq.add(i, svec_index(i, i, n), 1.0);
    eq.add(i, svec_index(last, i, n), -kInvSqrt2);
  }
  eq.add(n1, svec_index(last, last, n), 1.0);
  eq.b[n1] = 1.0;

  SvecConstraints in;
  in.m = 3 * n1 * (n1 - 1) / 2;
  in.b = Vector::Zero(in.m);
  Index row = 0;
  for (Index i = 0; i < n1; ++i) {
    for (Index j = i + 1; j < n1; ++j) {
      const Index xij = svec_index(j, i, n);
      const Index xi = svec_index(last, i, n);
      const Index xj = svec_index(last, j, n);
      in.add(row, xi, kInvSqrt2);
      in.add(row, xij, -kInvSqrt2);
      ++row;
      in.add(row, xj, kInvSqrt2);
      in.add(row, xij, -kInvSqrt2);
      ++row;
      in.add(row, xij, kInvSqrt2);
      in.add(row, xi, -kInvSqrt2);
      in.add(row, xj, -kInvSqrt2);
      in.b[row] = -1.0;
      ++row;
    }
  }
  return QsdpProblem(n, Q, C, eq, in, BoxSet::nonneg(n));
}

}  // namespace sgsadmm
