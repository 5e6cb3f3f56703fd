#include "sgsadmm/admm_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace sgsadmm {

namespace {

bool is_diagonal(const Matrix& M) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
  Matrix off = M;
  off.diagonal().setZero();
  return off.size() == 0 || off.cwiseAbs().maxCoeff() <= 1e-13 * scale;
}

bool is_scalar_diagonal(const Matrix& M) {
  if (!is_diagonal(M)) return false;
  const Vector d = M.diagonal();
  return (d.array() - d[0]).abs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(d[0]));
}

double lambda_max(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double lambda_min(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

Index numerical_rank(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  const Vector ev = eig.eigenvalues();
  const double cut = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  return (ev.array() > cut).count();
}

Matrix block_diagonal(const BlockPartition& blocks, const std::vector<Matrix>& parts) {
  Matrix out = Matrix::Zero(blocks.total(), blocks.total());
  for (Index i = 0; i < blocks.num_blocks(); ++i) {
    const Matrix& Si = parts[static_cast<size_t>(i)];
    if (Si.size() == 0) continue;
    if (Si.rows() != blocks.size(i) || Si.cols() != blocks.size(i)) {
      throw StructuralError("proximal block " + std::to_string(i) + " has the wrong size");
    }
    out.block(blocks.offset(i), blocks.offset(i), blocks.size(i), blocks.size(i)) = Si;
  }
  return out;
}

Vector segment_of(const Vector& v, const BlockPartition& part, Index i) {
  return v.segment(part.offset(i), part.size(i));
}

double inverse_norm(const Eigen::LLT<Matrix>& llt, const Vector& d) {
  return std::sqrt(std::max(0.0, d.dot(llt.solve(d))));
}

bool all_finite(const IterateState& s) {
  return s.x.allFinite() && s.y.allFinite() && s.z.allFinite();
}

}  // namespace

// ---------------------------------------------------------------------------

SmoothFunction SmoothFunction::zero(Index dim) {
  SmoothFunction f;
  f.sigma_hat = Matrix::Zero(dim, dim);
  f.sigma = Matrix::Zero(dim, dim);
  return f;
}

SmoothFunction SmoothFunction::linear(Vector q) {
  SmoothFunction f = zero(q.size());
  f.gradient = [q](const Vector&) { return q; };
  f.value = [q](const Vector& x) { return q.dot(x); };
  return f;
}

SmoothFunction SmoothFunction::quadratic(Matrix Q, Vector q) {
  if (Q.rows() != Q.cols() || Q.rows() != q.size()) {
    throw StructuralError("SmoothFunction::quadratic: dimension mismatch");
  }
  SmoothFunction f;
  f.sigma_hat = 0.5 * (Q + Q.transpose());
  f.sigma = f.sigma_hat;
  const Matrix H = f.sigma_hat;
  f.gradient = [H, q](const Vector& x) -> Vector { return H * x + q; };
  f.value = [H, q](const Vector& x) { return 0.5 * x.dot(H * x) + q.dot(x); };
  return f;
}

Vector SmoothFunction::grad(const Vector& x) const {
  return gradient ? gradient(x) : Vector::Zero(x.size());
}

double SmoothFunction::eval(const Vector& x) const { return value ? value(x) : 0.0; }

void MultiBlockProblem::validate() const {
  auto check_group = [](const BlockPartition& blocks, const std::vector<SeparableFunction>& fns,
                        const SmoothFunction& smooth, const Matrix& adj, Index zdim,
                        const char* label) {
    const std::string L(label);
    if (blocks.num_blocks() == 0) throw StructuralError(L + ": no blocks");
    if (static_cast<Index>(fns.size()) != blocks.num_blocks()) {
      throw StructuralError(L + ": need one nonsmooth term per block");
    }
    for (Index i = 0; i < blocks.num_blocks(); ++i) {
      if (fns[static_cast<size_t>(i)].dim() != blocks.size(i)) {
        throw StructuralError(L + ": nonsmooth term of block " + std::to_string(i) +
                              " has the wrong dimension");
      }
    }
    if (smooth.sigma_hat.rows() != blocks.total() || smooth.sigma_hat.cols() != blocks.total()) {
      throw StructuralError(L + ": majorization operator has the wrong size");
    }
    if (smooth.sigma.size() != 0 &&
        (smooth.sigma.rows() != blocks.total() || smooth.sigma.cols() != blocks.total())) {
      throw StructuralError(L + ": minorization operator has the wrong size");
    }
    if (adj.rows() != zdim || adj.cols() != blocks.total()) {
      throw StructuralError(L + ": adjoint map has shape " + std::to_string(adj.rows()) + "x" +
                            std::to_string(adj.cols()) + ", expected " + std::to_string(zdim) +
                            "x" + std::to_string(blocks.total()));
    }
  };
  check_group(x_blocks, p, f, A_adj, c.size(), "x");
  check_group(y_blocks, q, g, B_adj, c.size(), "y");
}

Vector MultiBlockProblem::residual(const Vector& x, const Vector& y) const {
  return A_adj * x + B_adj * y - c;
}

double MultiBlockProblem::p_value(const Vector& x) const {
  double v = 0.0;
  for (Index i = 0; i < x_blocks.num_blocks(); ++i) {
    v += p[static_cast<size_t>(i)].value(segment_of(x, x_blocks, i));
  }
  return v;
}

double MultiBlockProblem::q_value(const Vector& y) const {
  double v = 0.0;
  for (Index i = 0; i < y_blocks.num_blocks(); ++i) {
    v += q[static_cast<size_t>(i)].value(segment_of(y, y_blocks, i));
  }
  return v;
}

double MultiBlockProblem::objective(const Vector& x, const Vector& y) const {
  return p_value(x) + f.eval(x) + q_value(y) + g.eval(y);
}

const char* to_string(BlockRecipe recipe) {
  switch (recipe) {
    case BlockRecipe::Auto: return "auto";
    case BlockRecipe::Prox: return "prox";
    case BlockRecipe::Linearized: return "linearized";
    case BlockRecipe::Direct: return "direct";
    case BlockRecipe::Pcg: return "pcg";
    case BlockRecipe::Truncated: return "truncated";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  if (tau >= kGoldenRatio) {
    if (!allow_large_tau) {
      throw DomainError("tau >= (1 + sqrt 5)/2 requires the unsafe large-tau override");
    }
    if (tau > 1.95) throw DomainError("tau above 1.95 is not supported even with the override");
  }
  if (tol < 0.0 || std::isnan(tol)) throw DomainError("tolerance must be nonnegative");
  if (max_iter < 0) throw DomainError("max_iter must be nonnegative");
  if (skip_factor < 0.0) throw DomainError("skip factor must be nonnegative");
  if (precond_rank < 0) throw DomainError("truncation rank must be nonnegative");
  if (sigma_adapt.enabled && (!(sigma_adapt.factor > 1.0) || !(sigma_adapt.ratio > 1.0) ||
                              sigma_adapt.window < 1)) {
    throw DomainError("invalid sigma adaptation parameters");
  }
}

StepConstants steplength_constants(double tau) {
  if (!(tau > 0.0) || !(tau < kGoldenRatio)) {
    throw DomainError("step length tau must lie in (0, (1 + sqrt 5)/2)");
  }
  StepConstants sc;
  sc.alpha = 0.5 * (1.0 + tau / std::min(1.0 + tau, 1.0 + 1.0 / tau));
  sc.alpha_hat = 1.0 - sc.alpha * std::min(tau, 1.0 / tau);
  sc.beta = std::min(1.0, 1.0 - tau + 1.0 / tau) * sc.alpha - (1.0 - sc.alpha) * tau;
  return sc;
}

std::pair<Matrix, Matrix> fg_operators(const MultiBlockProblem& problem, const Matrix& S,
                                       const Matrix& T, double sigma, double tau) {
  const StepConstants sc = steplength_constants(tau);
  const Index nx = problem.x_dim();
  const Index ny = problem.y_dim();
  if (S.rows() != nx || S.cols() != nx || T.rows() != ny || T.cols() != ny) {
    throw StructuralError("fg_operators: proximal terms have the wrong size");
  }
  const Matrix AA = problem.A_adj.transpose() * problem.A_adj;
  const Matrix BB = problem.B_adj.transpose() * problem.B_adj;
  const Matrix Sf = problem.f.sigma.size() ? problem.f.sigma : Matrix::Zero(nx, nx);
  const Matrix Sg = problem.g.sigma.size() ? problem.g.sigma : Matrix::Zero(ny, ny);
  Matrix F = 0.5 * Sf + S + (1.0 - sc.alpha) * sigma / 2.0 * AA;
  Matrix G = 0.5 * Sg + T + std::min(tau, 1.0 + tau - tau * tau) * sc.alpha * sigma * BB;
  return {0.5 * (F + F.transpose()), 0.5 * (G + G.transpose())};
}

FgCheck check_fg_pd(const MultiBlockProblem& problem, const Matrix& S, const Matrix& T,
                    double sigma, double tau) {
  FgCheck out;
  out.constants = steplength_constants(tau);
  const auto [F, G] = fg_operators(problem, S, T, sigma, tau);
  auto definite = [](const Matrix& M, double lmin) {
    if (M.size() == 0) return true;
    return lmin > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff());
  };
  out.f_min = F.size() == 0 ? 0.0 : lambda_min(F);
  out.g_min = G.size() == 0 ? 0.0 : lambda_min(G);
  out.passed = definite(F, out.f_min) && definite(G, out.g_min);
  return out;
}

SgsProximal build_sgs_proximal(const Matrix& sigma_hat, const Matrix& adjoint, double sigma,
                               const BlockPartition& blocks,
                               const std::vector<Matrix>& stilde) {
  if (!(sigma > 0.0)) throw DomainError("build_sgs_proximal: sigma must be positive");
  if (sigma_hat.rows() != blocks.total() || adjoint.cols() != blocks.total()) {
    throw StructuralError("build_sgs_proximal: operator sizes do not match the partition");
  }
  if (static_cast<Index>(stilde.size()) != blocks.num_blocks()) {
    throw StructuralError("build_sgs_proximal: need one proximal block per block");
  }
  SgsProximal out;
  out.S_tilde = block_diagonal(blocks, stilde);
  Matrix M = sigma_hat + sigma * (adjoint.transpose() * adjoint) + out.S_tilde;
  out.M_tilde = BlockOperator(blocks, 0.5 * (M + M.transpose()));
  out.M_tilde.require_positive_diagonal();
  const Matrix sgs = sgs_operator_matrix(out.M_tilde);
  out.S_hat = out.S_tilde + sgs;
  out.M_hat = out.M_tilde.matrix() + sgs;
  return out;
}

KappaConstants kappa_constants(const BlockOperator& M, double skip_factor) {
  const BlockPartition& part = M.partition();
  const Index s = part.num_blocks();
  const Index n = part.total();
  KappaConstants kc;
  Matrix sqrt_diag = Matrix::Zero(n, n);
  for (Index i = 0; i < s; ++i) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M.block(i, i));
    const Vector ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 0.0)) {
      throw NumericalError("diagonal block " + std::to_string(i) +
                           " is not positive definite (singular H_ii)");
    }
    kc.inv_sqrt_diag = std::max(kc.inv_sqrt_diag, 1.0 / std::sqrt(ev.minCoeff()));
    sqrt_diag.block(part.offset(i), part.offset(i), part.size(i), part.size(i)) =
        eig.eigenvectors() * ev.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  }
  Matrix inv(n, n);
  for (Index j = 0; j < n; ++j) inv.col(j) = upper_block_solve(M, Vector::Unit(n, j));
  const Matrix K = sqrt_diag * inv;
  const Matrix KtK = K.transpose() * K;
  kc.mixed = std::sqrt(std::max(0.0, lambda_max(KtK)));
  const double first = 1.0 + std::max(skip_factor, 1.0);
  kc.kappa = first * std::sqrt(double(s - 1)) * kc.inv_sqrt_diag + std::sqrt(double(s)) * kc.mixed;
  return kc;
}

// ---------------------------------------------------------------------------

BlockGroup::BlockGroup(const BlockPartition& blocks, const std::vector<SeparableFunction>& nonsmooth,
                       const Matrix& sigma_hat, const Matrix& adjoint, double sigma,
                       std::vector<BlockSetup> setup, Index default_rank,
                       bool nonsmooth_first_only, double skip_factor, const std::string& label)
    : blocks_(blocks), sigma_(sigma) {
  const Index s = blocks.num_blocks();
  if (setup.empty()) setup.resize(static_cast<size_t>(s));
  if (static_cast<Index>(setup.size()) != s) {
    throw StructuralError(label + ": block setup list has " + std::to_string(setup.size()) +
                          " entries for " + std::to_string(s) + " blocks");
  }
  const Matrix V = sigma_hat + sigma * (adjoint.transpose() * adjoint);
  S_tilde_.assign(static_cast<size_t>(s), Matrix());
  solvers_.assign(static_cast<size_t>(s), nullptr);
  recipes_.assign(static_cast<size_t>(s), BlockRecipe::Auto);

  for (Index i = 0; i < s; ++i) {
    const auto idx = static_cast<size_t>(i);
    const std::string where = label + " block " + std::to_string(i);
    const Index ni = blocks.size(i);
    const SeparableFunction& fn = nonsmooth[idx];
    const bool has_nonsmooth = !fn.is_zero();
    if (has_nonsmooth && nonsmooth_first_only && i > 0) {
      throw UnsupportedError(where + " carries a nonsmooth term; only the first block may");
    }
    const BlockSetup& bs = setup[idx];
    Matrix extra = Matrix::Zero(ni, ni);
    if (bs.extra.size() != 0) {
      if (bs.extra.rows() != ni || bs.extra.cols() != ni) {
        throw StructuralError(where + ": extra proximal term has the wrong size");
      }
      extra = 0.5 * (bs.extra + bs.extra.transpose());
      if (lambda_min(extra) < -1e-12 * std::max(1.0, extra.cwiseAbs().maxCoeff())) {
        throw IndefiniteError(where + ": extra proximal term is not positive semidefinite");
      }
    }
    const Matrix Vii = V.block(blocks.offset(i), blocks.offset(i), ni, ni) + extra;
    BlockRecipe recipe = bs.recipe;
    if (recipe == BlockRecipe::Auto) {
      if (has_nonsmooth) {
        const bool ok = fn.needs_scalar_metric() ? is_scalar_diagonal(Vii) : is_diagonal(Vii);
        recipe = ok ? BlockRecipe::Prox : BlockRecipe::Linearized;
      } else {
        recipe = BlockRecipe::Direct;
      }
    }
    const Index rank = bs.rank >= 0 ? bs.rank : default_rank;
    if (bs.make_solver && recipe != BlockRecipe::Direct) {
      throw UnsupportedError(where + ": a custom block solver needs the direct recipe");
    }
    if (has_nonsmooth && recipe != BlockRecipe::Prox && recipe != BlockRecipe::Linearized) {
      throw UnsupportedError(where + ": a nonsmooth term needs the prox or linearized recipe, not " +
                             to_string(recipe));
    }
    Matrix Si = extra;
    switch (recipe) {
      case BlockRecipe::Prox: {
        if (!is_diagonal(Vii)) {
          throw UnsupportedError(where + ": prox recipe needs a diagonal block; use linearized");
        }
        if (has_nonsmooth && fn.needs_scalar_metric() && !is_scalar_diagonal(Vii)) {
          throw UnsupportedError(where + ": PSD-cone prox needs a scalar block; use linearized");
        }
        break;
      }
      case BlockRecipe::Linearized: {
        const Matrix base = Vii - extra;
        const double lam = lambda_max(base);
        if (!(lam > 0.0)) throw NumericalError(where + ": block is zero; cannot linearize");
        Si = lam * Matrix::Identity(ni, ni) - base;
        break;
      }
      case BlockRecipe::Direct:
        if (bs.make_solver) {
          auto solver = bs.make_solver(sigma);
          if (!solver || !solver->exact()) {
            throw UnsupportedError(where + ": direct recipe needs an exact solver");
          }
          solvers_[idx] = std::move(solver);
        }
        break;
      case BlockRecipe::Truncated: {
        if (bs.extra.size() != 0) {
          throw UnsupportedError(where + ": truncated recipe does not take an extra proximal term");
        }
        const Index r = numerical_rank(Vii);
        if (r == 0) throw NumericalError(where + ": block is zero (singular H_ii)");
        const Index l = std::min(rank, r - 1);
        TruncatedEigProx tp = TruncatedEigProx::build(Vii / sigma, l, sigma);
        Si = tp.T_matrix();
        solvers_[idx] = std::make_shared<TruncatedBlockSolver>(std::move(tp));
        break;
      }
      case BlockRecipe::Pcg: {
        Eigen::LLT<Matrix> llt(Vii);
        if (llt.info() != Eigen::Success || numerical_rank(Vii) < ni) {
          throw NumericalError(where +
                               ": block is singular (singular H_ii); PCG needs a positive definite "
                               "block, use the truncated recipe");
        }
        const Index l = std::min(rank, ni - 1);
        TruncatedEigProx tp = TruncatedEigProx::build(Vii / sigma, l, sigma);
        solvers_[idx] = std::make_shared<PcgBlockSolver>(Vii, std::move(tp));
        break;
      }
      case BlockRecipe::Auto:
        break;
    }
    S_tilde_[idx] = Si;
    recipes_[idx] = recipe;
  }

  Matrix M = V + block_diagonal(blocks, S_tilde_);
  M_tilde_ = BlockOperator(blocks, 0.5 * (M + M.transpose()), BlockOperator::Structure::Symmetric);
  M_tilde_.require_positive_diagonal();
  kappa_ = kappa_constants(M_tilde_, skip_factor);
}

SgsProximal BlockGroup::proximal(const Matrix& sigma_hat, const Matrix& adjoint) const {
  return build_sgs_proximal(sigma_hat, adjoint, sigma_, blocks_, S_tilde_);
}

Matrix BlockGroup::S_tilde_matrix() const { return block_diagonal(blocks_, S_tilde_); }

// ---------------------------------------------------------------------------

GroupedAdmmBase::GroupedAdmmBase(MultiBlockProblem problem, SolverConfig config,
                                 bool nonsmooth_first_only)
    : problem_(std::move(problem)),
      config_(std::move(config)),
      nonsmooth_first_only_(nonsmooth_first_only) {
  problem_.validate();
  config_.validate();
  eps0_ = config_.eps0 > 0.0 ? config_.eps0 : 1e-3 * (1.0 + problem_.c.norm());
  rebuild();
}

void GroupedAdmmBase::rebuild() {
  x_group_ = std::make_unique<BlockGroup>(problem_.x_blocks, problem_.p, problem_.f.sigma_hat,
                                          problem_.A_adj, config_.sigma, config_.x_setup,
                                          config_.precond_rank, nonsmooth_first_only_,
                                          config_.skip_factor, "x");
  y_group_ = std::make_unique<BlockGroup>(problem_.y_blocks, problem_.q, problem_.g.sigma_hat,
                                          problem_.B_adj, config_.sigma, config_.y_setup,
                                          config_.precond_rank, nonsmooth_first_only_,
                                          config_.skip_factor, "y");
}

void GroupedAdmmBase::set_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive");
  config_.sigma = sigma;
  rebuild();
}

double GroupedAdmmBase::eps_tilde(int k) const {
  if (config_.eps_schedule) return config_.eps_schedule(k);
  const double factor = k <= 0 ? 1.0 : std::min(1.0, std::pow(double(k), -1.2));
  return factor * eps0_;
}

IterateState GroupedAdmmBase::initial_state() const {
  IterateState s;
  s.x = Vector::Zero(problem_.x_dim());
  s.y = Vector::Zero(problem_.y_dim());
  s.z = Vector::Zero(problem_.z_dim());
  for (Index i = 0; i < problem_.x_blocks.num_blocks(); ++i) {
    auto seg = s.x.segment(problem_.x_blocks.offset(i), problem_.x_blocks.size(i));
    seg = problem_.p[static_cast<size_t>(i)].project_domain(Vector(seg));
  }
  for (Index i = 0; i < problem_.y_blocks.num_blocks(); ++i) {
    auto seg = s.y.segment(problem_.y_blocks.offset(i), problem_.y_blocks.size(i));
    seg = problem_.q[static_cast<size_t>(i)].project_domain(Vector(seg));
  }
  return s;
}

Vector GroupedAdmmBase::x_linear(const IterateState& s) const {
  const Vector r = problem_.residual(s.x, s.y);
  return x_group_->M_tilde().apply(s.x) - problem_.f.grad(s.x) -
         problem_.A_adj.transpose() * (s.z + config_.sigma * r);
}

Vector GroupedAdmmBase::y_linear(const IterateState& s, const Vector& x_new) const {
  const Vector r = problem_.residual(x_new, s.y);
  return y_group_->M_tilde().apply(s.y) - problem_.g.grad(s.y) -
         problem_.B_adj.transpose() * (s.z + config_.sigma * r);
}

void GroupedAdmmBase::finish_step(IterateState& s, Vector x_new, Vector y_new) const {
  const Vector r = problem_.residual(x_new, y_new);
  s.summable_sum += (y_new - s.y).squaredNorm() + r.squaredNorm();
  s.x = std::move(x_new);
  s.y = std::move(y_new);
  s.z += config_.tau * config_.sigma * r;
  ++s.k;
}

// ---------------------------------------------------------------------------

SgsImspadmm::SgsImspadmm(MultiBlockProblem problem, SolverConfig config)
    : GroupedAdmmBase(std::move(problem), std::move(config), true) {}

StepReport SgsImspadmm::step(IterateState& state) {
  StepReport rep;
  rep.eps = eps_tilde(state.k);
  const double skip = config_.skip_factor;

  QuadraticBlockObjective ox{x_group().M_tilde(), x_linear(state), problem_.p[0],
                             x_group().solvers()};
  last_x_ = sgs_cycle(ox, BlockVector(problem_.x_blocks, state.x), rep.eps, skip);
  const Vector x_new = last_x_.u_plus.data();

  QuadraticBlockObjective oy{y_group().M_tilde(), y_linear(state, x_new), problem_.q[0],
                             y_group().solvers()};
  last_y_ = sgs_cycle(oy, BlockVector(problem_.y_blocks, state.y), rep.eps, skip);

  rep.dx = last_x_.d.data();
  rep.dy = last_y_.d.data();
  rep.dx_cert = hat_inverse_norm(x_group().M_tilde(), rep.dx);
  rep.dy_cert = hat_inverse_norm(y_group().M_tilde(), rep.dy);
  const KappaConstants& kx = x_group().kappa();
  const KappaConstants& ky = y_group().kappa();
  rep.dx_bound = kx.kappa * rep.eps;
  rep.dy_bound = ky.kappa * rep.eps;
  // Roundoff allowance for exact block solves.
  const double slack_x = 1e-12 * (1.0 + ox.b.norm()) * (kx.inv_sqrt_diag + kx.mixed);
  const double slack_y = 1e-12 * (1.0 + oy.b.norm()) * (ky.inv_sqrt_diag + ky.mixed);
  rep.certificates_ok = rep.dx_cert <= rep.dx_bound + slack_x && rep.dy_cert <= rep.dy_bound + slack_y;
  rep.inner_iterations = last_x_.inner_iterations + last_y_.inner_iterations;
  rep.skipped = static_cast<int>(last_x_.skipped.size() + last_y_.skipped.size());
  if (!rep.certificates_ok && config_.audit_certificates) {
    std::ostringstream msg;
    msg << "inexactness certificate violated at iteration " << state.k << ": ||d_x|| = "
        << rep.dx_cert << " (bound " << rep.dx_bound << "), ||d_y|| = " << rep.dy_cert
        << " (bound " << rep.dy_bound << ")";
    throw ContractViolation(msg.str());
  }
  finish_step(state, x_new, last_y_.u_plus.data());
  return rep;
}

StepReport sgs_impadmm_step(SgsImspadmm& engine, IterateState& state) { return engine.step(state); }

// ---------------------------------------------------------------------------

InnerSolution exact_composite_solve(const CompositeSubproblem& sub, double eps) {
  const Matrix& H = sub.H;
  const Index n = H.rows();
  if (H.cols() != n || sub.linear.size() != n || sub.blocks.total() != n) {
    throw StructuralError("exact_composite_solve: dimension mismatch");
  }
  InnerSolution out;
  if (sub.theta1.is_zero()) {
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success) throw NumericalError("subproblem operator is not positive definite");
    out.x = llt.solve(sub.linear);
    out.d = H * out.x - sub.linear;
    return out;
  }
  const Index n1 = sub.blocks.size(0);
  const Index n2 = n - n1;
  if (sub.theta1.dim() != n1) throw StructuralError("exact_composite_solve: theta1 dimension");
  Matrix R = H.topLeftCorner(n1, n1);
  Vector r = sub.linear.head(n1);
  Eigen::LLT<Matrix> llt22;
  if (n2 > 0) {
    llt22.compute(H.bottomRightCorner(n2, n2));
    if (llt22.info() != Eigen::Success) {
      throw NumericalError("subproblem operator is not positive definite");
    }
    const Matrix H21 = H.bottomLeftCorner(n2, n1);
    R -= H21.transpose() * llt22.solve(H21);
    r -= H21.transpose() * llt22.solve(Vector(sub.linear.tail(n2)));
  }
  R = 0.5 * (R + R.transpose());

  Vector x1;
  Vector d1;
  const bool diag_ok = sub.theta1.needs_scalar_metric() ? is_scalar_diagonal(R) : is_diagonal(R);
  if (diag_ok && (R.diagonal().array() > 0.0).all()) {
    Vector metric = R.diagonal();
    if (sub.theta1.needs_scalar_metric()) metric.setConstant(metric.mean());
    x1 = sub.theta1.prox(r.cwiseQuotient(metric), metric);
    d1 = R * x1 - metric.cwiseProduct(x1);
  } else {
    // Accelerated proximal gradient with gradient-based restart.
    const double L = lambda_max(R);
    const double mu = lambda_min(R);
    if (!(L > 0.0)) throw NumericalError("subproblem reduced operator is zero");
    const double target =
        std::max(1e-13 * (1.0 + r.norm()), 0.5 * eps * std::sqrt(std::max(mu, 0.0)));
    const Vector metric = Vector::Constant(n1, L);
    x1 = sub.theta1.project_domain(Vector::Zero(n1));
    Vector yv = x1;
    double t = 1.0;
    bool done = false;
    for (int it = 0; it < 500000; ++it) {
      const Vector g = R * yv - r;
      const Vector xn = sub.theta1.prox(yv - g / L, metric);
      d1 = L * (yv - xn) + R * (xn - yv);
      if (d1.norm() <= target) {
        x1 = xn;
        done = true;
        break;
      }
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      if ((yv - xn).dot(xn - x1) > 0.0) {
        yv = xn;
        t = 1.0;
      } else {
        yv = xn + ((t - 1.0) / tn) * (xn - x1);
        t = tn;
      }
      x1 = xn;
    }
    if (!done) throw NumericalError("composite subproblem solver did not converge");
  }
  out.x = Vector::Zero(n);
  out.x.head(n1) = x1;
  if (n2 > 0) {
    out.x.tail(n2) = llt22.solve(Vector(sub.linear.tail(n2) - H.bottomLeftCorner(n2, n1) * x1));
  }
  out.d = H * out.x - sub.linear;
  out.d.head(n1) += d1 - (R * x1 - r);
  return out;
}

ImspadmmOperators ImspadmmOperators::build(const MultiBlockProblem& problem, Matrix S, Matrix T,
                                           double sigma, double tau) {
  problem.validate();
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  ImspadmmOperators ops;
  ops.S = std::move(S);
  ops.T = std::move(T);
  ops.sigma = sigma;
  ops.tau = tau;
  const Matrix AA = problem.A_adj.transpose() * problem.A_adj;
  const Matrix BB = problem.B_adj.transpose() * problem.B_adj;
  if (ops.S.rows() != problem.x_dim() || ops.T.rows() != problem.y_dim()) {
    throw StructuralError("imsPADMM proximal terms have the wrong size");
  }
  ops.M = problem.f.sigma_hat + ops.S + sigma * AA;
  ops.N = problem.g.sigma_hat + ops.T + sigma * BB;
  ops.M = 0.5 * (ops.M + ops.M.transpose());
  ops.N = 0.5 * (ops.N + ops.N.transpose());
  ops.M_llt.compute(ops.M);
  ops.N_llt.compute(ops.N);
  if (ops.M_llt.info() != Eigen::Success) throw NumericalError("M is not positive definite");
  if (ops.N_llt.info() != Eigen::Success) throw NumericalError("N is not positive definite");
  return ops;
}

ImspadmmStepInfo imspadmm_step(const MultiBlockProblem& problem, const ImspadmmOperators& ops,
                               IterateState& state, double eps, const InnerSolver& inner_x,
                               const InnerSolver& inner_y) {
  for (size_t i = 1; i < problem.p.size(); ++i) {
    if (!problem.p[i].is_zero()) throw UnsupportedError("imspadmm_step: nonsmooth term beyond block 0");
  }
  for (size_t i = 1; i < problem.q.size(); ++i) {
    if (!problem.q[i].is_zero()) throw UnsupportedError("imspadmm_step: nonsmooth term beyond block 0");
  }
  ImspadmmStepInfo info;
  info.eps = eps;
  auto check = [](const InnerSolution& sol, const Eigen::LLT<Matrix>& llt, const Vector& l,
                  double eps_k, const char* name) {
    if (sol.x.size() != l.size() || sol.d.size() != l.size()) {
      throw StructuralError(std::string("inner solution for ") + name + " has the wrong size");
    }
    const double nd = inverse_norm(llt, sol.d);
    const double slack = 1e-10 * std::max(1.0, inverse_norm(llt, l));
    if (nd > eps_k + slack) {
      std::ostringstream msg;
      msg << "inner solution for " << name << " violates the accuracy certificate: " << nd
          << " > " << eps_k;
      throw ContractViolation(msg.str());
    }
    return nd;
  };

  const Vector r0 = problem.residual(state.x, state.y);
  const Vector lx = ops.M * state.x - problem.f.grad(state.x) -
                    problem.A_adj.transpose() * (state.z + ops.sigma * r0);
  const InnerSolution sx = inner_x({ops.M, lx, problem.p[0], problem.x_blocks}, eps);
  info.dx_norm = check(sx, ops.M_llt, lx, eps, "x");
  info.dx = sx.d;

  const Vector r1 = problem.residual(sx.x, state.y);
  const Vector ly = ops.N * state.y - problem.g.grad(state.y) -
                    problem.B_adj.transpose() * (state.z + ops.sigma * r1);
  const InnerSolution sy = inner_y({ops.N, ly, problem.q[0], problem.y_blocks}, eps);
  info.dy_norm = check(sy, ops.N_llt, ly, eps, "y");
  info.dy = sy.d;

  const Vector r = problem.residual(sx.x, sy.x);
  state.summable_sum += (sy.x - state.y).squaredNorm() + r.squaredNorm();
  state.x = sx.x;
  state.y = sy.x;
  state.z += ops.tau * ops.sigma * r;
  ++state.k;
  return info;
}

// ---------------------------------------------------------------------------

namespace {

struct KktParts {
  double dist_f2 = 0.0;
  double dist_g2 = 0.0;
  double res2 = 0.0;
};

KktParts kkt_parts(const MultiBlockProblem& problem, const Vector& x, const Vector& y,
                   const Vector& z) {
  KktParts kp;
  const Vector gx = problem.f.grad(x) + problem.A_adj.transpose() * z;
  const Vector gy = problem.g.grad(y) + problem.B_adj.transpose() * z;
  for (Index i = 0; i < problem.x_blocks.num_blocks(); ++i) {
    const double d = problem.p[static_cast<size_t>(i)].subgradient_distance(
        segment_of(x, problem.x_blocks, i), segment_of(gx, problem.x_blocks, i));
    kp.dist_f2 += d * d;
  }
  for (Index i = 0; i < problem.y_blocks.num_blocks(); ++i) {
    const double d = problem.q[static_cast<size_t>(i)].subgradient_distance(
        segment_of(y, problem.y_blocks, i), segment_of(gy, problem.y_blocks, i));
    kp.dist_g2 += d * d;
  }
  kp.res2 = problem.residual(x, y).squaredNorm();
  return kp;
}

}  // namespace

double kkt_distance(const MultiBlockProblem& problem, const Vector& x, const Vector& y,
                    const Vector& z) {
  const KktParts kp = kkt_parts(problem, x, y, z);
  return kp.dist_f2 + kp.dist_g2 + kp.res2;
}

ResidualSummary default_residual(const MultiBlockProblem& problem, const IterateState& state) {
  const KktParts kp = kkt_parts(problem, state.x, state.y, state.z);
  const double scale = 1.0 + problem.c.norm();
  ResidualSummary rs;
  rs.constraint = std::sqrt(kp.res2) / scale;
  rs.optimality = std::sqrt(kp.dist_f2 + kp.dist_g2) / scale;
  rs.eta = std::max(rs.constraint, rs.optimality);
  return rs;
}

SolveReport solve(AdmmEngine& engine, const SolverConfig& config, const SolveOptions& options) {
  config.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&]() { return std::chrono::duration<double>(Clock::now() - start).count(); };

  SolveReport report;
  auto warn = [&](const std::string& msg) {
    report.warnings.push_back(msg);
    if (options.warn) {
      options.warn(msg);
    } else {
      std::cerr << "warning: " << msg << "\n";
    }
  };
  const ResidualFn resfn = options.residual
                               ? options.residual
                               : ResidualFn([&engine](const IterateState& s) {
                                   return default_residual(engine.problem(), s);
                                 });

  IterateState state = engine.initial_state();
  ResidualSummary res = resfn(state);
  std::vector<double> etas{res.eta};
  auto emit = [&](const CoreRecord& rec) {
    if (options.keep_log) report.log.push_back(rec);
    if (options.sink) options.sink(rec, state);
  };
  {
    CoreRecord rec;
    rec.k = 0;
    rec.eta = res.eta;
    rec.constraint = res.constraint;
    rec.optimality = res.optimality;
    rec.sigma = engine.sigma();
    rec.seconds = elapsed();
    emit(rec);
  }

  const bool monitor = config.tau >= kGoldenRatio;
  const int monitor_window = 1000;
  std::vector<double> sums{0.0};
  double prev_increment = -1.0;
  int hi_streak = 0;
  int lo_streak = 0;
  const int freeze_at = static_cast<int>(
      std::floor((1.0 - config.sigma_adapt.freeze_fraction) * double(config.max_iter)));

  while (true) {
    if (res.eta <= config.tol) {
      report.converged = true;
      break;
    }
    if (state.k >= config.max_iter) break;
    const StepReport st = engine.step(state);
    if (!all_finite(state)) {
      throw DivergenceError("iterate became non-finite at iteration " + std::to_string(state.k),
                            state);
    }
    res = resfn(state);
    if (!std::isfinite(res.eta)) {
      throw DivergenceError("residual became non-finite at iteration " + std::to_string(state.k),
                            state);
    }
    etas.push_back(res.eta);
    const int k = state.k;
    if (config.divergence_window > 0 && k >= config.divergence_window &&
        res.eta > config.divergence_factor * etas[static_cast<size_t>(k - config.divergence_window)]) {
      std::ostringstream msg;
      msg << "divergence detected at iteration " << k << ": eta grew from "
          << etas[static_cast<size_t>(k - config.divergence_window)] << " to " << res.eta;
      throw DivergenceError(msg.str(), state);
    }
    if (!st.certificates_ok) ++report.certificate_failures;
    report.inner_iterations += st.inner_iterations;
    report.skipped += st.skipped;

    CoreRecord rec;
    rec.k = k;
    rec.eta = res.eta;
    rec.constraint = res.constraint;
    rec.optimality = res.optimality;
    rec.dx_cert = st.dx_cert;
    rec.dy_cert = st.dy_cert;
    rec.dx_bound = st.dx_bound;
    rec.dy_bound = st.dy_bound;
    rec.inner_iterations = st.inner_iterations;
    rec.skipped = st.skipped;
    rec.sigma = engine.sigma();
    rec.seconds = elapsed();
    emit(rec);

    if (monitor) {
      sums.push_back(state.summable_sum);
      if (k % monitor_window == 0) {
        const double inc = sums[static_cast<size_t>(k)] - sums[static_cast<size_t>(k - monitor_window)];
        if (prev_increment >= 0.0 && inc > prev_increment) {
          std::ostringstream msg;
          msg << "summability monitor: sum of ||dy||^2 + ||r||^2 grew by " << inc
              << " over iterations " << k - monitor_window << ".." << k
              << ", more than the previous window (" << prev_increment << ")";
          warn(msg.str());
        }
        prev_increment = inc;
      }
    }

    if (config.sigma_adapt.enabled && k < freeze_at) {
      const SigmaAdaptation& sa = config.sigma_adapt;
      if (res.constraint > sa.ratio * res.optimality) {
        ++hi_streak;
        lo_streak = 0;
      } else if (res.optimality > sa.ratio * res.constraint) {
        ++lo_streak;
        hi_streak = 0;
      } else {
        hi_streak = lo_streak = 0;
      }
      if (hi_streak >= sa.window) {
        engine.set_sigma(engine.sigma() * sa.factor);
        hi_streak = 0;
      } else if (lo_streak >= sa.window) {
        engine.set_sigma(engine.sigma() / sa.factor);
        lo_streak = 0;
      }
    }
  }

  report.iterations = state.k;
  report.final_residual = res;
  report.final_state = std::move(state);
  report.final_sigma = engine.sigma();
  report.seconds = elapsed();
  return report;
}

SolveReport solve(const MultiBlockProblem& problem, const SolverConfig& config,
                  const SolveOptions& options) {
  SgsImspadmm engine(problem, config);
  return solve(engine, config, options);
}

}  // namespace sgsadmm
