#include "sgsadmm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sgsadmm {

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::SgsImspadmm: return "sgs-imspadmm";
    case Algorithm::SpadmmDirect: return "spadmm-direct";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "sgs-imspadmm") return Algorithm::SgsImspadmm;
  if (name == "spadmm-direct") return Algorithm::SpadmmDirect;
  throw DomainError("unknown algorithm '" + name + "'");
}

void RunConfig::validate() const {
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  if (max_iter < 0) throw DomainError("max_iter must be nonnegative");
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  if (skip_factor < 0.0) throw DomainError("skip factor must be nonnegative");
  if (precond_rank < 0) throw DomainError("truncation rank must be nonnegative");
  solver_config().validate();
}

SolverConfig RunConfig::solver_config() const {
  SolverConfig c;
  c.sigma = sigma;
  c.tau = tau;
  c.allow_large_tau = allow_large_tau;
  c.eps0 = eps0;
  c.tol = tol;
  c.max_iter = max_iter;
  c.skip_factor = skip_factor;
  c.precond_rank = precond_rank;
  c.sigma_adapt.enabled = adapt_sigma;
  return c;
}

// ---------------------------------------------------------------------------

DirectExtendedSpadmm::DirectExtendedSpadmm(MultiBlockProblem problem, SolverConfig config)
    : GroupedAdmmBase(std::move(problem), std::move(config), false) {
  auto check = [](const BlockGroup& group, const char* label) {
    for (size_t i = 0; i < group.recipes().size(); ++i) {
      if (group.recipes()[i] == BlockRecipe::Pcg) {
        throw UnsupportedError(std::string(label) + " block " + std::to_string(i) +
                               " has no exact-solve recipe (pcg is iterative)");
      }
    }
  };
  check(x_group(), "x");
  check(y_group(), "y");
}

namespace {

Vector gauss_seidel_pass(const BlockGroup& group, const std::vector<SeparableFunction>& fns,
                         const Vector& b, Vector u) {
  const BlockOperator& M = group.M_tilde();
  const BlockPartition& part = M.partition();
  for (Index i = 0; i < part.num_blocks(); ++i) {
    Vector rhs = b.segment(part.offset(i), part.size(i));
    for (Index j = 0; j < part.num_blocks(); ++j) {
      if (j != i) rhs.noalias() -= M.block(i, j) * u.segment(part.offset(j), part.size(j));
    }
    const SeparableFunction& fn = fns[static_cast<size_t>(i)];
    Vector ui;
    if (!fn.is_zero()) {
      const Vector metric = diagonal_metric(M.block(i, i));
      ui = fn.prox(rhs.cwiseQuotient(metric), metric);
    } else if (const auto& solver = group.solvers()[static_cast<size_t>(i)]) {
      CgStats stats;
      ui = solver->solve(rhs, u.segment(part.offset(i), part.size(i)), 0.0, stats);
    } else {
      ui = M.solve_diagonal(i, rhs);
    }
    u.segment(part.offset(i), part.size(i)) = ui;
  }
  return u;
}

}  // namespace

StepReport DirectExtendedSpadmm::step(IterateState& state) {
  StepReport rep;
  const Vector x_new = gauss_seidel_pass(x_group(), problem_.p, x_linear(state), state.x);
  const Vector y_new = gauss_seidel_pass(y_group(), problem_.q, y_linear(state, x_new), state.y);
  finish_step(state, x_new, y_new);
  return rep;
}

StepReport baseline_spadmm_step(DirectExtendedSpadmm& engine, IterateState& state) {
  return engine.step(state);
}

// ---------------------------------------------------------------------------

TrendReport complexity_trend(const std::vector<double>& D) {
  if (D.empty()) throw DomainError("complexity_trend: empty log");
  TrendReport tr;
  tr.series.reserve(D.size());
  double running = kInfinity;
  for (size_t i = 0; i < D.size(); ++i) {
    running = std::min(running, D[i]);
    tr.series.push_back(double(i + 1) * running);
  }
  const size_t K = D.size();
  const size_t tenth = std::max<size_t>(1, K / 10);
  tr.final_value = tr.series.back();
  tr.tenth_value = tr.series[tenth - 1];
  tr.decreasing = tr.final_value <= tr.tenth_value;
  return tr;
}

double phi_potential(const MultiBlockProblem& pb, const Matrix& S, const Matrix& T, double sigma,
                     double tau, const IterateState& ref, const IterateState& cur,
                     const Vector& y_prev) {
  const StepConstants sc = steplength_constants(tau);
  const Matrix Fx = pb.f.sigma_hat + S;
  const Matrix Gy = pb.g.sigma_hat + T;
  auto wsq = [](const Vector& v, const Matrix& M) { return v.dot(M * v); };
  const Vector rk = pb.residual(cur.x, cur.y);
  const Vector dy = cur.y - y_prev;
  return (ref.z - cur.z).squaredNorm() / (tau * sigma) + wsq(ref.x - cur.x, Fx) +
         wsq(ref.y - cur.y, Gy) + sigma * pb.residual(ref.x, cur.y).squaredNorm() +
         sc.alpha_hat * sigma * rk.squaredNorm() + sc.alpha * wsq(dy, Gy);
}

// ---------------------------------------------------------------------------

QsdpRunResult run_qsdp(const QsdpProblem& problem, const RunConfig& run,
                       const RunObserver& observer) {
  run.validate();
  DualBlockOptions opts;
  opts.formulation = run.algorithm == Algorithm::SgsImspadmm ? DualFormulation::SlackSplit
                                                             : DualFormulation::Direct;
  opts.lyapunov_fast_path = run.lyapunov_fast_path;
  const DualBlocks blocks = build_dual_blocks(problem, opts);
  SolverConfig cfg = run.solver_config();
  cfg.x_setup = blocks.x_setup;
  cfg.y_setup = blocks.y_setup;

  std::unique_ptr<GroupedAdmmBase> engine;
  if (run.algorithm == Algorithm::SgsImspadmm) {
    engine = std::make_unique<SgsImspadmm>(blocks.problem, cfg);
  } else {
    engine = std::make_unique<DirectExtendedSpadmm>(blocks.problem, cfg);
  }

  QsdpRunResult out;
  out.algorithm = run.algorithm;
  out.alpha = blocks.alpha;
  ResidualReport last;
  SolveOptions so;
  so.residual = [&](const IterateState& s) {
    last = kkt_residuals(problem, blocks.to_iterate(s));
    ResidualSummary rs;
    rs.eta = last.eta_qsdp;
    rs.constraint = last.eta_D;
    rs.optimality = std::max({last.eta_P, last.eta_X, last.eta_Z, last.eta_W, last.eta_S,
                              last.eta_I});
    return rs;
  };
  so.sink = [&](const CoreRecord& rec, const IterateState& s) {
    IterationRecord ir;
    ir.k = rec.k;
    ir.eta_D = last.eta_D;
    ir.eta_P = last.eta_P;
    ir.eta_X = last.eta_X;
    ir.eta_Z = last.eta_Z;
    ir.eta_W = last.eta_W;
    ir.eta_S = last.eta_S;
    ir.eta_I = last.eta_I;
    ir.eta_qsdp = last.eta_qsdp;
    ir.eta_gap = last.eta_gap;
    ir.Dw = kkt_distance(blocks.problem, s.x, s.y, s.z);
    ir.dx_cert = rec.dx_cert;
    ir.dy_cert = rec.dy_cert;
    ir.dx_bound = rec.dx_bound;
    ir.dy_bound = rec.dy_bound;
    ir.pcg_iters = rec.inner_iterations;
    ir.skipped = rec.skipped;
    ir.sigma = rec.sigma;
    ir.time_s = rec.seconds;
    out.records.push_back(ir);
    if (observer) observer(*engine, s, ir);
  };
  so.keep_log = false;
  out.report = solve(*engine, cfg, so);
  out.final_point = blocks.to_iterate(out.report.final_state);
  out.final_residuals = kkt_residuals(problem, out.final_point);
  out.certificate_audit_passed = out.report.certificate_failures == 0;
  return out;
}

DiagnoseResult diagnose_qsdp(const QsdpProblem& problem, const RunConfig& config,
                             const std::optional<IterateState>& reference) {
  RunConfig run = config;
  run.algorithm = Algorithm::SgsImspadmm;
  DiagnoseResult out;
  Vector y_prev;
  double cached_sigma = -1.0;
  Matrix S;
  Matrix T;
  RunObserver observer;
  if (reference) {
    observer = [&](const GroupedAdmmBase& engine, const IterateState& s, const IterationRecord&) {
      const MultiBlockProblem& pb = engine.problem();
      if (y_prev.size() == 0) y_prev = engine.initial_state().y;
      if (engine.sigma() != cached_sigma) {
        cached_sigma = engine.sigma();
        S = engine.x_group().proximal(pb.f.sigma_hat, pb.A_adj).S_hat;
        T = engine.y_group().proximal(pb.g.sigma_hat, pb.B_adj).S_hat;
      }
      if (reference->x.size() != s.x.size() || reference->y.size() != s.y.size() ||
          reference->z.size() != s.z.size()) {
        throw StructuralError("reference point does not match the problem dimensions");
      }
      out.phi.push_back(
          phi_potential(pb, S, T, engine.sigma(), engine.tau(), *reference, s, y_prev));
      y_prev = s.y;
    };
  }
  out.run = run_qsdp(problem, run, observer);
  std::vector<double> D;
  D.reserve(out.run.records.size());
  for (const auto& r : out.run.records) {
    if (r.k > 0) D.push_back(r.Dw);  // D(w^1), D(w^2), ...
  }
  if (!D.empty()) out.trend = complexity_trend(D);
  return out;
}

// ---------------------------------------------------------------------------

QsdpProblem random_biq(Index n, unsigned seed, QKind kind) {
  if (n < 3) throw DomainError("BIQ instances need n >= 3");
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> qdist(-10, 10);
  std::uniform_int_distribution<int> cdist(-5, 5);
  std::normal_distribution<double> normal;
  const Index n1 = n - 1;
  Matrix Qbar(n1, n1);
  for (Index j = 0; j < n1; ++j) {
    for (Index i = j; i < n1; ++i) Qbar(i, j) = Qbar(j, i) = qdist(rng);
  }
  Vector c(n1);
  for (Index i = 0; i < n1; ++i) c[i] = cdist(rng);

  auto random_psd = [&](Index order, Index rank) {
    Matrix G(order, rank);
    for (Index j = 0; j < rank; ++j) {
      for (Index i = 0; i < order; ++i) G(i, j) = normal(rng);
    }
    Matrix M = G * G.transpose() / double(order);
    return Matrix(0.5 * (M + M.transpose()));
  };

  QOperatorSpec Q = QOperatorSpec::vacuous(n);
  switch (kind) {
    case QKind::Vacuous:
      break;
    case QKind::SymKronecker:
      Q = QOperatorSpec::sym_kronecker(random_psd(n, std::max<Index>(2, n / 4)),
                                       random_psd(n, std::max<Index>(1, n / 10)));
      break;
    case QKind::Lyapunov:
      Q = QOperatorSpec::lyapunov(random_psd(n, n));
      break;
    case QKind::Explicit: {
      const Index d = svec_dim(n);
      Q = QOperatorSpec::explicit_matrix(random_psd(d, std::max<Index>(1, d / 2)));
      break;
    }
  }
  return generate_biq(Qbar, c, Q);
}

}  // namespace sgsadmm
