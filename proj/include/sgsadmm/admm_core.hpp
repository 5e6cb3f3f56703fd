#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgsadmm/blockops.hpp"
#include "sgsadmm/proxlib.hpp"
#include "sgsadmm/sgs_cycle.hpp"
#include "sgsadmm/subsolve.hpp"

namespace sgsadmm {

/// Smooth convex function with Lipschitz gradient. sigma_hat majorizes and
/// sigma minorizes its Hessian (both self-adjoint PSD).
struct SmoothFunction {
  Matrix sigma_hat;
  Matrix sigma;
  std::function<Vector(const Vector&)> gradient;  // empty means zero gradient
  std::function<double(const Vector&)> value;     // optional

  static SmoothFunction zero(Index dim);
  static SmoothFunction linear(Vector q);
  /// 1/2 <x, Q x> + <q, x>; sigma_hat = sigma = Q.
  static SmoothFunction quadratic(Matrix Q, Vector q);

  Vector grad(const Vector& x) const;
  double eval(const Vector& x) const;
};

/// min p(x) + f(x) + q(y) + g(y)  s.t.  A^* x + B^* y = c
///
/// x and y are split into blocks; p and q are block separable with one
/// SeparableFunction per block. A_adj (resp. B_adj) is the matrix of A^* (B^*)
/// mapping X (Y) into the constraint space Z.
struct MultiBlockProblem {
  BlockPartition x_blocks;
  BlockPartition y_blocks;
  std::vector<SeparableFunction> p;
  std::vector<SeparableFunction> q;
  SmoothFunction f;
  SmoothFunction g;
  Matrix A_adj;
  Matrix B_adj;
  Vector c;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;

  Index x_dim() const { return x_blocks.total(); }
  Index y_dim() const { return y_blocks.total(); }
  Index z_dim() const { return c.size(); }

  /// Throws StructuralError on inconsistent dimensions.
  void validate() const;
  /// A^* x + B^* y - c.
  Vector residual(const Vector& x, const Vector& y) const;
  double p_value(const Vector& x) const;
  double q_value(const Vector& y) const;
  double objective(const Vector& x, const Vector& y) const;
};

/// Two-block problems are the s = t = 1 case.
using TwoBlockProblem = MultiBlockProblem;

enum class BlockRecipe {
  Auto,        // Prox/Linearized for a nonsmooth first block, Direct otherwise
  Prox,        // closed-form proximal map; diagonal block required
  Linearized,  // S_i = lambda_max I - block, scalar metric
  Direct,      // Cholesky of the block
  Pcg,         // warm-started PCG with a truncated-eigenvalue preconditioner
  Truncated,   // S_i from the truncated eigenvalues, closed-form inverse
};

const char* to_string(BlockRecipe recipe);

struct BlockSetup {
  BlockRecipe recipe = BlockRecipe::Auto;
  Index rank = -1;       // truncation rank; -1 uses SolverConfig::precond_rank
  Matrix extra;          // optional PSD proximal term added to S_i
  /// Builds an exact solver for the block matrix at a given sigma; only with
  /// the Direct recipe.
  std::function<std::shared_ptr<const BlockSolver>(double sigma)> make_solver;
};

struct SigmaAdaptation {
  bool enabled = false;
  double factor = 1.25;
  double ratio = 5.0;
  int window = 50;
  double freeze_fraction = 0.25;
};

inline constexpr double kGoldenRatio = 1.6180339887498949;

struct SolverConfig {
  double sigma = 1.0;
  double tau = 1.618;
  /// Allows tau in [(1+sqrt 5)/2, 1.95]; enables the summability monitor.
  bool allow_large_tau = false;
  /// epsilon_k for inner solves; empty selects min(1, k^{-1.2}) eps0.
  std::function<double(int)> eps_schedule;
  double eps0 = -1.0;  // negative selects 1e-3 (1 + ||c||)
  double tol = 1e-6;
  int max_iter = 25000;
  double skip_factor = 1.0;
  Index precond_rank = 5;
  SigmaAdaptation sigma_adapt;
  std::vector<BlockSetup> x_setup;  // empty means Auto for every block
  std::vector<BlockSetup> y_setup;
  bool audit_certificates = true;
  int divergence_window = 1000;
  double divergence_factor = 1e6;

  void validate() const;
};

/// Dual step-length constants and the derived F, G operators.
struct StepConstants {
  double alpha = 0.0;
  double alpha_hat = 0.0;
  double beta = 0.0;
};

/// Throws DomainError unless 0 < tau < (1 + sqrt 5) / 2.
StepConstants steplength_constants(double tau);

/// F = 1/2 Sigma_f + S + (1 - alpha) sigma / 2 A A^*,
/// G = 1/2 Sigma_g + T + min(tau, 1 + tau - tau^2) alpha sigma B B^*.
std::pair<Matrix, Matrix> fg_operators(const MultiBlockProblem& problem, const Matrix& S,
                                       const Matrix& T, double sigma, double tau);

struct FgCheck {
  StepConstants constants;
  double f_min = 0.0;  // smallest eigenvalue of F
  double g_min = 0.0;
  bool passed = false;  // both above 1e-12 times the operator scale
};

/// Reports whether F and G are positive definite; never throws on failure.
FgCheck check_fg_pd(const MultiBlockProblem& problem, const Matrix& S, const Matrix& T,
                    double sigma, double tau);

/// Mtilde = Sigma_hat + sigma A A^* + Diag(Stilde_1, ..., Stilde_s) and the
/// implied sGS proximal term Shat = Diag(Stilde) + sGS(Mtilde).
struct SgsProximal {
  BlockOperator M_tilde;
  Matrix S_tilde;  // block diagonal
  Matrix S_hat;
  Matrix M_hat;    // Mtilde + sGS(Mtilde)
};
SgsProximal build_sgs_proximal(const Matrix& sigma_hat, const Matrix& adjoint, double sigma,
                               const BlockPartition& blocks,
                               const std::vector<Matrix>& stilde);

/// Constants bounding ||Mhat^{-1/2} d|| by kappa * eps for an sGS cycle run at
/// tolerance eps. With skipping factor c > 1 the first term uses 1 + c in place of 2.
struct KappaConstants {
  double inv_sqrt_diag = 0.0;  // ||Md^{-1/2}||
  double mixed = 0.0;          // ||Md^{1/2} (Md + Mu)^{-1}||
  double kappa = 0.0;
};
KappaConstants kappa_constants(const BlockOperator& M_tilde, double skip_factor = 1.0);

/// One of the two block groups (x or y) of the splitting with everything the
/// block solves need at the current sigma.
class BlockGroup {
 public:
  BlockGroup(const BlockPartition& blocks, const std::vector<SeparableFunction>& nonsmooth,
             const Matrix& sigma_hat, const Matrix& adjoint, double sigma,
             std::vector<BlockSetup> setup, Index default_rank, bool nonsmooth_first_only,
             double skip_factor, const std::string& label);

  const BlockOperator& M_tilde() const { return M_tilde_; }
  const std::vector<Matrix>& S_tilde() const { return S_tilde_; }
  const std::vector<std::shared_ptr<const BlockSolver>>& solvers() const { return solvers_; }
  const std::vector<BlockRecipe>& recipes() const { return recipes_; }
  const KappaConstants& kappa() const { return kappa_; }
  double sigma() const { return sigma_; }

  /// Dense S_hat and M_hat, computed on demand.
  SgsProximal proximal(const Matrix& sigma_hat, const Matrix& adjoint) const;
  Matrix S_tilde_matrix() const;

 private:
  BlockPartition blocks_;
  double sigma_ = 1.0;
  BlockOperator M_tilde_;
  std::vector<Matrix> S_tilde_;
  std::vector<std::shared_ptr<const BlockSolver>> solvers_;
  std::vector<BlockRecipe> recipes_;
  KappaConstants kappa_;
};

struct IterateState {
  Vector x;
  Vector y;
  Vector z;
  int k = 0;
  double summable_sum = 0.0;  // running sum of ||y^{k+1}-y^k||^2 + ||r^{k+1}||^2
};

struct StepReport {
  double eps = 0.0;
  double dx_cert = 0.0;   // ||Mhat^{-1/2} d_x||
  double dy_cert = 0.0;
  double dx_bound = 0.0;  // kappa_x * eps
  double dy_bound = 0.0;
  int inner_iterations = 0;
  int skipped = 0;
  bool certificates_ok = true;
  Vector dx;
  Vector dy;
};

/// Common interface of the iteration engines driven by solve().
class AdmmEngine {
 public:
  virtual ~AdmmEngine() = default;
  virtual const MultiBlockProblem& problem() const = 0;
  virtual IterateState initial_state() const = 0;
  virtual StepReport step(IterateState& state) = 0;
  virtual double sigma() const = 0;
  /// Rebuilds every sigma-dependent operator, factorization and constant.
  virtual void set_sigma(double sigma) = 0;
  virtual double tau() const = 0;
  virtual std::string name() const = 0;
};

/// Shared machinery of block-structured ADMM variants: block groups, linear
/// terms, multiplier update and the starting point.
class GroupedAdmmBase : public AdmmEngine {
 public:
  GroupedAdmmBase(MultiBlockProblem problem, SolverConfig config, bool nonsmooth_first_only);

  const MultiBlockProblem& problem() const override { return problem_; }
  const SolverConfig& config() const { return config_; }
  IterateState initial_state() const override;
  double sigma() const override { return config_.sigma; }
  void set_sigma(double sigma) override;
  double tau() const override { return config_.tau; }

  const BlockGroup& x_group() const { return *x_group_; }
  const BlockGroup& y_group() const { return *y_group_; }
  double eps_tilde(int k) const;

 protected:
  /// Mtilde x^k - grad f(x^k) - A (z^k + sigma (A^* x^k + B^* y^k - c)).
  Vector x_linear(const IterateState& s) const;
  /// Ntilde y^k - grad g(y^k) - B (z^k + sigma (A^* x_new + B^* y^k - c)).
  Vector y_linear(const IterateState& s, const Vector& x_new) const;
  /// z^{k+1} = z^k + tau sigma r^{k+1}; updates the summability sum.
  void finish_step(IterateState& s, Vector x_new, Vector y_new) const;

  MultiBlockProblem problem_;
  SolverConfig config_;

 private:
  void rebuild();

  bool nonsmooth_first_only_;
  double eps0_ = 0.0;
  std::unique_ptr<BlockGroup> x_group_;
  std::unique_ptr<BlockGroup> y_group_;
};

/// The inexact sGS-based majorized semi-proximal ADMM: one inexact sGS cycle
/// per block group and iteration.
class SgsImspadmm final : public GroupedAdmmBase {
 public:
  SgsImspadmm(MultiBlockProblem problem, SolverConfig config);
  StepReport step(IterateState& state) override;
  std::string name() const override { return "sgs-imspadmm"; }

  /// Last cycles, for diagnostics.
  const SweepResult& last_x_sweep() const { return last_x_; }
  const SweepResult& last_y_sweep() const { return last_y_; }

 private:
  SweepResult last_x_;
  SweepResult last_y_;
};

/// One iteration of the sGS method; thin wrapper over SgsImspadmm::step.
StepReport sgs_impadmm_step(SgsImspadmm& engine, IterateState& state);

// ---------------------------------------------------------------------------
// Reference two-block method with explicit proximal terms and pluggable inner
// solvers. Dense; meant for checking the sGS path and for small problems.

struct CompositeSubproblem {
  const Matrix& H;                // positive definite
  const Vector& linear;           // minimize theta1(u_1) + 1/2 <u, H u> - <linear, u>
  const SeparableFunction& theta1;
  const BlockPartition& blocks;
};

struct InnerSolution {
  Vector x;
  Vector d;  // element of the subdifferential of the objective at x
};

using InnerSolver = std::function<InnerSolution(const CompositeSubproblem&, double eps)>;

/// Solves a composite subproblem to roundoff: Schur reduction onto the first
/// block, then a diagonal-metric proximal step when the reduced block is
/// diagonal or accelerated proximal gradient otherwise.
InnerSolution exact_composite_solve(const CompositeSubproblem& sub, double eps = 0.0);

struct ImspadmmOperators {
  Matrix S;
  Matrix T;
  Matrix M;  // Sigma_hat_f + S + sigma A A^*
  Matrix N;  // Sigma_hat_g + T + sigma B B^*
  double sigma = 1.0;
  double tau = 1.618;
  Eigen::LLT<Matrix> M_llt;
  Eigen::LLT<Matrix> N_llt;

  static ImspadmmOperators build(const MultiBlockProblem& problem, Matrix S, Matrix T,
                                 double sigma, double tau);
};

struct ImspadmmStepInfo {
  double eps = 0.0;
  Vector dx;
  Vector dy;
  double dx_norm = 0.0;  // ||M^{-1/2} d_x||
  double dy_norm = 0.0;
};

/// One imsPADMM iteration. Each inner solution must certify
/// ||M^{-1/2} d|| <= eps (up to roundoff); ContractViolation otherwise.
ImspadmmStepInfo imspadmm_step(const MultiBlockProblem& problem, const ImspadmmOperators& ops,
                               IterateState& state, double eps, const InnerSolver& inner_x,
                               const InnerSolver& inner_y);

// ---------------------------------------------------------------------------
// Driver.

struct ResidualSummary {
  double eta = 0.0;          // stopping measure
  double constraint = 0.0;   // scaled ||A^* x + B^* y - c||
  double optimality = 0.0;   // scaled subproblem optimality residual
};

using ResidualFn = std::function<ResidualSummary(const IterateState&)>;

/// Default residual: D(w)-based, scaled by 1 + ||c||.
ResidualSummary default_residual(const MultiBlockProblem& problem, const IterateState& state);

struct CoreRecord {
  int k = 0;
  double eta = 0.0;
  double constraint = 0.0;
  double optimality = 0.0;
  double dx_cert = 0.0;
  double dy_cert = 0.0;
  double dx_bound = 0.0;
  double dy_bound = 0.0;
  int inner_iterations = 0;
  int skipped = 0;
  double sigma = 0.0;
  double seconds = 0.0;
};

struct SolveOptions {
  ResidualFn residual;  // empty selects default_residual
  std::function<void(const CoreRecord&, const IterateState&)> sink;
  std::function<void(const std::string&)> warn;  // empty writes to stderr
  bool keep_log = true;
};

struct SolveReport {
  IterateState final_state;
  bool converged = false;
  int iterations = 0;
  ResidualSummary final_residual;
  std::vector<CoreRecord> log;
  int certificate_failures = 0;
  long long inner_iterations = 0;
  long long skipped = 0;
  double final_sigma = 0.0;
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, IterateState snapshot)
      : Error(what), snapshot_(std::move(snapshot)) {}
  const IterateState& snapshot() const { return snapshot_; }

 private:
  IterateState snapshot_;
};

/// Runs engine until eta <= config.tol or max_iter iterations. Throws
/// DivergenceError when eta grows by divergence_factor over
/// divergence_window iterations or the iterate stops being finite.
SolveReport solve(AdmmEngine& engine, const SolverConfig& config, const SolveOptions& options = {});

/// Convenience overload running SgsImspadmm.
SolveReport solve(const MultiBlockProblem& problem, const SolverConfig& config,
                  const SolveOptions& options = {});

/// D(w) = dist^2(0, dp(x) + grad f(x) + A z) + dist^2(0, dq(y) + grad g(y) + B z)
///        + ||A^* x + B^* y - c||^2.
double kkt_distance(const MultiBlockProblem& problem, const Vector& x, const Vector& y,
                    const Vector& z);

}  // namespace sgsadmm
