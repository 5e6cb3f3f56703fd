#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgsadmm/admm_core.hpp"
#include "sgsadmm/conic_qsdp.hpp"

namespace sgsadmm {

enum class Algorithm { SgsImspadmm, SpadmmDirect };

const char* to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

struct RunConfig {
  std::string mode = "solve";
  std::string problem_path;
  std::string summary_path;
  std::string log_path;
  std::string reference_path;
  double tol = 1e-6;
  int max_iter = 25000;
  double tau = 1.618;
  bool allow_large_tau = false;
  double sigma = 1.0;
  double eps0 = -1.0;
  double skip_factor = 1.0;
  Index precond_rank = 5;
  unsigned seed = 0;
  Algorithm algorithm = Algorithm::SgsImspadmm;
  bool adapt_sigma = false;
  bool lyapunov_fast_path = false;

  /// Throws DomainError unless tol > 0 and the numeric fields are in range.
  void validate() const;
  SolverConfig solver_config() const;
};

struct IterationRecord {
  int k = 0;
  double eta_D = 0.0;
  double eta_P = 0.0;
  double eta_X = 0.0;
  double eta_Z = 0.0;
  double eta_W = 0.0;
  double eta_S = 0.0;
  double eta_I = 0.0;
  double eta_qsdp = 0.0;
  double eta_gap = 0.0;
  double Dw = 0.0;
  double dx_cert = 0.0;
  double dy_cert = 0.0;
  long long pcg_iters = 0;
  long long skipped = 0;
  double sigma = 0.0;
  double time_s = 0.0;
  double dx_bound = 0.0;
  double dy_bound = 0.0;

  bool operator==(const IterationRecord& other) const = default;
};

/// Directly extended multi-block sPADMM: one Gauss-Seidel pass over all x
/// blocks and then all y blocks, each solved exactly, followed by the
/// multiplier update. Convergence is not guaranteed for three or more blocks.
class DirectExtendedSpadmm final : public GroupedAdmmBase {
 public:
  DirectExtendedSpadmm(MultiBlockProblem problem, SolverConfig config);
  StepReport step(IterateState& state) override;
  std::string name() const override { return "spadmm-direct"; }
};

StepReport baseline_spadmm_step(DirectExtendedSpadmm& engine, IterateState& state);

struct TrendReport {
  std::vector<double> series;  // k * min_{1<=i<=k} D_i, k = 1..K
  double final_value = 0.0;
  double tenth_value = 0.0;    // value at k = max(1, K/10)
  bool decreasing = false;     // final_value <= tenth_value
};

/// D values are D(w^1), D(w^2), ...; throws DomainError on an empty log.
TrendReport complexity_trend(const std::vector<double>& D_values);

/// phi_k(wbar) for iterate k with proximal terms S, T.
double phi_potential(const MultiBlockProblem& problem, const Matrix& S, const Matrix& T,
                     double sigma, double tau, const IterateState& reference,
                     const IterateState& current, const Vector& y_previous);

struct QsdpRunResult {
  Algorithm algorithm = Algorithm::SgsImspadmm;
  SolveReport report;
  std::vector<IterationRecord> records;
  ResidualReport final_residuals;
  DualIterate final_point;
  bool certificate_audit_passed = true;
  double alpha = 1.0;
};

/// Called after every iteration with the engine, the new state and its record.
using RunObserver =
    std::function<void(const GroupedAdmmBase&, const IterateState&, const IterationRecord&)>;

/// Solves a QSDP with the selected algorithm, logging one record per iteration.
QsdpRunResult run_qsdp(const QsdpProblem& problem, const RunConfig& config,
                       const RunObserver& observer = {});

struct DiagnoseResult {
  QsdpRunResult run;
  std::vector<double> phi;  // empty without a reference point
  TrendReport trend;
};

/// Runs the sGS method and reports k * min D and, given a reference point in
/// the solver's own variables, the potential phi_k along the iterates.
DiagnoseResult diagnose_qsdp(const QsdpProblem& problem, const RunConfig& config,
                             const std::optional<IterateState>& reference);

/// Random BIQ instance of order n: integer Qbar and c, plus a Q of the given
/// kind with small random operands.
QsdpProblem random_biq(Index n, unsigned seed, QKind kind);

}  // namespace sgsadmm
