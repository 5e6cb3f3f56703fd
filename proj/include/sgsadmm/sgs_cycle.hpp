#pragma once

#include <memory>
#include <vector>

#include "sgsadmm/blockops.hpp"
#include "sgsadmm/proxlib.hpp"
#include "sgsadmm/subsolve.hpp"

namespace sgsadmm {

/// min_u theta_1(u_1) + 1/2 <u, H u> - <b, u>
///
/// theta_1 acts on the first block only. When it is nonzero, H_11 must be
/// diagonal (scalar for the PSD kind) so the block-1 step is a closed-form
/// proximal map. solvers[i] (optional) replaces the Cholesky solve of block i.
struct QuadraticBlockObjective {
  const BlockOperator& H;
  Vector b;
  SeparableFunction theta1;
  std::vector<std::shared_ptr<const BlockSolver>> solvers;
};

struct SweepResult {
  BlockVector u_plus;
  BlockVector u_tilde;      // backward-sweep values; block 0 unused
  BlockVector delta_tilde;  // backward residuals; block 0 equals delta's block 0
  BlockVector delta;        // forward residuals
  BlockVector d;            // assembled error vector
  std::vector<CgStats> backward_stats;
  std::vector<CgStats> forward_stats;
  std::vector<Index> skipped;  // forward-sweep blocks that reused u_tilde
  int inner_iterations = 0;
};

/// One symmetric Gauss-Seidel cycle started at u_minus. Each block solve i >= 1
/// must satisfy ||residual|| <= inner_tol (exact solvers are not checked).
/// A forward solve of block i is skipped when the candidate residual
/// delta_tilde_i + sum_{j<i} H_ij (u_plus_j - u_minus_j) has norm at most
/// skip_factor * inner_tol; skip_factor = 0 disables skipping.
SweepResult sgs_cycle(const QuadraticBlockObjective& objective, const BlockVector& u_minus,
                      double inner_tol, double skip_factor = 0.0);

/// d = delta + H_u H_d^{-1} (delta - delta_tilde). Requires delta_tilde_1 = delta_1.
BlockVector assemble_error(const BlockVector& delta_tilde, const BlockVector& delta,
                           const BlockOperator& H);

/// ||H_d^{-1/2}(delta - delta_tilde)|| + ||H_d^{1/2}(H_d + H_u)^{-1} delta_tilde||,
/// an upper bound for ||Hhat^{-1/2} d||.
double error_bound(const BlockVector& delta_tilde, const BlockVector& delta,
                   const BlockOperator& H);

}  // namespace sgsadmm
