#include "sgsadmm/sgs_cycle.hpp"

#include <cmath>
#include <sstream>

namespace sgsadmm {

namespace {

void check_objective(const QuadraticBlockObjective& obj, const BlockVector& u_minus) {
  const BlockPartition& part = obj.H.partition();
  if (!(u_minus.partition() == part)) {
    throw StructuralError("sgs_cycle: starting point does not match the operator partition");
  }
  if (obj.b.size() != part.total()) throw StructuralError("sgs_cycle: linear term has wrong length");
  if (!obj.theta1.is_zero() && obj.theta1.dim() != part.size(0)) {
    throw StructuralError("sgs_cycle: theta_1 does not match the first block");
  }
  if (obj.solvers.size() > static_cast<size_t>(part.num_blocks())) {
    throw StructuralError("sgs_cycle: more block solvers than blocks");
  }
}

// b_i - sum_{j != i} H_ij u_j
Vector block_rhs(const QuadraticBlockObjective& obj, const Vector& u, Index i) {
  const BlockPartition& part = obj.H.partition();
  Vector rhs = obj.b.segment(part.offset(i), part.size(i));
  for (Index j = 0; j < part.num_blocks(); ++j) {
    if (j == i) continue;
    rhs.noalias() -= obj.H.block(i, j) * u.segment(part.offset(j), part.size(j));
  }
  return rhs;
}

const BlockSolver* solver_for(const QuadraticBlockObjective& obj, Index i) {
  const auto idx = static_cast<size_t>(i);
  return idx < obj.solvers.size() ? obj.solvers[idx].get() : nullptr;
}

Vector solve_block(const QuadraticBlockObjective& obj, Index i, const Vector& rhs,
                   const Vector& warm, double tol, CgStats& stats) {
  if (const BlockSolver* s = solver_for(obj, i)) {
    Vector x = s->solve(rhs, warm, tol, stats);
    if (!s->exact()) {
      const double res = (obj.H.block(i, i) * x - rhs).norm();
      const double floor = 1e-12 * std::max(1.0, rhs.norm());
      if (res > std::max(tol, floor)) {
        std::ostringstream msg;
        msg << "inner solve of block " << i << " stopped at residual " << res
            << " above the tolerance " << tol << " after " << stats.iterations << " iterations";
        throw ContractViolation(msg.str());
      }
    }
    return x;
  }
  stats = CgStats{};
  stats.converged = true;
  return obj.H.solve_diagonal(i, rhs);
}

}  // namespace

SweepResult sgs_cycle(const QuadraticBlockObjective& obj, const BlockVector& u_minus,
                      double inner_tol, double skip_factor) {
  check_objective(obj, u_minus);
  if (inner_tol < 0.0) throw DomainError("sgs_cycle: inner tolerance must be nonnegative");
  if (skip_factor < 0.0) throw DomainError("sgs_cycle: skip factor must be nonnegative");
  const BlockPartition& part = obj.H.partition();
  const Index s = part.num_blocks();

  SweepResult out;
  out.u_tilde = BlockVector::zeros(part);
  out.delta_tilde = BlockVector::zeros(part);
  out.delta = BlockVector::zeros(part);
  out.backward_stats.assign(static_cast<size_t>(s), CgStats{});
  out.forward_stats.assign(static_cast<size_t>(s), CgStats{});

  // Working vector: blocks < i hold u_minus, blocks > i hold u_tilde.
  Vector work = u_minus.data();
  for (Index i = s - 1; i >= 1; --i) {
    const Vector rhs = block_rhs(obj, work, i);
    CgStats& st = out.backward_stats[static_cast<size_t>(i)];
    Vector ui = solve_block(obj, i, rhs, u_minus.block(i), inner_tol, st);
    out.delta_tilde.block(i) = obj.H.block(i, i) * ui - rhs;
    out.u_tilde.block(i) = ui;
    work.segment(part.offset(i), part.size(i)) = ui;
    out.inner_iterations += st.iterations;
  }

  // Block 1 with the remaining blocks at u_tilde.
  {
    const Vector rhs = block_rhs(obj, work, 0);
    Vector u1;
    if (obj.theta1.is_zero()) {
      CgStats& st = out.forward_stats[0];
      u1 = solve_block(obj, 0, rhs, u_minus.block(0), inner_tol, st);
      out.inner_iterations += st.iterations;
      out.delta.block(0) = obj.H.block(0, 0) * u1 - rhs;
    } else {
      const Matrix H11 = obj.H.block(0, 0);
      const Vector metric = diagonal_metric(H11);
      if ((metric.array() <= 0.0).any()) {
        throw NumericalError("diagonal block 0 is not positive definite (singular H_ii)");
      }
      u1 = obj.theta1.prox(rhs.cwiseQuotient(metric), metric);
      // Exact proximal step: the residual is zero by construction.
      out.delta.block(0).setZero();
    }
    out.delta_tilde.block(0) = out.delta.block(0);
    work.segment(part.offset(0), part.size(0)) = u1;
  }

  // Forward sweep: blocks < i hold u_plus, blocks > i hold u_tilde.
  for (Index i = 1; i < s; ++i) {
    const Vector rhs = block_rhs(obj, work, i);
    const auto ti = out.u_tilde.block(i);
    bool skip = false;
    if (skip_factor > 0.0) {
      Vector candidate = out.delta_tilde.block(i);
      for (Index j = 0; j < i; ++j) {
        candidate.noalias() += obj.H.block(i, j) * (work.segment(part.offset(j), part.size(j)) -
                                                    u_minus.block(j));
      }
      skip = candidate.norm() <= skip_factor * inner_tol;
    }
    Vector ui;
    if (skip) {
      ui = ti;
      out.skipped.push_back(i);
    } else {
      CgStats& st = out.forward_stats[static_cast<size_t>(i)];
      ui = solve_block(obj, i, rhs, ti, inner_tol, st);
      out.inner_iterations += st.iterations;
    }
    out.delta.block(i) = obj.H.block(i, i) * ui - rhs;
    work.segment(part.offset(i), part.size(i)) = ui;
  }

  out.u_plus = BlockVector(part, work);
  out.d = assemble_error(out.delta_tilde, out.delta, obj.H);
  return out;
}

BlockVector assemble_error(const BlockVector& delta_tilde, const BlockVector& delta,
                           const BlockOperator& H) {
  const BlockPartition& part = H.partition();
  if (!(delta_tilde.partition() == part) || !(delta.partition() == part)) {
    throw StructuralError("assemble_error: residuals do not match the operator partition");
  }
  const double gap = (delta_tilde.block(0) - delta.block(0)).norm();
  if (gap > 1e-14 * std::max(1.0, delta.block(0).norm())) {
    throw ContractViolation("assemble_error: first-block residuals differ (delta_tilde_1 != delta_1)");
  }
  const Index s = part.num_blocks();
  std::vector<Vector> t(static_cast<size_t>(s));
  for (Index j = 1; j < s; ++j) {
    t[static_cast<size_t>(j)] = H.solve_diagonal(j, delta.block(j) - delta_tilde.block(j));
  }
  BlockVector d(part, delta.data());
  for (Index i = 0; i < s; ++i) {
    for (Index j = i + 1; j < s; ++j) d.block(i) += H.block(i, j) * t[static_cast<size_t>(j)];
  }
  return d;
}

double error_bound(const BlockVector& delta_tilde, const BlockVector& delta,
                   const BlockOperator& H) {
  const BlockPartition& part = H.partition();
  if (!(delta_tilde.partition() == part) || !(delta.partition() == part)) {
    throw StructuralError("error_bound: residuals do not match the operator partition");
  }
  double first = 0.0;
  for (Index i = 0; i < part.num_blocks(); ++i) {
    const Vector e = delta.block(i) - delta_tilde.block(i);
    if (e.squaredNorm() == 0.0) continue;
    first += std::max(0.0, e.dot(H.solve_diagonal(i, e)));
  }
  const BlockVector w(part, upper_block_solve(H, delta_tilde.data()));
  double second = 0.0;
  for (Index i = 0; i < part.num_blocks(); ++i) {
    second += std::max(0.0, w.block(i).dot(H.block(i, i) * w.block(i)));
  }
  return std::sqrt(first) + std::sqrt(second);
}

}  // namespace sgsadmm
