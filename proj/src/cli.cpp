#include "sgsadmm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "sgsadmm/io.hpp"

namespace sgsadmm {

namespace {

std::string default_output(const std::string& problem_path, const std::string& suffix) {
  std::string stem = problem_path;
  const auto slash = stem.find_last_of('/');
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) stem.resize(dot);
  return stem + suffix;
}

void add_solver_options(CLI::App* cmd, RunConfig& rc, std::string& algorithm) {
  cmd->add_option("--problem", rc.problem_path, "problem JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--tol", rc.tol, "stopping tolerance on eta_qsdp")->capture_default_str();
  cmd->add_option("--max-iter", rc.max_iter, "iteration limit")->capture_default_str();
  cmd->add_option("--tau", rc.tau, "dual step length")->capture_default_str();
  cmd->add_flag("--allow-large-tau", rc.allow_large_tau,
                "permit tau in [golden ratio, 1.95] under the summability monitor");
  cmd->add_option("--sigma", rc.sigma, "initial penalty parameter")->capture_default_str();
  cmd->add_option("--eps0", rc.eps0, "inexactness scale (default 1e-3 (1 + ||c||))");
  cmd->add_option("--skip-factor", rc.skip_factor, "forward-sweep skip factor")->capture_default_str();
  cmd->add_option("--precond-rank", rc.precond_rank, "eigenpairs kept in truncated blocks")
      ->capture_default_str();
  cmd->add_option("--algorithm", algorithm, "sgs-imspadmm or spadmm-direct")
      ->check(CLI::IsMember({"sgs-imspadmm", "spadmm-direct"}))
      ->capture_default_str();
  cmd->add_flag("--adapt-sigma", rc.adapt_sigma, "balance primal and dual residuals by scaling sigma");
  cmd->add_flag("--lyapunov-fast-path", rc.lyapunov_fast_path,
                "solve Lyapunov W blocks exactly in the eigenbasis of the operand instead of by PCG");
}

void print_status(const QsdpRunResult& r) {
  const ResidualReport& f = r.final_residuals;
  std::printf("%s: %s after %d iterations, eta_qsdp = %.3e, eta_gap = %.3e, %.2f s\n",
              to_string(r.algorithm), r.report.converged ? "converged" : "not converged",
              r.report.iterations, f.eta_qsdp, f.eta_gap, r.report.seconds);
}

int exit_code_for(const QsdpRunResult& r) {
  if (!r.certificate_audit_passed) return kExitContract;
  return r.report.converged ? kExitOk : kExitNotConverged;
}

int do_solve(const RunConfig& rc) {
  const QsdpProblem problem = read_problem(rc.problem_path);
  const QsdpRunResult result = run_qsdp(problem, rc);
  const std::string summary = rc.summary_path.empty() ? default_output(rc.problem_path, ".summary.json")
                                                      : rc.summary_path;
  const std::string log = rc.log_path.empty() ? default_output(rc.problem_path, ".log.csv") : rc.log_path;
  write_json(summary, summary_json(result));
  write_csv(log, result.records);
  print_status(result);
  return exit_code_for(result);
}

int do_generate(Index n, unsigned seed, const std::string& q, const std::string& output) {
  write_problem(output, random_biq(n, seed, q_kind_from_string(q)));
  std::printf("wrote BIQ instance n = %lld (Q %s) to %s\n", static_cast<long long>(n), q.c_str(),
              output.c_str());
  return kExitOk;
}

int do_compare(const RunConfig& rc) {
  const QsdpProblem problem = read_problem(rc.problem_path);
  const std::string summary = rc.summary_path.empty() ? default_output(rc.problem_path, ".compare.json")
                                                      : rc.summary_path;
  const std::string log_stem = rc.log_path.empty() ? default_output(rc.problem_path, "") : rc.log_path;

  nlohmann::json doc = {{"version", kFormatVersion}, {"runs", nlohmann::json::array()}};
  int sgs_iterations = -1;
  int direct_iterations = -1;
  bool sgs_converged = false;
  bool direct_converged = false;
  int code = kExitOk;
  for (Algorithm alg : {Algorithm::SgsImspadmm, Algorithm::SpadmmDirect}) {
    RunConfig run = rc;
    run.algorithm = alg;
    try {
      const QsdpRunResult r = run_qsdp(problem, run);
      write_csv(log_stem + "." + to_string(alg) + ".csv", r.records);
      doc["runs"].push_back(summary_json(r));
      print_status(r);
      if (alg == Algorithm::SgsImspadmm) {
        sgs_iterations = r.report.iterations;
        sgs_converged = r.report.converged;
        code = exit_code_for(r);
      } else {
        direct_iterations = r.report.iterations;
        direct_converged = r.report.converged;
      }
    } catch (const DivergenceError& e) {
      if (alg == Algorithm::SgsImspadmm) throw;
      std::printf("%s: diverged (%s)\n", to_string(alg), e.what());
      doc["runs"].push_back({{"algorithm", to_string(alg)}, {"diverged", true}, {"message", e.what()}});
    }
  }
  if (sgs_converged && direct_converged && sgs_iterations > 0) {
    const double ratio = double(direct_iterations) / double(sgs_iterations);
    doc["iteration_ratio"] = ratio;
    std::printf("iteration ratio spadmm-direct / sgs-imspadmm: %.3f (%d / %d)\n", ratio,
                direct_iterations, sgs_iterations);
  } else {
    doc["iteration_ratio"] = nullptr;
    std::printf("iteration ratio spadmm-direct / sgs-imspadmm: undefined (a run did not converge)\n");
  }
  write_json(summary, doc);
  return code;
}

int do_diagnose(const RunConfig& rc) {
  const QsdpProblem problem = read_problem(rc.problem_path);
  std::optional<IterateState> reference;
  if (!rc.reference_path.empty()) reference = state_from_summary(read_json(rc.reference_path));
  const DiagnoseResult d = diagnose_qsdp(problem, rc, reference);
  const std::string log = rc.log_path.empty() ? default_output(rc.problem_path, ".diagnose.csv")
                                              : rc.log_path;
  const std::string summary = rc.summary_path.empty()
                                  ? default_output(rc.problem_path, ".diagnose.json")
                                  : rc.summary_path;
  FILE* fp = std::fopen(log.c_str(), "w");
  if (!fp) throw Error("cannot open '" + log + "' for writing");
  std::fprintf(fp, "k,Dw,k_min_Dw,phi\n");
  int phi_increases = 0;
  double phi_max_increase = 0.0;
  for (size_t i = 0; i < d.run.records.size(); ++i) {
    const double phi = i < d.phi.size() ? d.phi[i] : std::nan("");
    if (i > 0 && i < d.phi.size() && d.phi[i] > d.phi[i - 1]) {
      ++phi_increases;
      phi_max_increase = std::max(phi_max_increase, d.phi[i] - d.phi[i - 1]);
    }
    std::fprintf(fp, "%d,%.17g,%.17g,%.17g\n", d.run.records[i].k, d.run.records[i].Dw,
                 i == 0 || d.trend.series.empty() ? std::nan("") : d.trend.series[i - 1], phi);
  }
  std::fclose(fp);
  nlohmann::json doc = summary_json(d.run);
  doc["trend"] = {{"final", d.trend.final_value},
                  {"at_tenth", d.trend.tenth_value},
                  {"decreasing", d.trend.decreasing}};
  if (reference && !d.phi.empty()) {
    doc["phi"] = {{"first", d.phi.front()},
                  {"last", d.phi.back()},
                  {"increases", phi_increases},
                  {"max_increase", phi_max_increase}};
  }
  write_json(summary, doc);
  print_status(d.run);
  std::printf("k * min D: %.3e at k = K/10, %.3e at k = K (%s)\n", d.trend.tenth_value,
              d.trend.final_value, d.trend.decreasing ? "decreasing" : "not decreasing");
  if (reference && !d.phi.empty()) {
    std::printf("phi_k: %.3e -> %.3e, %d increases (largest %.3e)\n", d.phi.front(), d.phi.back(),
                phi_increases, phi_max_increase);
  }
  return exit_code_for(d.run);
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Inexact sGS-based semi-proximal ADMM for QSDP dual problems"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string algorithm = "sgs-imspadmm";

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve a problem file");
  add_solver_options(solve_cmd, rc, algorithm);
  solve_cmd->add_option("--summary", rc.summary_path, "summary JSON (default <problem>.summary.json)");
  solve_cmd->add_option("--log", rc.log_path, "iteration CSV (default <problem>.log.csv)");

  CLI::App* compare_cmd = app.add_subcommand("compare", "run both algorithms from the same start");
  add_solver_options(compare_cmd, rc, algorithm);
  compare_cmd->add_option("--summary", rc.summary_path, "comparison JSON (default <problem>.compare.json)");
  compare_cmd->add_option("--log", rc.log_path, "CSV path stem; one file per algorithm");

  CLI::App* diag_cmd = app.add_subcommand("diagnose", "complexity trend and potential along the iterates");
  add_solver_options(diag_cmd, rc, algorithm);
  diag_cmd->add_option("--reference", rc.reference_path,
                       "summary JSON whose final_state is used as the reference point")
      ->check(CLI::ExistingFile);
  diag_cmd->add_option("--summary", rc.summary_path, "summary JSON (default <problem>.diagnose.json)");
  diag_cmd->add_option("--log", rc.log_path, "diagnostic CSV (default <problem>.diagnose.csv)");

  Index n = 0;
  unsigned seed = 0;
  std::string q = "none";
  std::string output;
  CLI::App* gen_cmd = app.add_subcommand("generate-biq", "write a random BIQ relaxation");
  gen_cmd->add_option("--n", n, "matrix order (n >= 3)")->required()->check(CLI::Range(3, 100000));
  gen_cmd->add_option("--seed", seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--q", q, "none, explicit, sym-kronecker or lyapunov")
      ->check(CLI::IsMember({"none", "linear", "vacuous", "explicit", "sym-kronecker", "lyapunov"}))
      ->capture_default_str();
  gen_cmd->add_option("--output", output, "output problem JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    rc.algorithm = algorithm_from_string(algorithm);
    if (*solve_cmd || *compare_cmd || *diag_cmd) rc.validate();
    if (*solve_cmd) return do_solve(rc);
    if (*compare_cmd) return do_compare(rc);
    if (*diag_cmd) return do_diagnose(rc);
    return do_generate(n, seed, q, output);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "contract violation: %s\n", e.what());
    return kExitContract;
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitUsage;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitUsage;
  } catch (const UnsupportedError& e) {
    std::fprintf(stderr, "unsupported: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}

}  // namespace sgsadmm
