#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <Eigen/Dense>

#include "sgsadmm/cli.hpp"
#include "sgsadmm/harness.hpp"
#include "sgsadmm/io.hpp"
#include "test_util.hpp"

using namespace sgsadmm;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("sgsadmm_harness_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string scratch(const std::string& name) { return (scratch_dir() / name).string(); }

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sgsadmm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

MultiBlockProblem small_qp(std::mt19937& rng, bool nonneg_first) {
  MultiBlockProblem pb;
  pb.x_blocks = BlockPartition({3});
  pb.y_blocks = BlockPartition({2});
  pb.p = {nonneg_first ? SeparableFunction({SimpleFunctionSpec::indicator_nonneg(3)})
                       : SeparableFunction::zero(3)};
  pb.q = {SeparableFunction::zero(2)};
  pb.f = SmoothFunction::quadratic(random_spd(rng, 3, 0.5), random_vector(rng, 3));
  pb.g = SmoothFunction::quadratic(random_spd(rng, 2, 0.5), random_vector(rng, 2));
  pb.A_adj = random_matrix(rng, 3, 3);
  pb.B_adj = random_matrix(rng, 3, 2);
  pb.c = random_vector(rng, 3);
  return pb;
}

}  // namespace

TEST_CASE("kkt_distance on a one-dimensional problem") {
  MultiBlockProblem pb;
  pb.x_blocks = BlockPartition({1});
  pb.y_blocks = BlockPartition({1});
  pb.p = {SeparableFunction({SimpleFunctionSpec::indicator_nonneg(1)})};
  pb.q = {SeparableFunction::zero(1)};
  pb.f = SmoothFunction::linear(Vector::Constant(1, 2.0));
  pb.g = SmoothFunction::zero(1);
  pb.A_adj = Matrix::Ones(1, 1);
  pb.B_adj = Matrix::Ones(1, 1);
  pb.c = Vector::Constant(1, 1.0);
  const Vector x1 = Vector::Constant(1, 0.5), y1 = Vector::Constant(1, 0.5);
  // Interior x: full dual residual g = 2 + z on x and z on y.
  const Vector z = Vector::Constant(1, -0.5);
  CHECK(kkt_distance(pb, x1, y1, z) == doctest::Approx(1.5 * 1.5 + 0.25));
  // At x = 0 a positive dual residual lies in the normal cone and drops out.
  const Vector x0 = Vector::Zero(1), y0 = Vector::Ones(1);
  CHECK(kkt_distance(pb, x0, y0, z) == doctest::Approx(0.25));
  // A negative one does not.
  const Vector zneg = Vector::Constant(1, -3.0);
  CHECK(kkt_distance(pb, x0, y0, zneg) == doctest::Approx(1.0 + 9.0));
  CHECK(kkt_distance(pb, x1, y1, z) == kkt_distance(pb, x1, y1, z));
}

TEST_CASE("complexity trend") {
  const TrendReport flat = complexity_trend(std::vector<double>(100, 2.0));
  CHECK(flat.series.size() == 100);
  CHECK(flat.series[9] == doctest::Approx(20.0));
  CHECK(flat.final_value == doctest::Approx(200.0));
  CHECK_FALSE(flat.decreasing);

  std::vector<double> sq;
  for (int i = 1; i <= 200; ++i) sq.push_back(1.0 / (double(i) * i));
  const TrendReport dec = complexity_trend(sq);
  for (size_t k = 1; k <= sq.size(); ++k) CHECK(dec.series[k - 1] == doctest::Approx(1.0 / double(k)));
  CHECK(dec.tenth_value == doctest::Approx(1.0 / 20.0));
  CHECK(dec.decreasing);

  // The running minimum ignores later increases.
  const TrendReport bump = complexity_trend({1.0, 0.1, 5.0});
  CHECK(bump.series[2] == doctest::Approx(0.3));
  CHECK_THROWS_AS(complexity_trend({}), DomainError);
}

TEST_CASE("phi potential") {
  std::mt19937 rng(81);
  MultiBlockProblem pb = small_qp(rng, false);
  const IterateState ref{random_vector(rng, 3), random_vector(rng, 2), random_vector(rng, 3)};
  pb.c = pb.A_adj * ref.x + pb.B_adj * ref.y;
  const Matrix S = Matrix::Zero(3, 3), T = Matrix::Zero(2, 2);
  CHECK(phi_potential(pb, S, T, 1.0, 1.618, ref, ref, ref.y) <= 1e-20);
  // Direct evaluation at a random iterate.
  IterateState cur{random_vector(rng, 3), random_vector(rng, 2), random_vector(rng, 3)};
  const Vector yprev = random_vector(rng, 2);
  const double sigma = 0.7, tau = 1.2;
  const StepConstants sc = steplength_constants(tau);
  const double ahat = sc.alpha_hat, alpha = sc.alpha;
  const Matrix F = pb.f.sigma_hat, G = pb.g.sigma_hat;
  const Vector dx = ref.x - cur.x, dy = ref.y - cur.y, dyp = cur.y - yprev;
  const double expect = (ref.z - cur.z).squaredNorm() / (tau * sigma) + dx.dot(F * dx) +
                        dy.dot(G * dy) + sigma * pb.residual(ref.x, cur.y).squaredNorm() +
                        ahat * sigma * pb.residual(cur.x, cur.y).squaredNorm() + alpha * dyp.dot(G * dyp);
  CHECK(phi_potential(pb, S, T, sigma, tau, ref, cur, yprev) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("two-block baseline coincides with exact imsPADMM") {
  std::mt19937 rng(82);
  for (bool nonneg : {false, true}) {
    const MultiBlockProblem pb = small_qp(rng, nonneg);
    SolverConfig cfg;
    DirectExtendedSpadmm base(pb, cfg);
    const ImspadmmOperators ops = ImspadmmOperators::build(
        pb, base.x_group().S_tilde_matrix(), base.y_group().S_tilde_matrix(), cfg.sigma, cfg.tau);
    const InnerSolver exact = [](const CompositeSubproblem& s, double e) {
      return exact_composite_solve(s, e);
    };
    IterateState a = base.initial_state();
    IterateState b = a;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      baseline_spadmm_step(base, a);
      imspadmm_step(pb, ops, b, 0.0, exact, exact);
      worst = std::max({worst, (a.x - b.x).norm(), (a.y - b.y).norm(), (a.z - b.z).norm()});
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("baseline fixed point and recipe restrictions") {
  std::mt19937 rng(83);
  const MultiBlockProblem pb = small_qp(rng, false);
  // KKT point by a dense solve.
  Matrix K = Matrix::Zero(8, 8);
  K.block(0, 0, 3, 3) = pb.f.sigma_hat;
  K.block(3, 3, 2, 2) = pb.g.sigma_hat;
  K.block(0, 5, 3, 3) = pb.A_adj.transpose();
  K.block(3, 5, 2, 3) = pb.B_adj.transpose();
  K.block(5, 0, 3, 3) = pb.A_adj;
  K.block(5, 3, 3, 2) = pb.B_adj;
  Vector rhs(8);
  rhs << -pb.f.grad(Vector::Zero(3)), -pb.g.grad(Vector::Zero(2)), pb.c;
  const Vector w = K.fullPivLu().solve(rhs);
  IterateState s{w.head(3), w.segment(3, 2), w.tail(3)};
  DirectExtendedSpadmm base(pb, SolverConfig{});
  IterateState t = s;
  for (int k = 0; k < 3; ++k) baseline_spadmm_step(base, t);
  CHECK((t.x - s.x).norm() <= 1e-10);
  CHECK((t.y - s.y).norm() <= 1e-10);
  CHECK((t.z - s.z).norm() <= 1e-10);

  SolverConfig pcg;
  pcg.x_setup = {BlockSetup{BlockRecipe::Pcg, 1}};
  CHECK_THROWS_AS(DirectExtendedSpadmm(pb, pcg), UnsupportedError);
}

TEST_CASE("QSDP runs of both algorithms on an n = 6 BIQ instance") {
  const QsdpProblem pb = random_biq(6, 3, QKind::Vacuous);
  for (Algorithm alg : {Algorithm::SgsImspadmm, Algorithm::SpadmmDirect}) {
    RunConfig rc;
    rc.algorithm = alg;
    int last_k = -1;
    const QsdpRunResult r = run_qsdp(pb, rc, [&](const GroupedAdmmBase&, const IterateState&,
                                                 const IterationRecord& rec) {
      CHECK(rec.k > last_k);
      last_k = rec.k;
    });
    INFO(to_string(alg));
    CHECK(r.report.converged);
    CHECK(r.final_residuals.eta_qsdp <= 1e-6);
    CHECK(r.records.back().k == r.report.iterations);
    // The residuals of the final point recomputed from the problem data.
    const ResidualReport again = kkt_residuals(pb, r.final_point);
    CHECK(again.eta_qsdp == doctest::Approx(r.final_residuals.eta_qsdp).epsilon(1e-12));
    if (alg == Algorithm::SgsImspadmm) {
      CHECK(r.certificate_audit_passed);
      for (const auto& rec : r.records) {
        CHECK(rec.dx_cert <= rec.dx_bound * (1 + 1e-9) + 1e-14);
        CHECK(rec.dy_cert <= rec.dy_bound * (1 + 1e-9) + 1e-14);
      }
    }
  }
}

TEST_CASE("run configuration validation") {
  RunConfig rc;
  CHECK_NOTHROW(rc.validate());
  rc.tol = 0.0;
  CHECK_THROWS_AS(rc.validate(), DomainError);
  rc = RunConfig{};
  rc.max_iter = -1;
  CHECK_THROWS_AS(rc.validate(), DomainError);
  rc.max_iter = 0;
  CHECK_NOTHROW(rc.validate());
  CHECK(algorithm_from_string("spadmm-direct") == Algorithm::SpadmmDirect);
  CHECK_THROWS(algorithm_from_string("newton"));
}

TEST_CASE("problem files round trip") {
  for (QKind kind : {QKind::Vacuous, QKind::Explicit, QKind::SymKronecker, QKind::Lyapunov}) {
    const QsdpProblem pb = random_biq(5, 11, kind);
    const std::string path = scratch(std::string("p_") + to_string(kind) + ".json");
    write_problem(path, pb);
    const QsdpProblem back = read_problem(path);
    CHECK(back.n() == pb.n());
    CHECK(back.Q().kind == kind);
    CHECK((back.C() - pb.C()).norm() == 0.0);
    CHECK((back.A_E() - pb.A_E()).norm() == 0.0);
    CHECK((back.A_I() - pb.A_I()).norm() == 0.0);
    CHECK((back.b_E() - pb.b_E()).norm() == 0.0);
    CHECK((back.b_I() - pb.b_I()).norm() == 0.0);
    CHECK((back.Q_svec() - pb.Q_svec()).norm() <= 1e-14 * std::max(1.0, pb.Q_svec().norm()));
    CHECK(back.box().lower == pb.box().lower);
    CHECK(back.box().upper == pb.box().upper);
  }
}

TEST_CASE("box bounds with infinities and finite entries survive a round trip") {
  Matrix lo = Matrix::Constant(2, 2, -kInfinity);
  Matrix hi = Matrix::Constant(2, 2, kInfinity);
  lo(0, 0) = 0.0;
  hi(0, 1) = hi(1, 0) = 3.0;
  SvecConstraints none;
  none.b = Vector::Zero(0);
  const QsdpProblem pb(2, QOperatorSpec::vacuous(2), Matrix::Identity(2, 2), none, none, BoxSet{lo, hi});
  const QsdpProblem back = problem_from_json(problem_to_json(pb));
  CHECK(back.box().lower == lo);
  CHECK(back.box().upper == hi);
}

TEST_CASE("malformed problem files are rejected") {
  nlohmann::json doc = problem_to_json(random_biq(4, 1, QKind::Vacuous));
  nlohmann::json wrong_version = doc;
  wrong_version["version"] = "sgs-admm/0";
  CHECK_THROWS_AS(problem_from_json(wrong_version), StructuralError);
  nlohmann::json no_n = doc;
  no_n.erase("n");
  CHECK_THROWS_AS(problem_from_json(no_n), StructuralError);
  nlohmann::json bad_type = doc;
  bad_type["n"] = "four";
  CHECK_THROWS_AS(problem_from_json(bad_type), StructuralError);
  const std::string path = scratch("garbage.json");
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(read_problem(path), StructuralError);
  CHECK_THROWS_AS(read_problem(scratch("missing.json")), Error);
}

TEST_CASE("summary and CSV round trips") {
  const QsdpProblem pb = random_biq(5, 2, QKind::Lyapunov);
  RunConfig rc;
  rc.max_iter = 40;
  const QsdpRunResult r = run_qsdp(pb, rc);
  const nlohmann::json doc = summary_json(r);
  CHECK(doc["version"] == kFormatVersion);
  CHECK(doc["iterations"] == r.report.iterations);
  CHECK(doc["eta"]["eta_qsdp"].get<double>() == r.final_residuals.eta_qsdp);
  const std::string spath = scratch("summary.json");
  write_json(spath, doc);
  const IterateState s = state_from_summary(read_json(spath));
  CHECK(s.x == r.report.final_state.x);
  CHECK(s.y == r.report.final_state.y);
  CHECK(s.z == r.report.final_state.z);

  const std::string cpath = scratch("log.csv");
  write_csv(cpath, r.records);
  const std::vector<IterationRecord> back = read_csv(cpath);
  REQUIRE(back.size() == r.records.size());
  for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == r.records[i]);

  std::ifstream in(cpath);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("k,eta_D,eta_P,eta_X,eta_Z,eta_W,eta_S,eta_I,eta_qsdp,eta_gap,Dw,dx_cert,dy_cert,"
                     "pcg_iters,skipped,sigma,time_s",
                     0) == 0);
  const std::string bad = scratch("bad.csv");
  std::ofstream(bad) << "k,eta\n1,2\n";
  CHECK_THROWS_AS(read_csv(bad), StructuralError);
}

TEST_CASE("command line: generate, solve, compare, diagnose") {
  const std::string prob = scratch("cli_biq.json");
  REQUIRE(run_cli({"generate-biq", "--n", "6", "--seed", "7", "--output", prob}) == kExitOk);
  const QsdpProblem pb = read_problem(prob);
  CHECK(pb.m_E() == 6);
  CHECK(pb.m_I() == 30);

  const std::string summary = scratch("cli.summary.json");
  const std::string log = scratch("cli.log.csv");
  CHECK(run_cli({"solve", "--problem", prob, "--tol", "1e-6", "--tau", "1.618", "--summary", summary,
                 "--log", log}) == kExitOk);
  const nlohmann::json doc = read_json(summary);
  CHECK(doc["converged"] == true);
  CHECK(doc["eta"]["eta_qsdp"].get<double>() <= 1e-6);
  CHECK(doc["certificate_audit"] == "pass");
  CHECK(read_csv(log).size() == static_cast<size_t>(doc["iterations"].get<int>()) + 1);

  const std::string cmp = scratch("cli.compare.json");
  CHECK(run_cli({"compare", "--problem", prob, "--summary", cmp, "--log", scratch("cli_cmp")}) ==
        kExitOk);
  const nlohmann::json c = read_json(cmp);
  CHECK(c["runs"].size() == 2);
  CHECK(c["iteration_ratio"].is_number());
  CHECK(fs::exists(scratch("cli_cmp.sgs-imspadmm.csv")));
  CHECK(fs::exists(scratch("cli_cmp.spadmm-direct.csv")));

  const std::string dj = scratch("cli.diagnose.json");
  CHECK(run_cli({"diagnose", "--problem", prob, "--reference", summary, "--summary", dj, "--log",
                 scratch("cli.diagnose.csv")}) == kExitOk);
  const nlohmann::json d = read_json(dj);
  CHECK(d["trend"]["decreasing"] == true);
  CHECK(d.contains("phi"));
}

TEST_CASE("command line exit codes") {
  const std::string prob = scratch("codes.json");
  REQUIRE(run_cli({"generate-biq", "--n", "5", "--output", prob}) == kExitOk);
  CHECK(run_cli({"solve", "--problem", prob, "--bogus"}) == kExitUsage);
  CHECK(run_cli({}) == kExitUsage);
  CHECK(run_cli({"solve", "--problem", prob, "--tol", "0"}) == kExitUsage);
  CHECK(run_cli({"solve", "--problem", prob, "--tol", "-1"}) == kExitUsage);
  CHECK(run_cli({"solve", "--problem", prob, "--tau", "1.7"}) == kExitUsage);
  CHECK(run_cli({"solve", "--problem", scratch("nope.json")}) == kExitUsage);
  CHECK(run_cli({"generate-biq", "--n", "2", "--output", prob}) == kExitUsage);
  CHECK(run_cli({"solve", "--problem", prob, "--max-iter", "10", "--summary", scratch("short.json"),
                 "--log", scratch("short.csv")}) == kExitNotConverged);
  const std::string garbage = scratch("garbage_problem.json");
  std::ofstream(garbage) << "{\"version\": \"sgs-admm/1\"}";
  CHECK(run_cli({"solve", "--problem", garbage}) == kExitUsage);
}
