#include "sgsadmm/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sgsadmm {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) {
      if (std::isfinite(M(i, j))) {
        row.push_back(M(i, j));
      } else {
        row.push_back(nullptr);
      }
    }
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const json& j, Index n, const std::string& field, double null_value) {
  if (!j.is_array() || static_cast<Index>(j.size()) != n) {
    throw StructuralError(field + ": expected an array of " + std::to_string(n) + " rows");
  }
  Matrix M(n, n);
  for (Index i = 0; i < n; ++i) {
    const json& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != n) {
      throw StructuralError(field + ": row " + std::to_string(i) + " must have " +
                            std::to_string(n) + " entries");
    }
    for (Index k = 0; k < n; ++k) {
      const json& v = row[static_cast<size_t>(k)];
      if (v.is_null()) {
        M(i, k) = null_value;
      } else if (v.is_number()) {
        M(i, k) = v.get<double>();
      } else {
        throw StructuralError(field + ": non-numeric entry");
      }
    }
  }
  return M;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw StructuralError(field + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw StructuralError(field + ": non-numeric entry");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

json bound_to_json(const Matrix& M) {
  const double first = M(0, 0);
  const bool constant = (M.array() == first).all();
  if (constant) {
    if (!std::isfinite(first)) return nullptr;
    return first;
  }
  return matrix_to_json(M);
}

Matrix bound_from_json(const json& j, Index n, const std::string& field, double unbounded) {
  if (j.is_null()) return Matrix::Constant(n, n, unbounded);
  if (j.is_number()) return Matrix::Constant(n, n, j.get<double>());
  return matrix_from_json(j, n, field, unbounded);
}

json constraints_to_json(const SvecConstraints& c) {
  json t = json::array();
  for (const auto& e : c.entries) t.push_back(json::array({e.row(), e.col(), e.value()}));
  return {{"m", c.m}, {"triplets", t}, {"b", vector_to_json(c.b)}};
}

SvecConstraints constraints_from_json(const json& j, const std::string& field) {
  SvecConstraints c;
  if (j.is_null()) {
    c.b = Vector::Zero(0);
    return c;
  }
  if (!j.is_object() || !j.contains("m")) throw StructuralError(field + ": missing 'm'");
  c.m = j.at("m").get<Index>();
  if (c.m < 0) throw StructuralError(field + ": negative m");
  c.b = j.contains("b") ? vector_from_json(j.at("b"), field + ".b") : Vector::Zero(c.m);
  if (j.contains("triplets")) {
    for (const json& t : j.at("triplets")) {
      if (!t.is_array() || t.size() != 3) {
        throw StructuralError(field + ": triplets must be [row, svec_index, value]");
      }
      c.add(t[0].get<Index>(), t[1].get<Index>(), t[2].get<double>());
    }
  }
  return c;
}

json q_to_json(const QOperatorSpec& Q) {
  json j = {{"kind", to_string(Q.kind)}};
  switch (Q.kind) {
    case QKind::Vacuous:
      break;
    case QKind::SymKronecker:
      j["A"] = matrix_to_json(Q.A);
      j["B"] = matrix_to_json(Q.B);
      break;
    case QKind::Lyapunov:
      j["A"] = matrix_to_json(Q.A);
      break;
    case QKind::Explicit: {
      json t = json::array();
      const Matrix& M = Q.explicit_svec;
      for (Index c = 0; c < M.cols(); ++c) {
        for (Index r = 0; r < M.rows(); ++r) {
          if (M(r, c) != 0.0) t.push_back(json::array({r, c, M(r, c)}));
        }
      }
      j["triplets"] = t;
      break;
    }
  }
  return j;
}

QOperatorSpec q_from_json(const json& j, Index n) {
  if (j.is_null()) return QOperatorSpec::vacuous(n);
  const QKind kind = q_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case QKind::Vacuous:
      return QOperatorSpec::vacuous(n);
    case QKind::SymKronecker:
      return QOperatorSpec::sym_kronecker(matrix_from_json(j.at("A"), n, "Q.A", 0.0),
                                          matrix_from_json(j.at("B"), n, "Q.B", 0.0));
    case QKind::Lyapunov:
      return QOperatorSpec::lyapunov(matrix_from_json(j.at("A"), n, "Q.A", 0.0));
    case QKind::Explicit: {
      const Index d = svec_dim(n);
      Matrix M = Matrix::Zero(d, d);
      for (const json& t : j.at("triplets")) {
        const Index r = t.at(0).get<Index>();
        const Index c = t.at(1).get<Index>();
        if (r < 0 || r >= d || c < 0 || c >= d) throw StructuralError("Q.triplets: index out of range");
        M(r, c) += t.at(2).get<double>();
      }
      return QOperatorSpec::explicit_matrix(M);
    }
  }
  return QOperatorSpec::vacuous(n);
}

}  // namespace

json problem_to_json(const QsdpProblem& pb) {
  return {{"version", kFormatVersion},
          {"n", pb.n()},
          {"C", matrix_to_json(pb.C())},
          {"Q", q_to_json(pb.Q())},
          {"box", {{"lower", bound_to_json(pb.box().lower)}, {"upper", bound_to_json(pb.box().upper)}}},
          {"equalities", constraints_to_json(pb.equalities())},
          {"inequalities", constraints_to_json(pb.inequalities())}};
}

QsdpProblem problem_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw StructuralError("problem file: top level must be an object");
    const std::string version = doc.value("version", "");
    if (version != kFormatVersion) {
      throw StructuralError("problem file: unsupported version '" + version + "'");
    }
    const Index n = doc.at("n").get<Index>();
    if (n < 1) throw StructuralError("problem file: n must be positive");
    const Matrix C = matrix_from_json(doc.at("C"), n, "C", 0.0);
    const QOperatorSpec Q = q_from_json(doc.contains("Q") ? doc.at("Q") : json(nullptr), n);
    BoxSet box = BoxSet::free(n);
    if (doc.contains("box") && !doc.at("box").is_null()) {
      const json& b = doc.at("box");
      box.lower = bound_from_json(b.contains("lower") ? b.at("lower") : json(nullptr), n,
                                  "box.lower", -kInfinity);
      box.upper = bound_from_json(b.contains("upper") ? b.at("upper") : json(nullptr), n,
                                  "box.upper", kInfinity);
    }
    SvecConstraints eq = constraints_from_json(
        doc.contains("equalities") ? doc.at("equalities") : json(nullptr), "equalities");
    SvecConstraints in = constraints_from_json(
        doc.contains("inequalities") ? doc.at("inequalities") : json(nullptr), "inequalities");
    return QsdpProblem(n, Q, C, std::move(eq), std::move(in), std::move(box));
  } catch (const json::exception& e) {
    throw StructuralError(std::string("problem file: ") + e.what());
  }
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw Error("failed writing '" + path + "'");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw StructuralError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_problem(const std::string& path, const QsdpProblem& problem) {
  write_json(path, problem_to_json(problem));
}

QsdpProblem read_problem(const std::string& path) { return problem_from_json(read_json(path)); }

json summary_json(const QsdpRunResult& r) {
  const ResidualReport& f = r.final_residuals;
  json warnings = json::array();
  for (const auto& w : r.report.warnings) warnings.push_back(w);
  return {{"version", kFormatVersion},
          {"algorithm", to_string(r.algorithm)},
          {"converged", r.report.converged},
          {"iterations", r.report.iterations},
          {"time_s", r.report.seconds},
          {"eta",
           {{"eta_D", f.eta_D},
            {"eta_P", f.eta_P},
            {"eta_X", f.eta_X},
            {"eta_Z", f.eta_Z},
            {"eta_W", f.eta_W},
            {"eta_S", f.eta_S},
            {"eta_I", f.eta_I},
            {"eta_qsdp", f.eta_qsdp}}},
          {"obj_primal", f.obj_primal},
          {"obj_dual", f.obj_dual},
          {"eta_gap", f.eta_gap},
          {"certificate_audit", r.certificate_audit_passed ? "pass" : "fail"},
          {"certificate_failures", r.report.certificate_failures},
          {"pcg_iterations", r.report.inner_iterations},
          {"skipped_steps", r.report.skipped},
          {"sigma_final", r.report.final_sigma},
          {"alpha", r.alpha},
          {"warnings", warnings},
          {"final_state",
           {{"x", vector_to_json(r.report.final_state.x)},
            {"y", vector_to_json(r.report.final_state.y)},
            {"z", vector_to_json(r.report.final_state.z)}}}};
}

IterateState state_from_summary(const json& summary) {
  if (!summary.contains("final_state")) throw StructuralError("summary has no final_state");
  const json& fs = summary.at("final_state");
  IterateState s;
  s.x = vector_from_json(fs.at("x"), "final_state.x");
  s.y = vector_from_json(fs.at("y"), "final_state.y");
  s.z = vector_from_json(fs.at("z"), "final_state.z");
  return s;
}

std::string csv_header() {
  return "k,eta_D,eta_P,eta_X,eta_Z,eta_W,eta_S,eta_I,eta_qsdp,eta_gap,Dw,dx_cert,dy_cert,"
         "pcg_iters,skipped,sigma,time_s,dx_bound,dy_bound";
}

void write_csv(const std::string& path, const std::vector<IterationRecord>& records) {
  FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw Error("cannot open '" + path + "' for writing");
  std::fprintf(fp, "%s\n", csv_header().c_str());
  for (const auto& r : records) {
    std::fprintf(fp,
                 "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld,"
                 "%lld,%.17g,%.17g,%.17g,%.17g\n",
                 r.k, r.eta_D, r.eta_P, r.eta_X, r.eta_Z, r.eta_W, r.eta_S, r.eta_I, r.eta_qsdp,
                 r.eta_gap, r.Dw, r.dx_cert, r.dy_cert, r.pcg_iters, r.skipped, r.sigma, r.time_s,
                 r.dx_bound, r.dy_bound);
  }
  const bool ok = std::fclose(fp) == 0;
  if (!ok) throw Error("failed writing '" + path + "'");
}

std::vector<IterationRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw StructuralError("'" + path + "' does not start with the iteration-log header");
  }
  std::vector<IterationRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 19) {
      throw StructuralError(path + ":" + std::to_string(lineno) + ": expected 19 fields");
    }
    IterationRecord r;
    try {
      r.k = std::stoi(f[0]);
      double* reals[] = {&r.eta_D, &r.eta_P, &r.eta_X,    &r.eta_Z,  &r.eta_W, &r.eta_S,
                         &r.eta_I, &r.eta_qsdp, &r.eta_gap, &r.Dw,   &r.dx_cert, &r.dy_cert};
      for (size_t i = 0; i < 12; ++i) *reals[i] = std::stod(f[1 + i]);
      r.pcg_iters = std::stoll(f[13]);
      r.skipped = std::stoll(f[14]);
      r.sigma = std::stod(f[15]);
      r.time_s = std::stod(f[16]);
      r.dx_bound = std::stod(f[17]);
      r.dy_bound = std::stod(f[18]);
    } catch (const std::exception&) {
      throw StructuralError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace sgsadmm
