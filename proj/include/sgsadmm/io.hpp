#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sgsadmm/harness.hpp"

namespace sgsadmm {

inline constexpr const char* kFormatVersion = "sgs-admm/1";

nlohmann::json problem_to_json(const QsdpProblem& problem);
/// Throws StructuralError / DomainError with the offending field on bad input.
QsdpProblem problem_from_json(const nlohmann::json& doc);

void write_problem(const std::string& path, const QsdpProblem& problem);
QsdpProblem read_problem(const std::string& path);

nlohmann::json summary_json(const QsdpRunResult& result);
/// Final (x, y, z) stored in a summary document.
IterateState state_from_summary(const nlohmann::json& summary);

void write_json(const std::string& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::string& path);

/// CSV header: k, eta_D, eta_P, eta_X, eta_Z, eta_W, eta_S, eta_I, eta_qsdp,
/// eta_gap, Dw, dx_cert, dy_cert, pcg_iters, skipped, sigma, time_s, followed by
/// dx_bound, dy_bound. Reals are written with 17 significant digits.
std::string csv_header();
void write_csv(const std::string& path, const std::vector<IterationRecord>& records);
std::vector<IterationRecord> read_csv(const std::string& path);

}  // namespace sgsadmm
