#pragma once

// Machine-readable reports for the command-line tool. JSON objects keep
// their keys sorted, so a report re-serializes to the same bytes.

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "escape_rate/drift.hpp"
#include "escape_rate/model.hpp"
#include "escape_rate/simulate.hpp"
#include "escape_rate/verify.hpp"
#include "escape_rate/version.hpp"
#include "escape_rate/xi_solver.hpp"

namespace escape_rate::report {

using nlohmann::json;

enum class Format { Json, Csv, Text };

inline Format parse_format(const std::string& s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  if (s == "text") return Format::Text;
  throw UsageError("unknown format '" + s + "' (expected json, csv or text)");
}

namespace detail {

inline json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json estimate(const MeanEstimate& e) {
  return {{"mean", e.mean}, {"std_error", e.std_error}, {"ci95", {e.ci_low, e.ci_high}}};
}

inline json estimates(const std::vector<MeanEstimate>& v) {
  json out = json::array();
  for (const auto& e : v) out.push_back(estimate(e));
  return out;
}

}  // namespace detail

inline json header(const std::string& command, const std::string& config_hash) {
  return {{"tool", "escape-rate"},
          {"version", kVersion},
          {"command", command},
          {"config_hash", config_hash}};
}

inline json describe_model(const ModelSpec& m, const std::string& name) {
  json factors = json::array();
  for (const auto& f : m.factors()) {
    json d{{"name", f.name()}, {"transitive", f.transitive()}};
    if (const auto* fin = f.as_finite()) {
      d["kind"] = "matrix";
      d["states"] = fin->size();
    } else {
      d["kind"] = to_string(f.analytic().kind);
      d["states"] = nullptr;
    }
    factors.push_back(std::move(d));
  }
  return {{"name", name}, {"factors", std::move(factors)}, {"weights", m.weights()}};
}

inline json drift_json(const DriftReport& rep) {
  return {{"ell", rep.ell()},
          {"ell_exit_time", rep.ell_exit_time},
          {"ell_dgf", rep.ell_dgf},
          {"ell_group", detail::optional_number(rep.ell_group)},
          {"Lambda", rep.lambda_exit},
          {"partial", rep.partial},
          {"sigma", detail::optional_number(rep.sigma)},
          {"markovian_lambda", detail::optional_number(rep.markovian_lambda)}};
}

inline json compute_json(const ModelSpec& m, const std::string& name, const std::string& hash,
                         const SolverOptions& opt, const XiSolution& sol,
                         const DriftReport& rep) {
  json out = header("compute", hash);
  out["model"] = describe_model(m, name);
  out["solver"] = {{"tol", opt.tol},
                   {"max_iter", opt.max_iter},
                   {"iterations", sol.iterations},
                   {"residual", sol.residual}};
  out["xi"] = {{"xi", sol.xi},
               {"xi_prime", sol.xi_prime},
               {"h", sol.h},
               {"h_bar", sol.h_bar},
               {"u_root", sol.u_root},
               {"g_root", sol.g_root},
               {"green_at_xi", sol.green_at_xi},
               {"green_prime_at_xi", sol.green_prime_at_xi}};
  out["type_chain"] = {{"qhat", detail::matrix(rep.type_chain.qhat)},
                       {"nu", rep.type_chain.nu},
                       {"nu_stationary", rep.type_chain.nu_stationary}};
  out["drift"] = drift_json(rep);
  out["residuals"] = rep.residuals;
  const auto failures = check_report(rep);
  out["failures"] = failures;
  out["status"] = failures.empty() ? "ok" : "failed";
  return out;
}

inline constexpr double kDriftGateSigmas = 4.0;

inline json simulate_json(const ModelSpec& m, const std::string& name, const std::string& hash,
                          const SimulationResult& res, const DriftReport* reference) {
  json out = header("simulate", hash);
  out["model"] = describe_model(m, name);
  out["parameters"] = {{"steps", res.config.steps},
                       {"trials", res.config.trials},
                       {"seed", res.config.seed},
                       {"checkpoints", res.config.checkpoints}};
  out["estimates"] = {{"drift", detail::estimate(res.drift)},
                      {"partial", detail::estimates(res.partial)},
                      {"partial_share", detail::estimates(res.partial_share)},
                      {"markovian", detail::estimate(res.markovian)},
                      {"type_frequency", detail::estimates(res.type_frequency)}};
  json profile = json::array();
  for (const auto& [n, depth] : res.prefix_profile) profile.push_back({{"n", n}, {"depth", depth}});
  out["prefix_profile"] = std::move(profile);
  if (reference) {
    const double z = res.drift.std_error > 0.0
                         ? (res.drift.mean - reference->ell()) / res.drift.std_error
                         : 0.0;
    out["reference"] = {{"ell", reference->ell()},
                        {"nu", reference->type_chain.nu},
                        {"markovian_lambda", detail::optional_number(reference->markovian_lambda)},
                        {"drift_z_score", z},
                        {"drift_within_4se", std::abs(z) <= kDriftGateSigmas}};
  } else {
    out["reference"] = nullptr;
  }
  return out;
}

inline json verify_json(const ModelSpec& m, const std::string& name, const std::string& hash,
                        const VerificationReport& rep) {
  json out = header("verify", hash);
  out["model"] = describe_model(m, name);
  out["order"] = rep.order;
  if (rep.identities) {
    json ids = json::object();
    for (const auto& [id, d] : rep.identities->max_discrepancy) {
      ids[id] = {{"max_discrepancy", d},
                 {"cases", rep.identities->cases.at(id)},
                 {"passed", d <= kIdentityTolerance}};
    }
    out["identities"] = std::move(ids);
  } else {
    out["identities"] = nullptr;
  }
  if (rep.trend) {
    const auto& t = *rep.trend;
    out["enumeration"] = {{"horizon", t.horizon},
                          {"truncated", t.truncated},
                          {"words", t.words},
                          {"max_mass_error", t.max_mass_error},
                          {"mean_increment", t.mean_increment},
                          {"ell", t.ell},
                          {"gap", t.gap},
                          {"passed", t.passed}};
  } else {
    out["enumeration"] = nullptr;
  }
  out["drift"] = drift_json(rep.drift);
  out["residuals"] = rep.drift.residuals;
  out["notices"] = rep.notices;
  out["failures"] = rep.failures;
  out["status"] = rep.passed() ? "ok" : "failed";
  return out;
}

namespace detail {

inline std::string scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline void flatten(const json& v, const std::string& prefix,
                    std::vector<std::pair<std::string, std::string>>& out) {
  if (v.is_object()) {
    for (const auto& [k, child] : v.items()) flatten(child, prefix.empty() ? k : prefix + "." + k, out);
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) flatten(v[i], prefix + "[" + std::to_string(i) + "]", out);
    if (v.empty()) out.emplace_back(prefix, "[]");
  } else {
    out.emplace_back(prefix, scalar(v));
  }
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace detail

// Renders a report. CSV and text list one flattened key per line.
inline std::string render(const json& doc, Format fmt) {
  if (fmt == Format::Json) return doc.dump(2) + "\n";
  std::vector<std::pair<std::string, std::string>> rows;
  detail::flatten(doc, "", rows);
  std::ostringstream os;
  if (fmt == Format::Csv) {
    os << "key,value\n";
    for (const auto& [k, v] : rows) os << detail::csv_field(k) << ',' << detail::csv_field(v) << '\n';
  } else {
    std::size_t width = 0;
    for (const auto& row : rows) width = std::max(width, row.first.size());
    for (const auto& [k, v] : rows) os << k << std::string(width - k.size() + 2, ' ') << v << '\n';
  }
  return os.str();
}

}  // namespace escape_rate::report
