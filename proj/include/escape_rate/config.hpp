#pragma once

// JSON model configuration.
//
//   {
//     "schema_version": 1,
//     "name": "optional label",
//     "factors": [
//       {"type": "matrix", "name": "V1", "states": ["o", "a", "b"], "root": "o",
//        "rows": {"o": {"a": "1/2", "b": "1/2"}, "a": {"o": 1}, "b": {"o": 1}},
//        "transitive": false},
//       {"type": "builtin", "name": "flip"}
//     ],
//     "weights": ["2/3", "1/3"]
//   }
//
// Probabilities are JSON numbers or strings holding a decimal or a fraction
// "p/q". Every diagnostic names the offending field.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "escape_rate/catalog.hpp"
#include "escape_rate/errors.hpp"
#include "escape_rate/factor.hpp"
#include "escape_rate/model.hpp"

namespace escape_rate::config {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kWeightTolerance = 1e-9;

struct ModelConfig {
  std::string name;
  nlohmann::json document;
  ModelSpec model;
  std::string hash;  // FNV-1a of the canonical document
};

namespace detail {

[[noreturn]] inline void fail(const std::string& field, const std::string& msg) {
  throw ConfigError(field + ": " + msg);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_decimal(const std::string& field, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    fail(field, "'" + text + "' is not a number or fraction");
  }
  return v;
}

inline std::int64_t parse_integer(const std::string& field, const std::string& text) {
  std::int64_t v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    fail(field, "'" + text + "' is not an integer fraction part");
  }
  return v;
}

}  // namespace detail

// A probability or weight: number, "0.25" or "1/4". The fraction is
// converted with a single correctly rounded division.
inline double parse_probability(const nlohmann::json& v, const std::string& field) {
  double out = 0.0;
  if (v.is_number()) {
    out = v.get<double>();
  } else if (v.is_string()) {
    const auto text = detail::trim(v.get<std::string>());
    const auto slash = text.find('/');
    if (slash == std::string::npos) {
      out = detail::parse_decimal(field, text);
    } else {
      const auto num = detail::parse_integer(field, detail::trim(text.substr(0, slash)));
      const auto den = detail::parse_integer(field, detail::trim(text.substr(slash + 1)));
      if (den <= 0) detail::fail(field, "fraction denominator must be positive");
      out = static_cast<double>(num) / static_cast<double>(den);
    }
  } else {
    detail::fail(field, "expected a number or a fraction string");
  }
  if (!std::isfinite(out) || out < 0.0) detail::fail(field, "must be a finite nonnegative value");
  return out;
}

inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace detail {

inline const nlohmann::json& member(const nlohmann::json& obj, const std::string& key,
                                    const std::string& field) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(field, "missing required field '" + key + "'");
  return *it;
}

inline std::string string_member(const nlohmann::json& obj, const std::string& key,
                                 const std::string& field) {
  const auto& v = member(obj, key, field);
  if (!v.is_string()) fail(field + "." + key, "expected a string");
  return v.get<std::string>();
}

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed,
                           const std::string& field) {
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) fail(field, "unknown field '" + k + "'");
  }
}

inline Factor parse_matrix_factor(const nlohmann::json& f, const std::string& field,
                                  std::size_t index) {
  reject_unknown(f, {"type", "name", "states", "root", "rows", "transitive"}, field);
  const auto& states = member(f, "states", field);
  if (!states.is_array()) fail(field + ".states", "expected an array of labels");
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (!states[k].is_string()) {
      fail(field + ".states[" + std::to_string(k) + "]", "expected a string label");
    }
    labels.push_back(states[k].get<std::string>());
  }
  std::set<std::string> unique(labels.begin(), labels.end());
  if (unique.size() != labels.size()) fail(field + ".states", "labels must be unique");
  if (labels.size() < 2) fail(field + ".states", "a factor needs at least 2 states");

  auto index_of = [&](const std::string& label, const std::string& where) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (labels[k] == label) return k;
    }
    fail(where, "unknown state '" + label + "'");
  };

  const std::size_t root = index_of(string_member(f, "root", field), field + ".root");
  bool transitive = false;
  if (f.contains("transitive")) {
    if (!f["transitive"].is_boolean()) fail(field + ".transitive", "expected a boolean");
    transitive = f["transitive"].get<bool>();
  }

  const auto& rows = member(f, "rows", field);
  if (!rows.is_object()) fail(field + ".rows", "expected an object keyed by state");
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [from, row] : rows.items()) {
    const std::string where = field + ".rows." + from;
    const auto x = static_cast<Eigen::Index>(index_of(from, field + ".rows"));
    if (!row.is_object()) fail(where, "expected an object keyed by target state");
    for (const auto& [to, prob] : row.items()) {
      const auto y = static_cast<Eigen::Index>(index_of(to, where));
      p(x, y) = parse_probability(prob, where + "." + to);
    }
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const std::string where = field + ".rows." + labels[k];
    if (!rows.contains(labels[k])) fail(field + ".rows", "missing row for state '" + labels[k] + "'");
    const double sum = p.row(static_cast<Eigen::Index>(k)).sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      std::ostringstream os;
      os << std::setprecision(17) << "row sums to " << sum << ", expected 1";
      fail(where, os.str());
    }
    if (p(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) != 0.0) {
      fail(where + "." + labels[k], "self-loops are not allowed");
    }
  }
  std::string name = "V" + std::to_string(index + 1);
  if (f.contains("name")) name = string_member(f, "name", field);
  try {
    return Factor(FiniteFactor(labels, root, p, transitive), name);
  } catch (const InvalidModelError& e) {
    fail(field, e.what());
  }
}

inline Factor parse_builtin_factor(const nlohmann::json& f, const std::string& field) {
  reject_unknown(f, {"type", "name", "label"}, field);
  const auto name = string_member(f, "name", field);
  std::string label;
  if (f.contains("label")) label = string_member(f, "label", field);
  if (name == "Z1-SRW") return Factor(AnalyticFactor{LatticeKind::Z1}, label);
  if (name == "Z2-SRW") return Factor(AnalyticFactor{LatticeKind::Z2}, label);
  if (name == "flip") return catalog::flip(label.empty() ? "flip" : label);
  fail(field + ".name", "unknown builtin '" + name + "' (expected Z1-SRW, Z2-SRW or flip)");
}

}  // namespace detail

inline ModelConfig parse_config(const nlohmann::json& doc) {
  using detail::fail;
  if (!doc.is_object()) fail("$", "configuration must be a JSON object");
  detail::reject_unknown(doc, {"schema_version", "name", "description", "factors", "weights"}, "$");
  const auto& ver = detail::member(doc, "schema_version", "$");
  if (!ver.is_number_integer() || ver.get<int>() != kSchemaVersion) {
    fail("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  std::string name;
  if (doc.contains("name")) name = detail::string_member(doc, "name", "$");

  const auto& factors = detail::member(doc, "factors", "$");
  if (!factors.is_array() || factors.size() < 2) {
    fail("factors", "expected an array of at least 2 factors");
  }
  std::vector<Factor> fs;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const std::string field = "factors[" + std::to_string(i) + "]";
    const auto& f = factors[i];
    if (!f.is_object()) fail(field, "expected an object");
    const auto type = detail::string_member(f, "type", field);
    if (type == "matrix") {
      fs.push_back(detail::parse_matrix_factor(f, field, i));
    } else if (type == "builtin") {
      fs.push_back(detail::parse_builtin_factor(f, field));
    } else {
      fail(field + ".type", "unknown factor type '" + type + "' (expected matrix or builtin)");
    }
  }

  const auto& weights = detail::member(doc, "weights", "$");
  if (!weights.is_array()) fail("weights", "expected an array");
  if (weights.size() != fs.size()) {
    fail("weights", "expected " + std::to_string(fs.size()) + " weights, got " +
                        std::to_string(weights.size()));
  }
  std::vector<double> w;
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::string field = "weights[" + std::to_string(i) + "]";
    w.push_back(parse_probability(weights[i], field));
    if (!(w.back() > 0.0)) fail(field, "weights must be positive");
    sum += w.back();
  }
  if (std::abs(sum - 1.0) > kWeightTolerance) {
    std::ostringstream os;
    os << std::setprecision(17) << "weights sum to " << sum << ", expected 1";
    fail("weights", os.str());
  }
  for (double& v : w) v /= sum;

  try {
    ModelSpec model(std::move(fs), std::move(w));
    return {name, doc, std::move(model), fnv1a_hex(doc.dump())};
  } catch (const InvalidModelError& e) {
    fail("$", e.what());
  }
}

inline ModelConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace escape_rate::config
