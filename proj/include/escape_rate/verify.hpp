#pragma once

// End-to-end verification of one model: series identities, exact
// enumeration of the first steps, and agreement of the drift formulas.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "escape_rate/drift.hpp"
#include "escape_rate/errors.hpp"
#include "escape_rate/model.hpp"
#include "escape_rate/oracle.hpp"

namespace escape_rate {

inline constexpr double kIdentityTolerance = 1e-10;
inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kTrendTolerance = 0.05;
// Cumulative word budget for the trend check (the hard guard stays at 1e7).
inline constexpr std::size_t kTrendWordBudget = 1'000'000;

struct TrendCheck {
  int horizon = 0;
  bool truncated = false;
  std::size_t words = 0;
  double max_mass_error = 0.0;
  double mean_increment = 0.0;
  double ell = 0.0;
  double gap = 0.0;
  bool passed = false;
};

struct VerificationReport {
  int order = 0;
  std::optional<oracle::IdentityReport> identities;
  std::optional<TrendCheck> trend;
  DriftReport drift;
  std::vector<std::string> notices;
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
};

inline TrendCheck check_enumeration_trend(const ModelSpec& m, int horizon, double ell,
                                          std::size_t budget = kTrendWordBudget) {
  const auto s = oracle::enumerate_summaries(m, horizon, budget);
  TrendCheck t;
  t.horizon = static_cast<int>(s.laws.size()) - 1;
  t.truncated = s.truncated;
  t.words = s.words_visited;
  for (const auto& l : s.laws) t.max_mass_error = std::max(t.max_mass_error, std::abs(l.total_mass - 1.0));
  t.ell = ell;
  if (s.laws.size() >= 3) {
    t.mean_increment = oracle::mean_increment(s.laws);
    t.gap = std::abs(t.mean_increment - ell);
  } else {
    t.gap = std::numeric_limits<double>::infinity();
  }
  t.passed = t.max_mass_error <= kMassTolerance && t.gap < kTrendTolerance;
  return t;
}

inline VerificationReport verify_model(const ModelSpec& m, int order,
                                       const AnalysisOptions& opt = {}) {
  VerificationReport rep;
  rep.order = order;
  rep.drift = analyze(m, opt);
  for (const auto& f : check_report(rep.drift)) rep.failures.push_back("cross-method: " + f);

  if (!m.all_finite()) {
    rep.notices.push_back("series identities and enumeration skipped: the model has builtin lattice factors");
    return rep;
  }
  rep.identities = oracle::check_passage_identities(m, order);
  for (const auto& [name, d] : rep.identities->max_discrepancy) {
    if (!(d <= kIdentityTolerance)) {
      rep.failures.push_back("identity " + name + ": discrepancy " + std::to_string(d));
    }
  }
  rep.trend = check_enumeration_trend(m, std::min(order + 2, oracle::kMaxEnumerationSteps),
                                      rep.drift.ell());
  if (rep.trend->truncated) {
    rep.notices.push_back("enumeration stopped at n = " + std::to_string(rep.trend->horizon) +
                          " by the word budget");
  }
  if (!rep.trend->passed) {
    rep.failures.push_back("enumeration trend: mass error " +
                           std::to_string(rep.trend->max_mass_error) + ", increment gap " +
                           std::to_string(rep.trend->gap));
  }
  return rep;
}

}  // namespace escape_rate
