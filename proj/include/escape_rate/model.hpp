#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "escape_rate/errors.hpp"
#include "escape_rate/factor.hpp"

namespace escape_rate {

inline constexpr double kWeightSumTolerance = 1e-12;
inline constexpr double kMinWeight = 1e-12;

// Free product V_1 * ... * V_r together with the mixing weights alpha_i.
class ModelSpec {
 public:
  ModelSpec(std::vector<Factor> factors, std::vector<double> weights)
      : factors_(std::move(factors)), weights_(std::move(weights)) {
    if (factors_.size() < 2) throw InvalidModelError("a free product needs r >= 2 factors");
    if (weights_.size() != factors_.size()) {
      throw InvalidModelError("expected one weight per factor");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!std::isfinite(weights_[i]) || weights_[i] < kMinWeight) {
        throw InvalidModelError("weight " + std::to_string(i) + " must be positive");
      }
      sum += weights_[i];
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
      throw InvalidModelError("weights sum to " + std::to_string(sum) + ", expected 1");
    }
    if (factors_.size() == 2 && factors_[0].is_two_element() &&
        factors_[1].is_two_element()) {
      throw InvalidModelError(
          "the free product of two two-element factors is recurrent");
    }
  }

  std::size_t size() const noexcept { return factors_.size(); }
  const std::vector<Factor>& factors() const noexcept { return factors_; }
  const Factor& factor(std::size_t i) const { return factors_.at(i); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double weight(std::size_t i) const { return weights_.at(i); }

  bool all_finite() const {
    for (const auto& f : factors_) {
      if (!f.is_finite()) return false;
    }
    return true;
  }
  bool all_transitive() const {
    for (const auto& f : factors_) {
      if (!f.transitive()) return false;
    }
    return true;
  }

  // Same model with factor k moved to position perm[k].
  ModelSpec permuted(const std::vector<std::size_t>& perm) const {
    std::vector<Factor> f(factors_);
    std::vector<double> w(weights_);
    for (std::size_t k = 0; k < perm.size(); ++k) {
      f[perm.at(k)] = factors_[k];
      w[perm.at(k)] = weights_[k];
    }
    return ModelSpec(std::move(f), std::move(w));
  }

 private:
  std::vector<Factor> factors_;
  std::vector<double> weights_;
};

}  // namespace escape_rate
