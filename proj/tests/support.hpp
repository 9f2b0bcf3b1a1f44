#pragma once

// Shared fixtures: random finite models and small helper factors.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "escape_rate/catalog.hpp"
#include "escape_rate/factor.hpp"
#include "escape_rate/model.hpp"

namespace escape_rate::testing {

// Random reversible walk on n states: symmetric positive conductances on a
// ring plus random chords, normalized by row. The ring keeps it irreducible.
inline Factor random_reversible_factor(std::size_t n, std::mt19937_64& gen,
                                       const std::string& name) {
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  std::bernoulli_distribution chord(0.4);
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(ni, ni);
  for (Eigen::Index x = 0; x < ni; ++x) {
    const Eigen::Index y = (x + 1) % ni;
    if (x != y) c(x, y) = c(y, x) = weight(gen);
  }
  for (Eigen::Index x = 0; x < ni; ++x) {
    for (Eigen::Index y = x + 2; y < ni; ++y) {
      if (chord(gen)) c(x, y) = c(y, x) = weight(gen);
    }
  }
  Eigen::MatrixXd p = c;
  for (Eigen::Index x = 0; x < ni; ++x) p.row(x) /= c.row(x).sum();
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < n; ++k) labels.push_back(name + "_" + std::to_string(k));
  return Factor(FiniteFactor(labels, 0, p, false), name);
}

// Random walk on Z/n with a random step law (mu[0] = 0, mu[1] > 0).
inline Factor random_cyclic_factor(std::size_t n, std::mt19937_64& gen, const std::string& name) {
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  std::vector<double> mu(n, 0.0);
  double total = 0.0;
  for (std::size_t g = 1; g < n; ++g) total += mu[g] = weight(gen);
  for (double& v : mu) v /= total;
  return catalog::cyclic(mu, name);
}

inline std::vector<double> random_weights(std::size_t r, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> w(r);
  double total = 0.0;
  for (double& v : w) total += v = u(gen);
  for (double& v : w) v /= total;
  return w;
}

// r in {2,3,4}, factor sizes 2..8; never two 2-element factors alone.
inline ModelSpec random_model(std::mt19937_64& gen, bool transitive) {
  std::uniform_int_distribution<std::size_t> rdist(2, 4);
  std::uniform_int_distribution<std::size_t> ndist(2, 8);
  const std::size_t r = rdist(gen);
  std::vector<std::size_t> sizes(r);
  for (auto& n : sizes) n = ndist(gen);
  if (r == 2 && sizes[0] == 2 && sizes[1] == 2) sizes[1] = 3;
  std::vector<Factor> fs;
  for (std::size_t i = 0; i < r; ++i) {
    const std::string name = "F" + std::to_string(i + 1);
    fs.push_back(transitive ? random_cyclic_factor(sizes[i], gen, name)
                            : random_reversible_factor(sizes[i], gen, name));
  }
  return ModelSpec(std::move(fs), random_weights(r, gen));
}

// Directed 3-cycle o -> a -> b -> o.
inline Factor directed_cycle() {
  Eigen::MatrixXd p(3, 3);
  p << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  return Factor(FiniteFactor({"o", "a", "b"}, 0, p, true), "C3");
}

}  // namespace escape_rate::testing
