#pragma once

// Ready-made factors and the reference models used throughout the tests and
// the bundled configuration files.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "escape_rate/factor.hpp"
#include "escape_rate/model.hpp"

namespace escape_rate::catalog {

// Z/2 with the walk that always flips: G(z) = 1/(1 - z^2).
inline Factor flip(std::string name = "flip") {
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 1, 0;
  return Factor(FiniteFactor({"o", "a"}, 0, p, true), std::move(name));
}

inline Factor z1_srw() { return Factor(AnalyticFactor{LatticeKind::Z1}); }
inline Factor z2_srw() { return Factor(AnalyticFactor{LatticeKind::Z2}); }

// Random walk on the cyclic group Z/n driven by the step law `mu` (mu[0]
// must be 0). Rows are shifts of mu, so the factor is vertex-transitive.
inline Factor cyclic(const std::vector<double>& mu, std::string name = "cyclic") {
  const auto n = mu.size();
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("g" + std::to_string(i));
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t g = 0; g < n; ++g) {
      p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>((x + g) % n)) = mu[g];
    }
  }
  return Factor(FiniteFactor(labels, 0, p, true), std::move(name));
}

// Seven-state factor {o1, A, ..., F} with
//   U(o,o|z) = 3/5 z^2 + 2/5 z^3,
//   F(A,o) = F(E,o) = z/2 + z^2/2,  F(C,o) = z^2,  F(D,o) = F(F,o) = z.
// The root moves uniformly to A, C, D, E, F; B is the intermediate vertex on
// the two-step return paths.
inline Factor non_cayley_seven() {
  const std::vector<std::string> labels{"o1", "A", "B", "C", "D", "E", "F"};
  enum { O, A, B, C, D, E, F };
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(7, 7);
  for (int s : {A, C, D, E, F}) p(O, s) = 0.2;
  p(A, O) = 0.5;
  p(A, B) = 0.5;
  p(E, O) = 0.5;
  p(E, B) = 0.5;
  p(B, O) = 1.0;
  p(C, B) = 1.0;
  p(D, O) = 1.0;
  p(F, O) = 1.0;
  return Factor(FiniteFactor(labels, O, p, false), "V1");
}

// Three-state star o -> {u, v} (1/2 each), u, v -> o. G(z) = 1/(1 - z^2)
// but the graph is not a Cayley graph.
inline Factor star_three(const std::string& root, const std::string& u,
                         const std::string& v, std::string name) {
  Eigen::MatrixXd p(3, 3);
  p << 0, 0.5, 0.5, 1, 0, 0, 1, 0, 0;
  return Factor(FiniteFactor({root, u, v}, 0, p, false), std::move(name));
}

// Non-Cayley example: V1 * V2 * V3 with alpha = (5/9, 2/9, 2/9).
inline ModelSpec non_cayley_example() {
  return ModelSpec({non_cayley_seven(), star_three("o2", "G", "H", "V2"),
                    star_three("o3", "I", "J", "V3")},
                   {5.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0});
}

// Z^2 * Z/2 with alpha = (4/5, 1/5).
inline ModelSpec lattice_flip_example() {
  return ModelSpec({z2_srw(), flip()}, {0.8, 0.2});
}

// Free product of r copies of Z/2 with equal weights: simple random walk on
// the r-regular tree.
inline ModelSpec regular_tree(std::size_t r) {
  std::vector<Factor> f;
  for (std::size_t i = 0; i < r; ++i) f.push_back(flip("flip" + std::to_string(i + 1)));
  return ModelSpec(std::move(f), std::vector<double>(r, 1.0 / static_cast<double>(r)));
}

}  // namespace escape_rate::catalog
