#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "escape_rate/catalog.hpp"
#include "escape_rate/drift.hpp"
#include "escape_rate/errors.hpp"
#include "escape_rate/lattice_green.hpp"
#include "escape_rate/xi_solver.hpp"
#include "support.hpp"

namespace er = escape_rate;
namespace cat = escape_rate::catalog;

TEST(Model, Validation) {
  EXPECT_THROW(er::ModelSpec({cat::flip()}, {1.0}), er::InvalidModelError);
  EXPECT_THROW(er::ModelSpec({cat::flip(), cat::flip()}, {0.5, 0.5}), er::InvalidModelError);
  EXPECT_THROW(er::ModelSpec({cat::flip(), cat::z2_srw()}, {0.5, 0.6}), er::InvalidModelError);
  EXPECT_THROW(er::ModelSpec({cat::flip(), cat::z2_srw()}, {1.0, 0.0}), er::InvalidModelError);
  EXPECT_THROW(er::ModelSpec({cat::flip(), cat::z2_srw()}, {1.0}), er::InvalidModelError);
  EXPECT_NO_THROW(er::ModelSpec({cat::flip(), cat::flip(), cat::flip()}, {0.2, 0.3, 0.5}));
}

TEST(Xi, NonCayleyExampleMatchesPublishedValues) {
  const auto sol = er::solve_xi(cat::non_cayley_example());
  EXPECT_NEAR(sol.xi[0], 0.66571, 1e-5);
  EXPECT_NEAR(sol.xi[1], 0.37231, 1e-5);
  EXPECT_NEAR(sol.xi[2], 0.37231, 1e-5);
}

TEST(Xi, LatticeExampleMatchesPublishedValues) {
  const auto sol = er::solve_xi(cat::lattice_flip_example());
  EXPECT_NEAR(sol.xi[0], 0.84426, 1e-5);
  EXPECT_NEAR(sol.xi[1], 0.26212, 1e-5);
  EXPECT_NEAR(sol.green_at_xi[0], 1.33347, 2e-5);
  EXPECT_NEAR(sol.green_at_xi[1], 1.07378, 1e-5);
  EXPECT_NEAR(1.25 * er::lattice::z2_w(sol.xi[0]), 1.40724, 5e-5);
}

TEST(Xi, TreeClosedForm) {
  for (std::size_t r : {3u, 4u, 5u, 8u}) {
    const auto sol = er::solve_xi(cat::regular_tree(r));
    const double alpha = 1.0 / static_cast<double>(r);
    // Plain substitution xi <- alpha / (1 - (r-1) alpha xi), 10^6 rounds.
    double naive = alpha;
    for (int k = 0; k < 1'000'000; ++k) naive = alpha / (1.0 - (static_cast<double>(r) - 1) * alpha * naive);
    for (double x : sol.xi) {
      EXPECT_NEAR(x, 1.0 / (static_cast<double>(r) - 1.0), 1e-12) << r;
      EXPECT_NEAR(x, naive, 1e-12);
    }
    for (double d : sol.xi_prime) EXPECT_NEAR(d, sol.xi_prime[0], 1e-12);
  }
}

TEST(Xi, TreeRootGreen) {
  const auto sol = er::solve_xi(cat::regular_tree(3));
  for (double h : sol.h) EXPECT_NEAR(h, 1.0 / 6.0, 1e-13);
  EXPECT_NEAR(sol.g_root, 2.0, 1e-12);
  EXPECT_NEAR(er::product_green(cat::regular_tree(3), sol), 2.0, 1e-12);
  EXPECT_NEAR(sol.xi_prime[0], 1.5, 1e-10);
}

TEST(Xi, TrajectoryIsMonotone) {
  er::SolverOptions opt;
  opt.record_trajectory = true;
  for (const auto& m : {cat::non_cayley_example(), cat::lattice_flip_example(), cat::regular_tree(4)}) {
    const auto sol = er::solve_xi(m, opt);
    ASSERT_GE(sol.trajectory.size(), 2u);
    for (std::size_t k = 1; k < sol.trajectory.size(); ++k) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_GE(sol.trajectory[k][i], sol.trajectory[k - 1][i] - 1e-15);
        EXPECT_LE(sol.trajectory[k][i], sol.xi[i] + 1e-13);
      }
    }
  }
}

TEST(Xi, InvariantsOnRandomModels) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = er::testing::random_model(gen, trial % 3 == 0);
    const auto sol = er::solve_xi(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_GT(sol.xi[i], 0.0);
      EXPECT_LT(sol.xi[i], 1.0 - 1e-9);
      EXPECT_GT(sol.xi_prime[i], 0.0);
      EXPECT_NEAR(sol.xi[i] * (1.0 - sol.h_bar[i]), m.weight(i), 1e-13);
      total += sol.h[i];
    }
    EXPECT_NEAR(sol.u_root, total, 1e-15);
    EXPECT_LT(sol.u_root, 1.0);
    EXPECT_GT(sol.g_root, 1.0);
    EXPECT_NEAR(er::normalization_sum(sol), 1.0, 1e-9);
  }
}

TEST(Xi, DerivativeMatchesFiniteDifference) {
  std::mt19937_64 gen(77);
  std::vector<er::ModelSpec> models{cat::non_cayley_example(), cat::lattice_flip_example(),
                                    cat::regular_tree(3)};
  for (int k = 0; k < 5; ++k) models.push_back(er::testing::random_model(gen, false));
  for (const auto& m : models) {
    const auto sol = er::solve_xi(m);
    const auto fd = er::xi_derivative_finite_difference(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_NEAR(sol.xi_prime[i], fd[i], 1e-4 * std::abs(fd[i]));
    }
  }
}

TEST(Xi, PermutationCovariance) {
  const auto m = cat::non_cayley_example();
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto a = er::solve_xi(m);
  const auto b = er::solve_xi(m.permuted(perm));
  for (std::size_t k = 0; k < m.size(); ++k) {
    EXPECT_NEAR(a.xi[k], b.xi[perm[k]], 1e-14);
    EXPECT_NEAR(a.xi_prime[k], b.xi_prime[perm[k]], 1e-12);
    EXPECT_NEAR(a.h[k], b.h[perm[k]], 1e-14);
  }
}

TEST(Xi, Errors) {
  const auto m = cat::non_cayley_example();
  er::SolverOptions opt;
  opt.tol = 0.0;
  EXPECT_THROW(er::solve_xi(m, opt), er::UsageError);
  opt.tol = 1e-13;
  opt.max_iter = 3;
  try {
    er::solve_xi(m, opt);
    FAIL() << "expected a convergence error";
  } catch (const er::ConvergenceError& e) {
    EXPECT_GT(e.residual(), 0.0);
  }
  const er::ModelSpec near({cat::z2_srw(), cat::flip()}, {1.0 - 1e-12, 1e-12});
  EXPECT_THROW(er::analyze(near), er::NonTransientModelError);
  opt.max_iter = 1'000'000;
  opt.tol = 1e-3;
  EXPECT_THROW(er::solve_xi_at(cat::regular_tree(3), 1.2, opt), er::NonTransientModelError);
}
