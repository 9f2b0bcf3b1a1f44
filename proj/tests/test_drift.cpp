#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "escape_rate/catalog.hpp"
#include "escape_rate/drift.hpp"
#include "escape_rate/errors.hpp"
#include "support.hpp"

namespace er = escape_rate;
namespace cat = escape_rate::catalog;

TEST(TypeChain, NonCayleyExampleMatchesPublishedMatrix) {
  const auto m = cat::non_cayley_example();
  const auto tc = er::type_chain(m, er::solve_xi(m));
  const double q[3][3] = {{0, 0.5, 0.5}, {0.62769, 0, 0.37231}, {0.62769, 0.37231, 0}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(tc.qhat(i, j), q[i][j], 1e-5);
  }
  EXPECT_NEAR(tc.nu[0], 0.38563, 1e-5);
  EXPECT_NEAR(tc.nu[1], 0.30718, 1e-5);
  EXPECT_NEAR(tc.nu[2], 0.30718, 1e-5);
}

TEST(TypeChain, TreeIsUniform) {
  const auto m = cat::regular_tree(3);
  const auto tc = er::type_chain(m, er::solve_xi(m));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(tc.nu[static_cast<std::size_t>(i)], 1.0 / 3.0, 1e-14);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(tc.qhat(i, j), i == j ? 0.0 : 0.5, 1e-14);
  }
}

TEST(TypeChain, StochasticAndStationaryOnRandomModels) {
  std::mt19937_64 gen(8);
  for (int k = 0; k < 15; ++k) {
    const auto m = er::testing::random_model(gen, k % 2 == 0);
    const auto tc = er::type_chain(m, er::solve_xi(m));
    double nu_sum = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      EXPECT_EQ(tc.qhat(ii, ii), 0.0);
      EXPECT_NEAR(tc.qhat.row(ii).sum(), 1.0, 1e-10);
      EXPECT_GE(tc.qhat.row(ii).minCoeff(), 0.0);
      EXPECT_GT(tc.nu[i], 0.0);
      nu_sum += tc.nu[i];
    }
    EXPECT_NEAR(nu_sum, 1.0, 1e-14);
    EXPECT_LT(tc.stationarity_residual, 1e-10);
    EXPECT_LT(tc.nu_discrepancy, 1e-10);
  }
}

TEST(Drift, NonCayleyExample) {
  const auto m = cat::non_cayley_example();
  const auto sol = er::solve_xi(m);
  const auto et = er::drift_exit_time(m, sol);
  EXPECT_NEAR(et.ell, 0.33089, 1e-5);
  EXPECT_NEAR(et.lambda * et.ell, 1.0, 1e-15);
  EXPECT_NEAR(er::drift_dgf(m, sol), et.ell, 1e-12);
  EXPECT_THROW(er::drift_group(m, sol), er::PreconditionError);
}

TEST(Drift, GroupFormulaNamesTheOffendingFactor) {
  const auto m = cat::non_cayley_example();
  try {
    er::drift_group(m, er::solve_xi(m));
    FAIL();
  } catch (const er::PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("V1"), std::string::npos);
  }
}

TEST(Drift, LatticeExample) {
  const auto m = cat::lattice_flip_example();
  const auto sol = er::solve_xi(m);
  EXPECT_NEAR(er::drift_group(m, sol), 0.23386, 1e-5);
  EXPECT_NEAR(er::drift_dgf(m, sol), 0.23386, 1e-5);
  EXPECT_NEAR(er::drift_exit_time(m, sol).ell, er::drift_dgf(m, sol), 1e-12);
}

TEST(Drift, TreeClosedForm) {
  for (std::size_t r : {3u, 4u, 5u, 7u}) {
    const auto m = cat::regular_tree(r);
    const auto sol = er::solve_xi(m);
    const double expected = (static_cast<double>(r) - 2.0) / static_cast<double>(r);
    EXPECT_NEAR(er::drift_exit_time(m, sol).ell, expected, 1e-12) << r;
    EXPECT_NEAR(er::drift_dgf(m, sol), expected, 1e-12) << r;
    EXPECT_NEAR(er::drift_group(m, sol), expected, 1e-12) << r;
  }
}

TEST(Drift, CrossMethodAgreementOnRandomModels) {
  std::mt19937_64 gen(99);
  for (int k = 0; k < 20; ++k) {
    const bool transitive = k % 2 == 1;
    const auto m = er::testing::random_model(gen, transitive);
    const auto rep = er::analyze(m);
    EXPECT_LT(std::abs(rep.ell_exit_time - rep.ell_dgf), 1e-9);
    EXPECT_GT(rep.ell(), 0.0);
    EXPECT_LE(rep.ell(), 1.0);
    if (transitive) {
      ASSERT_TRUE(rep.ell_group.has_value());
      EXPECT_LT(std::abs(*rep.ell_group - rep.ell_dgf), 1e-9);
    }
    EXPECT_TRUE(er::check_report(rep).empty());
  }
}

TEST(Drift, RootGreenConsistency) {
  // sum_i G(o,o|1) rho(i) = 1 with rho(i) = (1 - (1 - xi_i) G_i(xi_i)) / G(o,o|1).
  std::mt19937_64 gen(4);
  for (int k = 0; k < 10; ++k) {
    const auto m = er::testing::random_model(gen, false);
    const auto sol = er::solve_xi(m);
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double rho = (1.0 - (1.0 - sol.xi[i]) * sol.green_at_xi[i]) / sol.g_root;
      s += sol.g_root * rho;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Drift, PartialRates) {
  const auto m = cat::non_cayley_example();
  const auto rep = er::analyze(m);
  EXPECT_NEAR(rep.partial[0], 0.38563 * 0.33089, 1e-4);
  double s = 0.0;
  for (double v : rep.partial) s += v;
  EXPECT_NEAR(s, rep.ell(), 1e-10);
  const auto tree = er::analyze(cat::regular_tree(3));
  for (double v : tree.partial) EXPECT_NEAR(v, tree.ell() / 3.0, 1e-14);
}

TEST(Drift, MarkovianRate) {
  const auto tree = er::analyze(cat::regular_tree(3));
  ASSERT_TRUE(tree.sigma && tree.markovian_lambda);
  EXPECT_NEAR(*tree.sigma, 1.0, 1e-13);
  EXPECT_NEAR(*tree.markovian_lambda, tree.ell(), 1e-13);

  const auto nc = er::analyze(cat::non_cayley_example());
  ASSERT_TRUE(nc.markovian_lambda.has_value());
  EXPECT_GT(*nc.markovian_lambda, nc.ell());

  const auto m = cat::lattice_flip_example();
  const auto sol = er::solve_xi(m);
  const auto tc = er::type_chain(m, sol);
  EXPECT_THROW(er::markovian_rate(m, sol, tc, 0.2), er::UnsupportedFactorError);
  EXPECT_FALSE(er::analyze(m).markovian_lambda.has_value());
}

TEST(Drift, PermutationInvariance) {
  const auto m = cat::non_cayley_example();
  const std::vector<std::size_t> perm{1, 2, 0};
  const auto a = er::analyze(m);
  const auto b = er::analyze(m.permuted(perm));
  EXPECT_NEAR(a.ell(), b.ell(), 1e-14);
  EXPECT_NEAR(a.lambda_exit, b.lambda_exit, 1e-13);
  EXPECT_NEAR(*a.markovian_lambda, *b.markovian_lambda, 1e-14);
  for (std::size_t k = 0; k < m.size(); ++k) {
    EXPECT_NEAR(a.type_chain.nu[k], b.type_chain.nu[perm[k]], 1e-14);
    EXPECT_NEAR(a.partial[k], b.partial[perm[k]], 1e-14);
  }
}

TEST(Drift, ReportResidualsWithinLimits) {
  for (const auto& m : {cat::non_cayley_example(), cat::lattice_flip_example(), cat::regular_tree(5)}) {
    const auto rep = er::analyze(m);
    EXPECT_TRUE(er::check_report(rep).empty());
    EXPECT_LT(rep.residuals.at("normalization"), 1e-9);
    EXPECT_LT(rep.residuals.at("nu_stationarity"), 1e-10);
    EXPECT_LT(rep.residuals.at("xi_prime_fd_relative"), 1e-4);
  }
}

TEST(Drift, NearCriticalModelStillResolves) {
  // xi_1 is about 1 - 1e-6; the finite-difference probe must stay below 1.
  const er::ModelSpec m({cat::z2_srw(), cat::flip()}, {1.0 - 1e-6, 1e-6});
  const auto rep = er::analyze(m);
  EXPECT_TRUE(er::check_report(rep).empty());
  EXPECT_GT(rep.ell(), 0.0);
  EXPECT_LT(rep.ell(), 1e-5);
}
