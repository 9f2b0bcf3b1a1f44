#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "escape_rate/catalog.hpp"
#include "escape_rate/errors.hpp"
#include "escape_rate/factor.hpp"
#include "escape_rate/series.hpp"
#include "support.hpp"

namespace er = escape_rate;
namespace cat = escape_rate::catalog;

namespace {

Eigen::MatrixXd two_by_two(double a, double b, double c, double d) {
  Eigen::MatrixXd p(2, 2);
  p << a, b, c, d;
  return p;
}

// F(., y | z) from F(y,y) = 1, F(x,y) = z sum_w p(x,w) F(w,y).
Eigen::VectorXd first_visit_column(const er::FiniteFactor& f, std::size_t y, double z) {
  const auto n = static_cast<Eigen::Index>(f.size());
  const auto yi = static_cast<Eigen::Index>(y);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - z * f.transition();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  a.row(yi).setZero();
  a(yi, yi) = 1.0;
  b[yi] = 1.0;
  return a.partialPivLu().solve(b);
}

// L(x, . | z) from L(x,x) = 1, L(x,y) = z sum_w L(x,w) p(w,y) for y != x.
Eigen::RowVectorXd last_exit_row(const er::FiniteFactor& f, std::size_t x, double z) {
  const auto n = static_cast<Eigen::Index>(f.size());
  const auto xi = static_cast<Eigen::Index>(x);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - z * f.transition().transpose();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  a.row(xi).setZero();
  a(xi, xi) = 1.0;
  b[xi] = 1.0;
  return a.partialPivLu().solve(b).transpose();
}

}  // namespace

TEST(FiniteFactor, RejectsInvalidInput) {
  EXPECT_THROW(er::FiniteFactor({"o"}, 0, Eigen::MatrixXd::Zero(1, 1), false), er::InvalidModelError);
  EXPECT_THROW(er::FiniteFactor({"o", "a"}, 0, two_by_two(0, 1, 0.9, 0), false), er::InvalidModelError);
  EXPECT_THROW(er::FiniteFactor({"o", "a"}, 0, two_by_two(0.5, 0.5, 1, 0), false),
               er::InvalidModelError);
  EXPECT_THROW(er::FiniteFactor({"o", "o"}, 0, two_by_two(0, 1, 1, 0), false), er::InvalidModelError);
  EXPECT_THROW(er::FiniteFactor({"o", "a"}, 0, two_by_two(0, 1.2, -0.2, 1.2), false),
               er::InvalidModelError);
  Eigen::MatrixXd unreachable(3, 3);
  unreachable << 0, 1, 0, 1, 0, 0, 0, 1, 0;
  EXPECT_THROW(er::FiniteFactor({"o", "a", "b"}, 0, unreachable, false), er::InvalidModelError);
}

TEST(FiniteFactor, AcceptsRowsWithinTolerance) {
  EXPECT_NO_THROW(er::FiniteFactor({"o", "a"}, 0, two_by_two(0, 1 + 5e-13, 1, 0), false));
}

TEST(Green, ZeroArgumentIsOne) {
  for (const auto& f : {cat::flip(), cat::non_cayley_seven(), cat::z1_srw(), cat::z2_srw()}) {
    EXPECT_DOUBLE_EQ(er::green_at(f, 0.0), 1.0) << f.name();
  }
}

TEST(Green, FlipFactor) {
  const auto f = cat::flip();
  EXPECT_NEAR(er::green_at(f, 0.5), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(er::green_derivative_at(f, 0.5), 16.0 / 9.0, 1e-14);
  EXPECT_NEAR(er::u_at(f, 0.7), 0.49, 1e-15);
  EXPECT_DOUBLE_EQ(er::green_derivative_at(f, 0.0), 0.0);
}

TEST(Green, ReconstructedFactorReturnFunction) {
  const auto f = cat::non_cayley_seven();
  EXPECT_NEAR(er::u_at(f, 0.5), 0.2, 1e-15);
  const auto c = er::series_coefficients(f.finite(), 3);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_DOUBLE_EQ(c[0], 1.0);
  EXPECT_DOUBLE_EQ(c[1], 0.0);
  EXPECT_NEAR(c[2], 0.6, 1e-15);
  EXPECT_NEAR(c[3], 0.4, 1e-15);
}

TEST(Green, ReconstructedFactorUSeriesIsExactThroughOrderTen) {
  const auto f = cat::non_cayley_seven().finite();
  const er::TruncatedSeries g(er::series_coefficients(f, 10), 10);
  const auto u = er::TruncatedSeries::constant(1.0, 10) - g.reciprocal();
  for (int k = 0; k <= 10; ++k) {
    const double expected = k == 2 ? 0.6 : k == 3 ? 0.4 : 0.0;
    EXPECT_NEAR(u[static_cast<std::size_t>(k)], expected, 1e-15) << k;
  }
}

TEST(Green, SeriesCoefficients) {
  const auto c = er::series_coefficients(cat::flip().finite(), 4);
  EXPECT_EQ(c, (std::vector<double>{1, 0, 1, 0, 1}));
  EXPECT_EQ(er::series_coefficients(cat::flip().finite(), 0), std::vector<double>{1});
}

TEST(Green, MatchesTruncatedSeriesWithTailBound) {
  std::mt19937_64 gen(11);
  std::vector<er::Factor> factors{cat::non_cayley_seven(), cat::flip(), er::testing::directed_cycle()};
  for (int k = 0; k < 4; ++k) factors.push_back(er::testing::random_reversible_factor(6, gen, "R"));
  const int n = 200;
  for (const auto& f : factors) {
    const auto c = er::series_coefficients(f.finite(), n);
    for (int t = 1; t <= 9; ++t) {
      const double z = 0.1 * t;
      double partial = 0.0;
      for (int k = n; k >= 0; --k) partial = partial * z + c[static_cast<std::size_t>(k)];
      const double tail = std::pow(z, n + 1) / (1.0 - z);
      const double g = er::green_at(f, z);
      EXPECT_GE(g, partial - 1e-13);
      EXPECT_LE(g, partial + tail + 1e-13) << f.name() << " z=" << z;
    }
  }
}

TEST(Green, DerivativeMatchesCentralDifference) {
  std::mt19937_64 gen(5);
  std::vector<er::Factor> factors{cat::non_cayley_seven(), cat::z1_srw(), cat::z2_srw(),
                                  er::testing::random_reversible_factor(8, gen, "R")};
  for (const auto& f : factors) {
    for (double z : {0.3, 0.6}) {
      const double h = 1e-5;
      const double fd = (er::green_at(f, z + h) - er::green_at(f, z - h)) / (2 * h);
      EXPECT_NEAR(er::green_derivative_at(f, z), fd, 1e-5 * std::abs(fd)) << f.name();
    }
  }
}

TEST(Green, DomainAndInstabilityErrors) {
  const auto f = cat::flip();
  EXPECT_THROW(er::green_at(f, 1.0), er::DomainError);
  EXPECT_THROW(er::green_at(f, -0.5), er::DomainError);
  EXPECT_THROW(er::green_derivative_at(cat::z2_srw(), 1.0), er::DomainError);
  EXPECT_THROW(er::green_at(f, std::nextafter(1.0, 0.0)), er::NumericalInstabilityError);
}

TEST(FirstVisitLastExit, MatchIndependentLinearSystems) {
  std::mt19937_64 gen(3);
  std::vector<er::Factor> factors{cat::non_cayley_seven(), cat::flip(), er::testing::directed_cycle(),
                                  er::testing::random_reversible_factor(12, gen, "R12")};
  for (const auto& fac : factors) {
    const auto& f = fac.finite();
    for (double z : {0.2, 0.5, 0.8}) {
      const auto g = er::green_matrix(f, z);
      for (std::size_t y = 0; y < f.size(); ++y) {
        const auto fcol = first_visit_column(f, y, z);
        const auto lrow = last_exit_row(f, y, z);
        for (std::size_t x = 0; x < f.size(); ++x) {
          const auto xi = static_cast<Eigen::Index>(x);
          const auto yi = static_cast<Eigen::Index>(y);
          EXPECT_NEAR(er::f_at(f, x, y, z), fcol[xi], 1e-12);
          EXPECT_NEAR(er::l_at(f, y, x, z), lrow[xi], 1e-12);
          // G(x,y) = F(x,y) G(y,y) and G(y,x) = G(y,y) L(y,x)
          EXPECT_NEAR(fcol[xi] * g(yi, yi), g(xi, yi), 1e-10);
          EXPECT_NEAR(g(yi, yi) * lrow[xi], g(yi, xi), 1e-10);
        }
        // G(y,y) (1 - U(y,y)) = 1 with U(y,y) = z sum_w p(y,w) F(w,y)
        const double u = z * f.transition().row(static_cast<Eigen::Index>(y)).dot(fcol);
        EXPECT_NEAR(g(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(y)) * (1 - u), 1.0,
                    1e-10);
      }
    }
  }
}

TEST(FirstVisit, DiagonalIsOne) {
  const auto f = cat::non_cayley_seven().finite();
  for (std::size_t x = 0; x < f.size(); ++x) EXPECT_NEAR(er::f_at(f, x, x, 0.7), 1.0, 1e-15);
}

TEST(FirstVisit, ReconstructedFactorReturnPaths) {
  const auto f = cat::non_cayley_seven().finite();
  const double z = 0.6;
  const auto o = f.index_of("o1");
  EXPECT_NEAR(er::f_at(f, f.index_of("A"), o, z), z / 2 + z * z / 2, 1e-14);
  EXPECT_NEAR(er::f_at(f, f.index_of("C"), o, z), z * z, 1e-14);
  EXPECT_NEAR(er::f_at(f, f.index_of("D"), o, z), z, 1e-14);
}

TEST(Spheres, BreadthFirstDistances) {
  const auto flip = er::sphere_decomposition(cat::flip().finite());
  ASSERT_EQ(flip.size(), 1u);
  EXPECT_EQ(flip.at(1), std::vector<std::size_t>{1});

  const auto cyc = er::sphere_decomposition(er::testing::directed_cycle().finite());
  ASSERT_EQ(cyc.size(), 2u);
  EXPECT_EQ(cyc.at(1), std::vector<std::size_t>{1});
  EXPECT_EQ(cyc.at(2), std::vector<std::size_t>{2});

  const auto v1 = cat::non_cayley_seven().finite();
  const auto s = er::sphere_decomposition(v1);
  std::size_t total = 0;
  for (const auto& [m, states] : s) total += states.size();
  EXPECT_EQ(total, v1.size() - 1);
  EXPECT_EQ(s.at(2), std::vector<std::size_t>{v1.index_of("B")});
  EXPECT_EQ(s.at(1).size(), 5u);
}

TEST(Factor, VariantAccessors) {
  const auto z2 = cat::z2_srw();
  EXPECT_FALSE(z2.is_finite());
  EXPECT_TRUE(z2.transitive());
  EXPECT_EQ(z2.name(), "Z2-SRW");
  EXPECT_EQ(z2.as_finite(), nullptr);
  const auto flip = cat::flip();
  EXPECT_TRUE(flip.is_two_element());
  EXPECT_FALSE(cat::non_cayley_seven().transitive());
}
