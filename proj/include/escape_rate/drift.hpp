#pragma once

// Rate of escape with respect to the block length.
//
// Three closed forms are provided and are expected to agree:
//   * exit times:      ell = 1 / Lambda, Lambda assembled from gamma'_{ij}(1);
//   * double generating functions: ratio of partial derivatives of the
//     denominator of sum_x G(o,x|z) w^{ell(x)};
//   * groups only:     ell = sum_i alpha_i (1-xi_i)/xi_i (1 - (1-xi_i) G_i(xi_i)).

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "escape_rate/errors.hpp"
#include "escape_rate/factor.hpp"
#include "escape_rate/model.hpp"
#include "escape_rate/xi_solver.hpp"

namespace escape_rate {

inline constexpr double kNearCritical = 1e-12;
inline constexpr double kMethodAgreement = 1e-9;
inline constexpr double kNuConsistency = 1e-8;

// Markov chain of exit-point types.
struct TypeChain {
  Eigen::MatrixXd qhat;
  std::vector<double> nu;             // explicit formula
  std::vector<double> nu_stationary;  // linear solve of nu q = nu
  double stationarity_residual = 0.0;
  double nu_discrepancy = 0.0;
  double max_row_defect = 0.0;
};

struct DriftReport {
  double ell_exit_time = 0.0;
  double ell_dgf = 0.0;
  std::optional<double> ell_group;
  double lambda_exit = 0.0;  // Lambda = 1 / ell
  TypeChain type_chain;
  std::vector<double> partial;
  std::optional<double> sigma;
  std::optional<double> markovian_lambda;
  std::map<std::string, double> residuals;
  long iterations = 0;
  double solver_residual = 0.0;

  double ell() const noexcept { return ell_exit_time; }
};

namespace detail {

inline void check_not_critical(const XiSolution& sol) {
  for (std::size_t i = 0; i < sol.xi.size(); ++i) {
    if (1.0 - sol.xi[i] < kNearCritical) {
      throw NonTransientModelError("xi_" + std::to_string(i + 1) +
                                   " is within 1e-12 of 1: transience cannot be resolved");
    }
    if (sol.xi[i] < kNearCritical) {
      throw DegenerateModelError("xi_" + std::to_string(i + 1) + " is too close to 0");
    }
  }
}

// 1/((1 - xi_j) G_j(xi_j)) - 1 = sum_{y != o} L_j(o, y | xi_j).
inline double escape_mass(const XiSolution& sol, std::size_t j) {
  return 1.0 / ((1.0 - sol.xi[j]) * sol.green_at_xi[j]) - 1.0;
}

// x(i) = 1 - (1 - xi_i) G_i(xi_i).
inline double exit_weight(const XiSolution& sol, std::size_t i) {
  return 1.0 - (1.0 - sol.xi[i]) * sol.green_at_xi[i];
}

}  // namespace detail

inline TypeChain type_chain(const ModelSpec& m, const XiSolution& sol) {
  detail::check_not_critical(sol);
  const std::size_t r = m.size();
  const auto ri = static_cast<Eigen::Index>(r);
  TypeChain tc;
  tc.qhat = Eigen::MatrixXd::Zero(ri, ri);
  for (std::size_t i = 0; i < r; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      if (i == j) continue;
      const double q = m.weight(j) / m.weight(i) * sol.xi[i] / sol.xi[j] *
                       (1.0 - sol.xi[j]) / (1.0 - sol.xi[i]) * detail::escape_mass(sol, j);
      tc.qhat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q;
      row += q;
    }
    tc.max_row_defect = std::max(tc.max_row_defect, std::abs(row - 1.0));
  }

  tc.nu.resize(r);
  double norm = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    tc.nu[i] = m.weight(i) * (1.0 - sol.xi[i]) / sol.xi[i] * detail::exit_weight(sol, i);
    norm += tc.nu[i];
  }
  for (double& v : tc.nu) v /= norm;

  // (q^T - I) nu = 0 with the last equation replaced by sum nu = 1.
  Eigen::MatrixXd a = tc.qhat.transpose() - Eigen::MatrixXd::Identity(ri, ri);
  a.row(ri - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ri);
  b[ri - 1] = 1.0;
  const Eigen::VectorXd ns = a.fullPivLu().solve(b);
  tc.nu_stationary.assign(ns.data(), ns.data() + ns.size());

  const Eigen::Map<const Eigen::VectorXd> nu(tc.nu.data(), ri);
  tc.stationarity_residual = (tc.qhat.transpose() * nu - nu).cwiseAbs().maxCoeff();
  tc.nu_discrepancy = (nu - ns).cwiseAbs().maxCoeff();
  if (!(tc.nu_discrepancy <= kNuConsistency)) {
    throw InternalConsistencyError(
        "invariant measure of the type chain: explicit formula and linear solve "
        "differ by " + std::to_string(tc.nu_discrepancy));
  }
  return tc;
}

// gamma'_{ij}(1) by the chain rule on
//   gamma_{ij}(z) = (1/alpha_i) (xi_i/xi_j) (1/((1-xi_j) G_j(xi_j)) - 1).
inline double gamma_prime(const ModelSpec& m, const XiSolution& sol, std::size_t i,
                          std::size_t j) {
  const double xi = sol.xi[i];
  const double xj = sol.xi[j];
  const double dxi = sol.xi_prime[i];
  const double dxj = sol.xi_prime[j];
  const double g = sol.green_at_xi[j];
  const double dg = sol.green_prime_at_xi[j];
  const double phi = detail::escape_mass(sol, j);
  const double denom = (1.0 - xj) * g;
  const double dphi = dxj * (g - (1.0 - xj) * dg) / (denom * denom);
  return ((dxi / xj - xi * dxj / (xj * xj)) * phi + xi / xj * dphi) / m.weight(i);
}

struct ExitTimeResult {
  double lambda;
  double ell;
};

inline ExitTimeResult drift_exit_time(const ModelSpec& m, const XiSolution& sol,
                                      const TypeChain& tc) {
  detail::check_not_critical(sol);
  double lambda = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i == j) continue;
      lambda += tc.nu[i] * m.weight(j) * (1.0 - sol.xi[j]) / (1.0 - sol.xi[i]) *
                gamma_prime(m, sol, i, j);
    }
  }
  if (!(lambda > 0.0)) {
    throw InternalConsistencyError("Lambda = " + std::to_string(lambda) + " is not positive");
  }
  return {lambda, 1.0 / lambda};
}

inline ExitTimeResult drift_exit_time(const ModelSpec& m, const XiSolution& sol) {
  return drift_exit_time(m, sol, type_chain(m, sol));
}

inline double drift_dgf(const ModelSpec& m, const XiSolution& sol) {
  detail::check_not_critical(sol);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double xi = sol.xi[i];
    const double g = sol.green_at_xi[i];
    num += detail::exit_weight(sol, i) * g * (1.0 - xi);
    den += sol.xi_prime[i] * (g - (1.0 - xi) * sol.green_prime_at_xi[i]);
  }
  if (!(std::abs(den) > 0.0)) throw DegenerateModelError("drift denominator vanishes");
  return num / den;
}

// Valid only when every factor is a group walk (vertex-transitive).
inline double drift_group(const ModelSpec& m, const XiSolution& sol) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m.factor(i).transitive()) {
      throw PreconditionError("group formula needs vertex-transitive factors; factor " +
                              std::to_string(i + 1) + " ('" + m.factor(i).name() +
                              "') is not");
    }
  }
  detail::check_not_critical(sol);
  double ell = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    ell += m.weight(i) * (1.0 - sol.xi[i]) / sol.xi[i] * detail::exit_weight(sol, i);
  }
  return ell;
}

// ell_i = nu(i) ell.
inline std::vector<double> partial_rates(const TypeChain& tc, double ell) {
  std::vector<double> out(tc.nu.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tc.nu[i] * ell;
  return out;
}

struct MarkovianRate {
  double sigma;
  double lambda;
};

// Rate of the Markovian length |x| = d(o, x): lambda = ell * sigma, where sigma
// is the mean root distance of a freshly stabilized block.
inline MarkovianRate markovian_rate(const ModelSpec& m, const XiSolution& sol,
                                    const TypeChain& tc, double ell) {
  const std::size_t r = m.size();
  std::vector<double> sphere_sum(r, 0.0);
  for (std::size_t j = 0; j < r; ++j) {
    const auto* f = m.factor(j).as_finite();
    if (!f) {
      throw UnsupportedFactorError("Markovian rate needs finite factors; factor " +
                                   std::to_string(j + 1) + " ('" + m.factor(j).name() +
                                   "') is not finite");
    }
    const auto row = detail::ResolventLU(*f, sol.xi[j]).row(f->root());
    const double g_oo = row[static_cast<Eigen::Index>(f->root())];
    for (const auto& [radius, states] : sphere_decomposition(*f)) {
      for (auto y : states) sphere_sum[j] += radius * row[static_cast<Eigen::Index>(y)] / g_oo;
    }
  }
  double sigma = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      if (i == j) continue;
      sigma += tc.nu[i] * m.weight(j) / m.weight(i) * sol.xi[i] / sol.xi[j] *
               (1.0 - sol.xi[j]) / (1.0 - sol.xi[i]) * sphere_sum[j];
    }
  }
  return {sigma, ell * sigma};
}

// Tolerances applied by check_report; keyed like DriftReport::residuals.
inline const std::map<std::string, double>& residual_limits() {
  static const std::map<std::string, double> limits{
      {"exit_vs_dgf", kMethodAgreement},
      {"group_vs_dgf", kMethodAgreement},
      {"normalization", 1e-9},
      {"nu_stationarity", 1e-10},
      {"nu_formula_vs_solve", 1e-10},
      {"qhat_row_sums", 1e-10},
      {"partial_sum", 1e-10},
      {"xi_prime_fd_relative", 1e-4},
  };
  return limits;
}

struct AnalysisOptions {
  SolverOptions solver;
  bool finite_difference_check = true;
};

// Runs every applicable formula and records the cross-check residuals.
inline DriftReport analyze(const ModelSpec& m, const XiSolution& sol,
                           const AnalysisOptions& opt = {}) {
  DriftReport rep;
  rep.iterations = sol.iterations;
  rep.solver_residual = sol.residual;
  rep.type_chain = type_chain(m, sol);
  const auto et = drift_exit_time(m, sol, rep.type_chain);
  rep.lambda_exit = et.lambda;
  rep.ell_exit_time = et.ell;
  rep.ell_dgf = drift_dgf(m, sol);
  if (m.all_transitive()) rep.ell_group = drift_group(m, sol);
  rep.partial = partial_rates(rep.type_chain, rep.ell());
  if (m.all_finite()) {
    const auto mr = markovian_rate(m, sol, rep.type_chain, rep.ell());
    rep.sigma = mr.sigma;
    rep.markovian_lambda = mr.lambda;
  }

  auto& res = rep.residuals;
  res["exit_vs_dgf"] = std::abs(rep.ell_exit_time - rep.ell_dgf);
  if (rep.ell_group) res["group_vs_dgf"] = std::abs(*rep.ell_group - rep.ell_dgf);
  res["normalization"] = std::abs(normalization_sum(sol) - 1.0);
  res["nu_stationarity"] = rep.type_chain.stationarity_residual;
  res["nu_formula_vs_solve"] = rep.type_chain.nu_discrepancy;
  res["qhat_row_sums"] = rep.type_chain.max_row_defect;
  res["xi_fixed_point"] = sol.residual;
  double psum = 0.0;
  for (double v : rep.partial) psum += v;
  res["partial_sum"] = std::abs(psum - rep.ell());
  if (opt.finite_difference_check) {
    const auto fd = xi_derivative_finite_difference(m, finite_difference_step(sol), opt.solver);
    double worst = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      worst = std::max(worst, std::abs(fd[i] - sol.xi_prime[i]) / std::abs(sol.xi_prime[i]));
    }
    res["xi_prime_fd_relative"] = worst;
  }
  return rep;
}

inline DriftReport analyze(const ModelSpec& m, const AnalysisOptions& opt = {}) {
  return analyze(m, solve_xi(m, opt.solver), opt);
}

// Names of residuals exceeding their limits, plus range violations of ell.
inline std::vector<std::string> check_report(const DriftReport& rep) {
  std::vector<std::string> failures;
  for (const auto& [name, limit] : residual_limits()) {
    const auto it = rep.residuals.find(name);
    if (it != rep.residuals.end() && !(it->second <= limit)) {
      failures.push_back(name + " = " + std::to_string(it->second) + " exceeds " +
                         std::to_string(limit));
    }
  }
  for (double ell : {rep.ell_exit_time, rep.ell_dgf}) {
    if (!(ell > 0.0 && ell <= 1.0)) failures.push_back("ell outside (0,1]");
  }
  return failures;
}

}  // namespace escape_rate
