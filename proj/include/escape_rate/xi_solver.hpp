#pragma once

// The coupled system for xi_i = xi_i(1).
//
// Inside the free product, factor i generating functions are evaluated at
// xi_i(z) = alpha_i z / (1 - Hbar_i(z)), where Hbar_i = sum_{j != i} H_j and
//
//   H_j(z) = (alpha_j z / xi_j(z)) * (1 - 1 / G_j(xi_j(z)))
//
// is the generating function of first returns to the root whose first step
// is in factor j. Starting from xi_i = alpha_i z the substitution map is
// monotone, so plain iteration climbs to the minimal (probabilistic) fixed
// point. A few Newton steps polish the result; xi'(1) then follows from the
// implicit function theorem applied to the same system.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "escape_rate/errors.hpp"
#include "escape_rate/factor.hpp"
#include "escape_rate/model.hpp"

namespace escape_rate {

struct SolverOptions {
  double tol = 1e-13;
  long max_iter = 1'000'000;
  bool polish = true;
  bool record_trajectory = false;
};

struct XiSolution {
  std::vector<double> xi;
  std::vector<double> xi_prime;
  std::vector<double> h;
  std::vector<double> h_bar;
  double u_root = 0.0;  // U(o,o|1)
  double g_root = 0.0;  // G(o,o|1)
  std::vector<double> green_at_xi;
  std::vector<double> green_prime_at_xi;
  long iterations = 0;
  double residual = 0.0;
  // Iterates of the monotone phase (only when requested).
  std::vector<std::vector<double>> trajectory;
};

namespace detail {

struct FactorValues {
  double g;
  double dg;
};

inline double return_part(double alpha, double z, double xi, double g) {
  return alpha * z / xi * (1.0 - 1.0 / g);
}

// d/dxi of return_part at fixed z.
inline double return_part_slope(double alpha, double z, double xi, double g, double dg) {
  return alpha * z * (dg / (g * g) / xi - (1.0 - 1.0 / g) / (xi * xi));
}

inline double green_or_throw(const Factor& f, double xi) {
  if (!(xi < 1.0)) {
    throw NonTransientModelError("xi reached 1 for factor '" + f.name() +
                                 "': the walk is not transient");
  }
  try {
    return green_at(f, xi);
  } catch (const NumericalInstabilityError&) {
    throw NonTransientModelError("Green function of factor '" + f.name() +
                                 "' diverges at xi = " + std::to_string(xi));
  }
}

inline std::vector<double> returns_at(const ModelSpec& m, double z,
                                      const std::vector<double>& xi) {
  std::vector<double> h(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) {
    h[j] = return_part(m.weight(j), z, xi[j], green_or_throw(m.factor(j), xi[j]));
  }
  return h;
}

inline double fixed_point_residual(const ModelSpec& m, double z,
                                   const std::vector<double>& xi,
                                   const std::vector<double>& h) {
  double total = 0.0;
  for (double v : h) total += v;
  double res = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    res = std::max(res, std::abs(xi[i] * (1.0 - (total - h[i])) - m.weight(i) * z));
  }
  return res;
}

// Jacobian of Phi_i(xi) = xi_i (1 - Hbar_i) - alpha_i z with respect to xi.
inline Eigen::MatrixXd system_jacobian(const ModelSpec& m, double z,
                                       const std::vector<double>& xi,
                                       const std::vector<FactorValues>& gv,
                                       const std::vector<double>& h) {
  const auto r = static_cast<Eigen::Index>(m.size());
  double total = 0.0;
  for (double v : h) total += v;
  Eigen::MatrixXd jac(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (Eigen::Index j = 0; j < r; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (i == j) {
        jac(i, j) = 1.0 - (total - h[ui]);
      } else {
        jac(i, j) = -xi[ui] * return_part_slope(m.weight(uj), z, xi[uj], gv[uj].g, gv[uj].dg);
      }
    }
  }
  return jac;
}

inline std::vector<FactorValues> factor_values(const ModelSpec& m,
                                               const std::vector<double>& xi) {
  std::vector<FactorValues> out(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) {
    out[j] = {green_or_throw(m.factor(j), xi[j]), green_derivative_at(m.factor(j), xi[j])};
  }
  return out;
}

// Newton refinement near an already converged iterate. A step is accepted
// only if it lowers the residual and keeps every xi inside (0, 1).
inline void polish(const ModelSpec& m, double z, std::vector<double>& xi) {
  auto h = returns_at(m, z, xi);
  double res = fixed_point_residual(m, z, xi, h);
  for (int it = 0; it < 4 && res > 0.0; ++it) {
    const auto gv = factor_values(m, xi);
    const Eigen::MatrixXd jac = system_jacobian(m, z, xi, gv, h);
    double total = 0.0;
    for (double v : h) total += v;
    Eigen::VectorXd phi(static_cast<Eigen::Index>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i) {
      phi[static_cast<Eigen::Index>(i)] = xi[i] * (1.0 - (total - h[i])) - m.weight(i) * z;
    }
    const Eigen::VectorXd step = jac.fullPivLu().solve(phi);
    std::vector<double> trial(xi);
    bool inside = step.allFinite();
    for (std::size_t i = 0; inside && i < m.size(); ++i) {
      trial[i] -= step[static_cast<Eigen::Index>(i)];
      inside = trial[i] > 0.0 && trial[i] < 1.0;
    }
    if (!inside) return;
    const auto trial_h = returns_at(m, z, trial);
    const double trial_res = fixed_point_residual(m, z, trial, trial_h);
    if (!(trial_res < res)) return;
    xi = std::move(trial);
    h = trial_h;
    res = trial_res;
  }
}

}  // namespace detail

// Minimal fixed point of xi_i = alpha_i z / (1 - sum_{j != i} H_j) at a given
// z (z = 1 for the walk itself; nearby z for the finite-difference check).
inline std::vector<double> solve_xi_at(const ModelSpec& m, double z,
                                       const SolverOptions& opt,
                                       long* iterations = nullptr,
                                       std::vector<std::vector<double>>* trajectory = nullptr) {
  if (!(opt.tol > 0.0)) throw UsageError("solver tolerance must be positive");
  const std::size_t r = m.size();
  std::vector<double> xi(r);
  for (std::size_t i = 0; i < r; ++i) xi[i] = m.weight(i) * z;
  if (trajectory) trajectory->push_back(xi);

  long it = 0;
  double delta = std::numeric_limits<double>::infinity();
  while (delta >= opt.tol) {
    if (it >= opt.max_iter) {
      const auto h = detail::returns_at(m, z, xi);
      throw ConvergenceError("xi iteration did not converge in " +
                                 std::to_string(opt.max_iter) + " iterations",
                             detail::fixed_point_residual(m, z, xi, h));
    }
    const auto h = detail::returns_at(m, z, xi);
    double total = 0.0;
    for (double v : h) total += v;
    delta = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const double denom = 1.0 - (total - h[i]);
      const double next = denom > 0.0 ? m.weight(i) * z / denom
                                      : std::numeric_limits<double>::infinity();
      delta = std::max(delta, std::abs(next - xi[i]));
      xi[i] = next;
      if (!(next < 1.0 - opt.tol)) {
        throw NonTransientModelError("xi_" + std::to_string(i + 1) +
                                     " reached 1: the walk is not transient");
      }
    }
    ++it;
    if (trajectory) trajectory->push_back(xi);
  }
  if (opt.polish) detail::polish(m, z, xi);
  if (iterations) *iterations = it;
  return xi;
}

// xi'(1) by implicit differentiation of xi_i (1 - Hbar_i(z)) = alpha_i z.
inline std::vector<double> xi_derivative(const ModelSpec& m, const XiSolution& sol) {
  const std::size_t r = m.size();
  std::vector<detail::FactorValues> gv(r);
  for (std::size_t j = 0; j < r; ++j) gv[j] = {sol.green_at_xi[j], sol.green_prime_at_xi[j]};
  const Eigen::MatrixXd jac = detail::system_jacobian(m, 1.0, sol.xi, gv, sol.h);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(r));
  for (std::size_t i = 0; i < r; ++i) {
    rhs[static_cast<Eigen::Index>(i)] = m.weight(i) + sol.xi[i] * sol.h_bar[i];
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    throw DegenerateModelError("implicit-differentiation system for xi'(1) is singular");
  }
  const Eigen::VectorXd d = lu.solve(rhs);
  return {d.data(), d.data() + d.size()};
}

// Central difference of xi(z) at z = 1; independent of the Jacobian path.
inline std::vector<double> xi_derivative_finite_difference(const ModelSpec& m,
                                                           double step = 1e-5,
                                                           const SolverOptions& opt = {}) {
  SolverOptions o = opt;
  o.tol = std::min(o.tol, 1e-14);
  const auto up = solve_xi_at(m, 1.0 + step, o);
  const auto down = solve_xi_at(m, 1.0 - step, o);
  std::vector<double> d(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) d[i] = (up[i] - down[i]) / (2.0 * step);
  return d;
}

// Step for the central difference: 1e-5, shrunk so that xi(1 + step) stays
// well inside the unit interval for models close to the transience boundary.
inline double finite_difference_step(const XiSolution& sol, double preferred = 1e-5) {
  double step = preferred;
  for (std::size_t i = 0; i < sol.xi.size(); ++i) {
    if (sol.xi_prime[i] > 0.0) step = std::min(step, 0.01 * (1.0 - sol.xi[i]) / sol.xi_prime[i]);
  }
  return step;
}

// G(o,o|1) = 1 / (1 - sum_i H_i(1)).
inline double product_green(const ModelSpec& m, const XiSolution& sol) {
  double u = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) u += sol.h.at(i);
  if (!(u < 1.0)) throw NonTransientModelError("U(o,o|1) >= 1: the walk is not transient");
  return 1.0 / (1.0 - u);
}

inline XiSolution solve_xi(const ModelSpec& m, const SolverOptions& opt = {}) {
  XiSolution sol;
  sol.xi = solve_xi_at(m, 1.0, opt, &sol.iterations,
                       opt.record_trajectory ? &sol.trajectory : nullptr);
  const std::size_t r = m.size();
  sol.h = detail::returns_at(m, 1.0, sol.xi);
  double total = 0.0;
  for (double v : sol.h) total += v;
  sol.h_bar.resize(r);
  for (std::size_t i = 0; i < r; ++i) sol.h_bar[i] = total - sol.h[i];
  sol.u_root = total;
  if (!(total < 1.0 - opt.tol)) {
    throw NonTransientModelError("U(o,o|1) reached 1: the walk is not transient");
  }
  sol.g_root = product_green(m, sol);
  sol.green_at_xi.resize(r);
  sol.green_prime_at_xi.resize(r);
  for (std::size_t j = 0; j < r; ++j) {
    sol.green_at_xi[j] = green_at(m.factor(j), sol.xi[j]);
    sol.green_prime_at_xi[j] = green_derivative_at(m.factor(j), sol.xi[j]);
  }
  sol.residual = detail::fixed_point_residual(m, 1.0, sol.xi, sol.h);
  sol.xi_prime = xi_derivative(m, sol);
  return sol;
}

// sum_i (1 - (1 - xi_i) G_i(xi_i)); equals 1 on every converged solution.
inline double normalization_sum(const XiSolution& sol) {
  double s = 0.0;
  for (std::size_t i = 0; i < sol.xi.size(); ++i) {
    s += 1.0 - (1.0 - sol.xi[i]) * sol.green_at_xi[i];
  }
  return s;
}

}  // namespace escape_rate
