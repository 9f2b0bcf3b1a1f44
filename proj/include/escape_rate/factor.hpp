#pragma once

// Factors of a free product and their root generating functions.
//
// A factor is either a finite Markov chain given by an explicit transition
// matrix, or one of the built-in lattice walks whose Green function is known
// in closed form. All objects are immutable after construction.

#include <cmath>
#include <cstddef>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "escape_rate/errors.hpp"
#include "escape_rate/lattice_green.hpp"

namespace escape_rate {

inline constexpr double kRowSumTolerance = 1e-12;

class FiniteFactor {
 public:
  FiniteFactor(std::vector<std::string> labels, std::size_t root,
               Eigen::MatrixXd transition, bool transitive)
      : labels_(std::move(labels)),
        root_(root),
        p_(std::move(transition)),
        transitive_(transitive) {
    validate();
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t root() const noexcept { return root_; }
  bool transitive() const noexcept { return transitive_; }
  const Eigen::MatrixXd& transition() const noexcept { return p_; }
  double p(std::size_t x, std::size_t y) const { return p_(x, y); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t x) const { return labels_.at(x); }

  std::size_t index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == label) return i;
    }
    throw InvalidModelError("unknown state label '" + label + "'");
  }

  // Directed graph distance from the root along positive-probability edges.
  const std::vector<int>& root_distances() const noexcept { return dist_; }

 private:
  void validate() {
    const auto n = labels_.size();
    if (n < 2) throw InvalidModelError("finite factor needs at least 2 states");
    if (p_.rows() != static_cast<Eigen::Index>(n) ||
        p_.cols() != static_cast<Eigen::Index>(n)) {
      throw InvalidModelError("transition matrix shape does not match states");
    }
    if (root_ >= n) throw InvalidModelError("root index out of range");
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != n) throw InvalidModelError("duplicate state labels");

    for (std::size_t x = 0; x < n; ++x) {
      double sum = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        const double v = p_(x, y);
        if (!std::isfinite(v) || v < 0.0) {
          throw InvalidModelError("row '" + labels_[x] +
                                  "': probabilities must be finite and >= 0");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw InvalidModelError("row '" + labels_[x] + "' sums to " +
                                std::to_string(sum) + ", expected 1");
      }
      if (p_(x, x) != 0.0) {
        throw InvalidModelError("state '" + labels_[x] +
                                "' has a self-loop; p(x,x) must be 0");
      }
    }

    dist_.assign(n, -1);
    dist_[root_] = 0;
    std::queue<std::size_t> frontier;
    frontier.push(root_);
    while (!frontier.empty()) {
      const auto x = frontier.front();
      frontier.pop();
      for (std::size_t y = 0; y < n; ++y) {
        if (p_(x, y) > 0.0 && dist_[y] < 0) {
          dist_[y] = dist_[x] + 1;
          frontier.push(y);
        }
      }
    }
    for (std::size_t x = 0; x < n; ++x) {
      if (dist_[x] < 0) {
        throw InvalidModelError("state '" + labels_[x] +
                                "' is not reachable from the root");
      }
    }
  }

  std::vector<std::string> labels_;
  std::size_t root_;
  Eigen::MatrixXd p_;
  bool transitive_;
  std::vector<int> dist_;
};

enum class LatticeKind { Z1, Z2 };

inline const char* to_string(LatticeKind k) {
  return k == LatticeKind::Z1 ? "Z1-SRW" : "Z2-SRW";
}

// Simple random walk on Z or Z^2; always vertex-transitive.
struct AnalyticFactor {
  LatticeKind kind;

  double green(double z) const {
    return kind == LatticeKind::Z1 ? lattice::z1_green(z) : lattice::z2_green(z);
  }
  double green_derivative(double z) const {
    return kind == LatticeKind::Z1 ? lattice::z1_green_derivative(z)
                                   : lattice::z2_green_derivative(z);
  }
  static constexpr bool transitive() { return true; }
};

class Factor {
 public:
  Factor(FiniteFactor f, std::string name = {})
      : impl_(std::move(f)), name_(std::move(name)) {}
  Factor(AnalyticFactor f, std::string name = {})
      : impl_(f), name_(name.empty() ? to_string(f.kind) : std::move(name)) {}

  bool is_finite() const noexcept { return impl_.index() == 0; }
  const FiniteFactor& finite() const { return std::get<FiniteFactor>(impl_); }
  const AnalyticFactor& analytic() const { return std::get<AnalyticFactor>(impl_); }
  const FiniteFactor* as_finite() const noexcept {
    return std::get_if<FiniteFactor>(&impl_);
  }
  const AnalyticFactor* as_analytic() const noexcept {
    return std::get_if<AnalyticFactor>(&impl_);
  }

  bool transitive() const {
    return is_finite() ? finite().transitive() : AnalyticFactor::transitive();
  }
  // Two-element factors are special: two of them alone give a recurrent walk.
  bool is_two_element() const { return is_finite() && finite().size() == 2; }

  const std::string& name() const noexcept { return name_; }

 private:
  std::variant<FiniteFactor, AnalyticFactor> impl_;
  std::string name_;
};

namespace detail {

inline void check_argument(double z) {
  if (!(z >= 0.0 && z < 1.0)) {
    throw DomainError("generating function argument must lie in [0,1), got " +
                      std::to_string(z));
  }
}

// LU factorization of (I - zP) with a conditioning guard.
class ResolventLU {
 public:
  ResolventLU(const FiniteFactor& f, double z) {
    check_argument(z);
    const auto n = static_cast<Eigen::Index>(f.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - z * f.transition();
    lu_.compute(a);
    if (!(lu_.rcond() > 1e-13)) {
      throw NumericalInstabilityError(
          "I - zP is numerically singular at z = " + std::to_string(z));
    }
  }

  // Column y of (I - zP)^{-1}, i.e. G(., y | z).
  Eigen::VectorXd column(std::size_t y) const {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(lu_.rows(), static_cast<Eigen::Index>(y));
    return checked(lu_.solve(e));
  }
  // Row x of (I - zP)^{-1}, i.e. G(x, . | z).
  Eigen::VectorXd row(std::size_t x) const {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(lu_.rows(), static_cast<Eigen::Index>(x));
    return checked(lu_.transpose().solve(e));
  }

 private:
  static Eigen::VectorXd checked(Eigen::VectorXd v) {
    if (!v.allFinite()) throw NumericalInstabilityError("non-finite Green value");
    return v;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline void check_state(const FiniteFactor& f, std::size_t x) {
  if (x >= f.size()) throw DomainError("state index out of range");
}

}  // namespace detail

// G_i(o_i, o_i | z).
inline double green_at(const Factor& f, double z) {
  detail::check_argument(z);
  if (const auto* a = f.as_analytic()) return a->green(z);
  const auto& ff = f.finite();
  return detail::ResolventLU(ff, z).column(ff.root())[static_cast<Eigen::Index>(ff.root())];
}

// d/dz G_i(o_i, o_i | z) = [(I - zP)^{-1} P (I - zP)^{-1}]_{o,o}.
inline double green_derivative_at(const Factor& f, double z) {
  detail::check_argument(z);
  if (const auto* a = f.as_analytic()) return a->green_derivative(z);
  const auto& ff = f.finite();
  const detail::ResolventLU lu(ff, z);
  const auto o = ff.root();
  return lu.row(o).dot(ff.transition() * lu.column(o));
}

// Full Green matrix G(x, y | z); rows index x, columns y.
inline Eigen::MatrixXd green_matrix(const FiniteFactor& f, double z) {
  const detail::ResolventLU lu(f, z);
  const auto n = static_cast<Eigen::Index>(f.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index y = 0; y < n; ++y) g.col(y) = lu.column(static_cast<std::size_t>(y));
  return g;
}

// First-return generating function U_i(o_i, o_i | z) = 1 - 1/G_i(z).
inline double u_at(const Factor& f, double z) { return 1.0 - 1.0 / green_at(f, z); }

// First-visit generating function F_i(x, y | z) = G(x,y)/G(y,y).
inline double f_at(const FiniteFactor& f, std::size_t x, std::size_t y, double z) {
  detail::check_state(f, x);
  detail::check_state(f, y);
  const auto col = detail::ResolventLU(f, z).column(y);
  return col[static_cast<Eigen::Index>(x)] / col[static_cast<Eigen::Index>(y)];
}

// Last-exit generating function L_i(x, y | z) = G(x,y)/G(x,x).
inline double l_at(const FiniteFactor& f, std::size_t x, std::size_t y, double z) {
  detail::check_state(f, x);
  detail::check_state(f, y);
  const auto row = detail::ResolventLU(f, z).row(x);
  return row[static_cast<Eigen::Index>(y)] / row[static_cast<Eigen::Index>(x)];
}

// p^{(n)}(o, o) for n = 0..max_n.
inline std::vector<double> series_coefficients(const FiniteFactor& f, int max_n) {
  if (max_n < 0) throw DomainError("series order must be >= 0");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(max_n) + 1);
  const auto o = static_cast<Eigen::Index>(f.root());
  Eigen::RowVectorXd dist = Eigen::RowVectorXd::Unit(static_cast<Eigen::Index>(f.size()), o);
  out.push_back(1.0);
  for (int n = 1; n <= max_n; ++n) {
    dist = dist * f.transition();
    out.push_back(dist[o]);
  }
  return out;
}

// S_i(m) for m >= 1: non-root states grouped by directed distance from the
// root.
inline std::map<int, std::vector<std::size_t>> sphere_decomposition(const FiniteFactor& f) {
  std::map<int, std::vector<std::size_t>> spheres;
  const auto& d = f.root_distances();
  for (std::size_t x = 0; x < f.size(); ++x) {
    if (x != f.root()) spheres[d[x]].push_back(x);
  }
  return spheres;
}

}  // namespace escape_rate
