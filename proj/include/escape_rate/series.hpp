#pragma once

// Truncated formal power series c_0 + c_1 z + ... + c_N z^N over doubles.
//
// Each series carries a first-order bound on the absolute error of its
// coefficients (max norm), propagated through every operation from the
// inputs' bounds and the unit roundoff.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "escape_rate/errors.hpp"

namespace escape_rate {

class TruncatedSeries {
 public:
  static constexpr double kEps = std::numeric_limits<double>::epsilon();

  explicit TruncatedSeries(int order = 0) : c_(static_cast<std::size_t>(check(order)) + 1, 0.0) {}
  TruncatedSeries(std::vector<double> coeffs, int order, double error = 0.0)
      : c_(static_cast<std::size_t>(check(order)) + 1, 0.0), err_(error) {
    for (std::size_t k = 0; k < std::min(coeffs.size(), c_.size()); ++k) c_[k] = coeffs[k];
  }

  static TruncatedSeries constant(double v, int order) {
    TruncatedSeries s(order);
    s.c_[0] = v;
    return s;
  }
  // a z
  static TruncatedSeries monomial(double a, int order) {
    TruncatedSeries s(order);
    if (order >= 1) s.c_[1] = a;
    return s;
  }

  int order() const noexcept { return static_cast<int>(c_.size()) - 1; }
  double operator[](std::size_t k) const { return c_.at(k); }
  double& operator[](std::size_t k) { return c_.at(k); }
  const std::vector<double>& coefficients() const noexcept { return c_; }
  double error_bound() const noexcept { return err_; }

  double l1() const {
    double s = 0.0;
    for (double v : c_) s += std::abs(v);
    return s;
  }

  double evaluate(double z) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  TruncatedSeries truncated(int order) const {
    TruncatedSeries s(c_, order, err_);
    return s;
  }

  friend TruncatedSeries operator+(const TruncatedSeries& a, const TruncatedSeries& b) {
    const int n = std::min(a.order(), b.order());
    TruncatedSeries s(n);
    for (int k = 0; k <= n; ++k) s.c_[k] = a.c_[k] + b.c_[k];
    s.err_ = a.err_ + b.err_ + kEps * s.l1();
    return s;
  }
  friend TruncatedSeries operator-(const TruncatedSeries& a, const TruncatedSeries& b) {
    return a + (-1.0) * b;
  }
  friend TruncatedSeries operator*(double v, const TruncatedSeries& a) {
    TruncatedSeries s(a);
    for (double& x : s.c_) x *= v;
    s.err_ = std::abs(v) * a.err_ + kEps * s.l1();
    return s;
  }
  friend TruncatedSeries operator*(const TruncatedSeries& a, const TruncatedSeries& b) {
    const int n = std::min(a.order(), b.order());
    TruncatedSeries s(n);
    for (int i = 0; i <= n; ++i) {
      if (a.c_[i] == 0.0) continue;
      for (int j = 0; i + j <= n; ++j) s.c_[i + j] += a.c_[i] * b.c_[j];
    }
    const double na = a.l1();
    const double nb = b.l1();
    s.err_ = na * b.err_ + nb * a.err_ + a.err_ * b.err_ + (n + 1) * kEps * na * nb;
    return s;
  }

  // 1 / a; needs a nonzero constant term.
  TruncatedSeries reciprocal() const {
    if (c_[0] == 0.0) throw DomainError("series reciprocal needs a nonzero constant term");
    const int n = order();
    TruncatedSeries q(n);
    q.c_[0] = 1.0 / c_[0];
    for (int k = 1; k <= n; ++k) {
      double acc = 0.0;
      for (int j = 1; j <= k; ++j) acc += c_[j] * q.c_[k - j];
      q.c_[k] = -acc / c_[0];
    }
    const double nq = q.l1();
    q.err_ = nq * nq * err_ + (n + 1) * kEps * nq * nq * l1();
    return q;
  }

  friend TruncatedSeries operator/(const TruncatedSeries& a, const TruncatedSeries& b) {
    return a * b.reciprocal();
  }

  // a(z) / z; needs a zero constant term. Order drops by one.
  TruncatedSeries shift_down() const {
    if (c_[0] != 0.0) throw DomainError("shift_down needs a zero constant term");
    const int n = std::max(order() - 1, 0);
    TruncatedSeries s(n);
    for (int k = 0; k + 1 <= order(); ++k) s.c_[k] = c_[k + 1];
    s.err_ = err_;
    return s;
  }
  // z a(z), keeping the order.
  TruncatedSeries shift_up() const {
    TruncatedSeries s(order());
    for (int k = 1; k <= order(); ++k) s.c_[k] = c_[k - 1];
    s.err_ = err_;
    return s;
  }

  // a(g(z)); needs g(0) = 0. Horner evaluation in the series ring.
  TruncatedSeries compose(const TruncatedSeries& g) const {
    if (g.c_[0] != 0.0) throw DomainError("composition needs an inner series with zero constant term");
    const int n = std::min(order(), g.order());
    TruncatedSeries acc = constant(c_[static_cast<std::size_t>(order())], n);
    for (int k = order() - 1; k >= 0; --k) {
      acc = acc * g + constant(c_[static_cast<std::size_t>(k)], n);
    }
    acc.err_ += err_ * std::pow(std::max(1.0, g.l1()), order());
    return acc;
  }

  double max_abs_difference(const TruncatedSeries& other) const {
    const int n = std::min(order(), other.order());
    double d = 0.0;
    for (int k = 0; k <= n; ++k) d = std::max(d, std::abs(c_[k] - other.c_[k]));
    return d;
  }

 private:
  static int check(int order) {
    if (order < 0) throw DomainError("series order must be >= 0");
    return order;
  }

  std::vector<double> c_;
  double err_ = 0.0;
};

}  // namespace escape_rate
