#pragma once

// Root Green functions of the simple random walks on Z and Z^2.
//
// For the simple random walk on Z^2 the return generating function is
//
//   G(z) = (1/pi^2) Int_{[0,pi]^2} dx / (1 - z (cos x1 + cos x2) / 2)
//        = (2/pi) K(z),
//
// with K the complete elliptic integral of the first kind in modulus form.
// K (and E, needed for the derivative) are evaluated by the
// arithmetic-geometric mean; the double integral is kept as an independent
// cross-check.

#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

#include "escape_rate/errors.hpp"

namespace escape_rate::lattice {

struct CompleteElliptic {
  double k;  // K(m = modulus^2)
  double e;  // E(m = modulus^2)
};

// K and E of modulus `modulus` in [0, 1) by the AGM with the Legendre sum
// E/K = 1 - sum_{n>=0} 2^{n-1} c_n^2.
inline CompleteElliptic complete_elliptic_agm(double modulus) {
  if (!(modulus >= 0.0 && modulus < 1.0)) {
    throw DomainError("complete elliptic integral: modulus must lie in [0,1)");
  }
  double a = 1.0;
  double b = std::sqrt((1.0 - modulus) * (1.0 + modulus));
  double c = modulus;
  double pow2 = 0.5;
  double sum = pow2 * c * c;
  for (int n = 0; n < 64; ++n) {
    const double an = 0.5 * (a + b);
    const double bn = std::sqrt(a * b);
    c = 0.5 * (a - b);
    a = an;
    b = bn;
    pow2 *= 2.0;
    sum += pow2 * c * c;
    if (std::abs(c) <= 1e-17 * a) break;
  }
  const double k = std::numbers::pi / (2.0 * a);
  return {k, k * (1.0 - sum)};
}

namespace detail {

// Below this argument the return-probability series converges faster than
// the AGM formula for G' loses digits to cancellation.
inline constexpr double kSeriesCutoff = 0.5;

// sum_m a_m z^{2m} and its derivative, a_m = (C(2m,m)/4^m)^d.
template <int Dim>
std::array<double, 2> return_series(double z) {
  double coeff = 1.0;  // C(2m,m)/4^m
  double zpow = 1.0;   // z^{2m}
  double g = 1.0;
  double dg = 0.0;
  const double z2 = z * z;
  for (int m = 1; m < 400; ++m) {
    coeff *= (2.0 * m - 1.0) / (2.0 * m);
    const double a = Dim == 1 ? coeff : coeff * coeff;
    const double prev = zpow;
    zpow *= z2;
    const double term = a * zpow;
    g += term;
    dg += 2.0 * m * a * prev * z;
    if (term < 1e-18 * g) break;
  }
  return {g, dg};
}

inline void check_unit_interval(double z) {
  if (!(z >= 0.0 && z < 1.0)) {
    throw DomainError("lattice Green function: argument must lie in [0,1)");
  }
}

}  // namespace detail

// G(0,0|z) for the simple random walk on Z.
inline double z1_green(double z) {
  detail::check_unit_interval(z);
  return 1.0 / std::sqrt((1.0 - z) * (1.0 + z));
}

inline double z1_green_derivative(double z) {
  detail::check_unit_interval(z);
  const double s = (1.0 - z) * (1.0 + z);
  return z / (s * std::sqrt(s));
}

// G(0,0|z) for the simple random walk on Z^2, AGM route.
inline double z2_green(double z) {
  detail::check_unit_interval(z);
  if (z < detail::kSeriesCutoff) return detail::return_series<2>(z)[0];
  return 2.0 / std::numbers::pi * complete_elliptic_agm(z).k;
}

// d/dz G(0,0|z) = (2/pi) (E - (1 - z^2) K) / (z (1 - z^2)).
inline double z2_green_derivative(double z) {
  detail::check_unit_interval(z);
  if (z < detail::kSeriesCutoff) return detail::return_series<2>(z)[1];
  const auto [k, e] = complete_elliptic_agm(z);
  const double s = (1.0 - z) * (1.0 + z);
  return 2.0 / std::numbers::pi * (e - s * k) / (z * s);
}

// G(0,0|z) for Z^2 by tensor Gauss-Legendre quadrature of the Fourier
// integral over [0,pi]^2. Panels are graded geometrically toward the origin,
// where the integrand peaks as z -> 1.
inline double z2_green_quadrature(double z, int levels = 12) {
  detail::check_unit_interval(z);
  using Rule = boost::math::quadrature::gauss<double, 30>;
  const double pi = std::numbers::pi;

  std::array<double, 32> edges{};
  int n_edges = 0;
  edges[n_edges++] = 0.0;
  for (int l = levels; l >= 0; --l) edges[n_edges++] = pi * std::ldexp(1.0, -l);

  auto integrate_axis = [&](auto&& f) {
    double total = 0.0;
    for (int p = 0; p + 1 < n_edges; ++p) {
      total += Rule::integrate(f, edges[p], edges[p + 1]);
    }
    return total;
  };

  const double half_z = 0.5 * z;
  const double outer = integrate_axis([&](double x1) {
    const double c1 = std::cos(x1);
    return integrate_axis(
        [&](double x2) { return 1.0 / (1.0 - half_z * (c1 + std::cos(x2))); });
  });
  return outer / (pi * pi);
}

// W(z) = z G(z), the form in which the Z^2 walk usually enters free-product
// computations.
inline double z2_w(double z) { return z * z2_green(z); }

}  // namespace escape_rate::lattice
