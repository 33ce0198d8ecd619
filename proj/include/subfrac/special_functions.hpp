#pragma once

// Gamma, modified Bessel K of real order, and a few log-domain helpers
// used by the kernel formulas.

#include <cmath>
#include <limits>

#include "subfrac/errors.hpp"

namespace subfrac {

inline double gamma_fn(double x) {
  require(x > 0.0, "gamma_fn: argument must be positive");
  return std::tgamma(x);
}

inline double log_gamma_fn(double x) {
  require(x > 0.0, "log_gamma_fn: argument must be positive");
  return std::lgamma(x);
}

/// log(sin(x)/x), accurate near zero.
inline double log_sinc(double x) {
  const double x2 = x * x;
  if (std::abs(x) < 1e-3) return -x2 / 6.0 - x2 * x2 / 180.0 - x2 * x2 * x2 / 2835.0;
  return std::log(std::sin(x) / x);
}

/// log(sinh r) for r > 0 without overflow.
inline double log_sinh(double r) {
  if (r > 20.0) return r + std::log1p(-std::exp(-2.0 * r)) - M_LN2;
  return std::log(std::sinh(r));
}

/// log(r / sinh r), continuous at r = 0.
inline double log_r_over_sinh(double r) {
  r = std::abs(r);
  if (r < 1e-4) return -r * r / 6.0;
  return std::log(r) - log_sinh(r);
}

/// r / sinh r with the Taylor branch near zero.
inline double r_over_sinh(double r) {
  r = std::abs(r);
  if (r < 1e-4) return 1.0 - r * r / 6.0;
  if (r > 700.0) return std::exp(log_r_over_sinh(r));
  return r / std::sinh(r);
}

/// e^z K_nu(z) for z > 0.
///
/// Trapezoidal rule on K_nu(z) = int_0^inf exp(-z cosh s) cosh(nu s) ds. The
/// integrand is entire with double-exponential decay, so the rule converges
/// geometrically in 1/h; the step shrinks like z^(-1/2) to track the Gaussian
/// peak at s = 0 for large z.
inline double bessel_k_scaled(double order, double z) {
  require(std::isfinite(order), "bessel_k: order must be finite");
  require(z > 0.0 && std::isfinite(z), "bessel_k: argument must be positive");
  const double nu = std::abs(order);
  const double h = std::min(0.1, 0.5 / std::sqrt(z));
  double sum = 0.5;  // s = 0 term
  for (int k = 1; k < 100000; ++k) {
    const double s = k * h;
    const double sh = std::sinh(0.5 * s);
    const double expo = -2.0 * z * sh * sh + nu * s;
    const double term = 0.5 * (std::exp(expo) + std::exp(-2.0 * z * sh * sh - nu * s));
    sum += term;
    if (expo < -45.0 && 2.0 * z * sh * sh > 45.0) break;
  }
  return h * sum;
}

inline double log_bessel_k(double order, double z) {
  return std::log(bessel_k_scaled(order, z)) - z;
}

/// K_order(z); order is taken as |order|. Underflow is reported, not raised.
inline Flagged bessel_k_checked(double order, double z) {
  const double logk = log_bessel_k(order, z);
  if (logk < std::log(std::numeric_limits<double>::min())) return {0.0, true};
  return {std::exp(logk), false};
}

inline double bessel_k(double order, double z) { return bessel_k_checked(order, z).value; }

}  // namespace subfrac
