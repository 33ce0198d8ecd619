#pragma once

// Test-side reference computations, kept independent of the library's quadrature.

#include <cmath>
#include <functional>

namespace oracle {

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// int_{e^lo}^{e^hi} f(u) du in the variable x = log u.
inline double simpson_log(const std::function<double(double)>& f, double lo, double hi, int n) {
  return simpson([&](double x) { const double u = std::exp(x); return f(u) * u; }, lo, hi, n);
}

/// Poisson kernel on R^n: c_n t (t^2 + s^2)^(-(n+1)/2).
inline double poisson_euclid(int n, double t, double s) {
  const double cn = std::tgamma(0.5 * (n + 1)) / std::pow(M_PI, 0.5 * (n + 1));
  return cn * t * std::pow(t * t + s * s, -0.5 * (n + 1));
}

/// One-sided stable density of index 1/2 (the alpha = 1 subordinator).
inline double eta_alpha1(double t, double u) {
  return t / (2.0 * std::sqrt(M_PI)) * std::pow(u, -1.5) * std::exp(-t * t / (4.0 * u));
}

/// H^3 Poisson kernel from Bessel K_2 (std::cyl_bessel_k).
inline double poisson_h3(double t, double r) {
  const double q2 = t * t + r * r;
  const double q = std::sqrt(q2);
  const double ratio = r == 0.0 ? 1.0 : r / std::sinh(r);
  return ratio * t * std::cyl_bessel_k(2.0, q) / (2.0 * M_PI * M_PI * q2);
}

/// Hyperbolic distance in the ball model.
inline double ball_distance(const double* x, const double* y) {
  double d2 = 0.0, nx = 0.0, ny = 0.0;
  for (int i = 0; i < 3; ++i) {
    d2 += (x[i] - y[i]) * (x[i] - y[i]);
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  return std::acosh(1.0 + 2.0 * d2 / ((1.0 - nx) * (1.0 - ny)));
}

}  // namespace oracle
