#pragma once

// The Poisson semigroup on hyperbolic 3-space: mass in the critical region
// t^(2-eps) <= d(x, o) <= t^(2+eps), Busemann and kernel-quotient limits,
// the spherical transform of radial data and the L1 gap of non-radial data.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "subfrac/convergence.hpp"
#include "subfrac/errors.hpp"
#include "subfrac/kernels.hpp"
#include "subfrac/manifolds.hpp"
#include "subfrac/quadrature.hpp"
#include "subfrac/report.hpp"

namespace subfrac {

/// Gamma(s + m_a/2) Gamma(s/2 + rho/2) / (Gamma(s + 1) Gamma(s/2 + m_a/4)).
inline double gamma_ratio(double s, const ManifoldModel& m) {
  require(m.is_hyperbolic(), "gamma_ratio is defined on the hyperbolic model");
  require(s >= 0.0 && std::isfinite(s), "s must be nonnegative");
  const double ma = m.m_alpha();
  const double rho = m.rho();
  return std::exp(std::lgamma(s + 0.5 * ma) + std::lgamma(0.5 * s + 0.5 * rho) - std::lgamma(s + 1.0) -
                  std::lgamma(0.5 * s + 0.25 * ma));
}

/// log of t (1 + r) (t^2 + r^2)^(-5/4) e^(-r - sqrt(t^2 + r^2)).
inline double log_poisson_bound_shape(double t, double r) {
  require(t > 0.0 && r >= 0.0, "t must be positive and r nonnegative");
  const double q = std::hypot(t, r);
  return std::log(t) + std::log1p(r) - 2.5 * std::log(q) - r - q;
}

/// p_t(r) over its bound shape.
inline double poisson_bound_ratio(double t, double r) {
  return std::exp(log_poisson_kernel_h3_closed(t, r) - log_poisson_bound_shape(t, r));
}

/// p_t(r) over gamma(r / sqrt(t^2 + r^2)) t r (t^2 + r^2)^(-5/4) e^(-r - sqrt(t^2 + r^2)).
inline double poisson_asymptotic_ratio(double t, double r) {
  require(r > 0.0, "r must be positive");
  const double q = std::hypot(t, r);
  const double log_shape = std::log(t) + std::log(r) - 2.5 * std::log(q) - r - q;
  return std::exp(log_poisson_kernel_h3_closed(t, r) - log_shape) /
         gamma_ratio(r / q, ManifoldModel::hyperbolic_ball3());
}

struct CriticalRegion {
  double t;
  double epsilon;
  double r_min;
  double r_max;

  static CriticalRegion make(double t, double epsilon) {
    require(t > 1.0 && std::isfinite(t), "critical region needs t > 1");
    require(epsilon > 0.0 && epsilon < 2.0, "epsilon must lie in (0,2)");
    return {t, epsilon, std::pow(t, 2.0 - epsilon), std::pow(t, 2.0 + epsilon)};
  }
};

struct RegionMass {
  double inside;
  double below;
  double above;
  double total() const { return inside + below + above; }
};

namespace detail {

/// int_a^b p_t(r) 4 pi sinh^2 r dr in the variable L = log r (b may be infinite).
inline double poisson_shell_mass(double t, double a, double b, const QuadratureSpec& quad) {
  auto f = [&](double l) {
    const double r = std::exp(l);
    return std::exp(log_poisson_mass_density_h3(t, r) + l);
  };
  QuadratureSpec q = quad;
  q.abs_floor = 0.0;
  const double la = std::log(a);
  QuadResult res;
  if (std::isinf(b)) {
    res = integrate_to_infinity(f, la, 1.0, q);
  } else {
    // the density peaks near r = t^2
    std::vector<double> br;
    const double lpk = 2.0 * std::log(t);
    if (lpk > la && lpk < std::log(b)) br.push_back(lpk);
    res = integrate_adaptive(f, la, std::log(b), q, br);
  }
  if (!res.converged) throw AccuracyError("critical-region integral did not converge", res.value, res.error);
  return res.value;
}

}  // namespace detail

/// Mass of the Poisson kernel below, inside and above the critical region.
inline RegionMass critical_region_mass(double t, double epsilon, const QuadratureSpec& quad = {}) {
  require(t >= 2.0, "critical_region_mass needs t >= 2");
  const CriticalRegion cr = CriticalRegion::make(t, epsilon);
  quad.validate();
  QuadratureSpec q = quad;
  q.abs_floor = 0.0;
  auto below_f = [&](double r) { return r <= 0.0 ? 0.0 : std::exp(log_poisson_mass_density_h3(t, r)); };
  const QuadResult below = integrate_adaptive(below_f, 0.0, cr.r_min, q);
  if (!below.converged) throw AccuracyError("critical-region integral did not converge", below.value, below.error);
  return {detail::poisson_shell_mass(t, cr.r_min, cr.r_max, quad), below.value,
          detail::poisson_shell_mass(t, cr.r_max, INFINITY, quad)};
}

namespace detail {

struct PolarPosition {
  double s;  // hyperbolic distance of y from o
  double c;  // cosine of the angle between y and b
};

inline PolarPosition polar_position(const Point& y, const Point& b) {
  require(std::abs(b.norm() - 1.0) <= 1e-12, "direction must be a unit vector");
  validate_point(ManifoldModel::hyperbolic_ball3(), y);
  const double ny = y.norm();
  return {h3_radius(y), ny > 0.0 ? std::clamp(dot(y, b) / ny, -1.0, 1.0) : 1.0};
}

}  // namespace detail

/// (d(x, o) - d(x, y)) - busemann(y, b) for x at distance r = t^2 toward b.
/// Evaluated without cancellation: with A = cosh s - c sinh s and
/// B = cosh s + c sinh s, cosh d(x, y) = (e^r / 2) A (1 + e^(-2r) B / A).
inline double busemann_gap(double t, double epsilon, const Point& y, const Point& b) {
  require(t > 0.0 && std::isfinite(t), "t must be positive");
  require(epsilon > 0.0 && epsilon < 2.0, "epsilon must lie in (0,2)");
  const auto [s, c] = detail::polar_position(y, b);
  if (s == 0.0) return 0.0;
  const double r = t * t;
  const double a = std::cosh(s) - c * std::sinh(s);
  const double bb = std::cosh(s) + c * std::sinh(s);
  const double x1 = std::exp(-2.0 * r) * bb / a;
  const double log_x = r - M_LN2 + std::log(a) + std::log1p(x1);
  const double w = std::exp(-2.0 * log_x);  // 1 / cosh^2 d
  return -std::log1p(x1) - std::log1p(-w / (2.0 * (1.0 + std::sqrt(1.0 - w))));
}

struct QuotientSample {
  double measured;
  double predicted;
  bool underflow = false;
};

/// p_t(d(x, y)) / p_t(d(x, o)) against e^(2 busemann(y, b)), x at distance r toward b.
inline QuotientSample kernel_quotient(double t, double r, const Point& y, const Point& b) {
  require(t > 0.0 && std::isfinite(t), "t must be positive");
  require(r > 0.0 && std::isfinite(r), "r must be positive");
  const auto [s, c] = detail::polar_position(y, b);
  const double predicted = std::exp(-2.0 * std::log(std::cosh(s) - c * std::sinh(s)));
  if (s == 0.0) return {1.0, predicted, false};
  const double lp_x = log_poisson_kernel_h3_closed(t, r);
  const double lp_y = log_poisson_kernel_h3_closed(t, h3_distance_polar(r, s, c));
  const bool underflow = !std::isfinite(lp_x) || !std::isfinite(lp_y) || lp_x < -745.0 || lp_y < -745.0;
  return {std::exp(lp_y - lp_x), predicted, underflow};
}

/// Average over boundary directions b of e^(2 busemann(y, b)); equals 1.
inline double boundary_mean_exp2tau(const Point& y, const QuadratureSpec& quad = {}) {
  const auto [s, c0] = detail::polar_position(y, Point(1.0));
  (void)c0;
  if (s == 0.0) return 1.0;
  auto f = [&](double c) { return std::exp(-2.0 * std::log(std::cosh(s) - c * std::sinh(s))); };
  return 0.5 * integrate(f, -1.0, 1.0, quad);
}

/// Average over boundary directions of |e^(2 busemann(y, b)) - 1|.
inline double deficiency(const Point& y, const QuadratureSpec& quad = {}) {
  const auto [s, c0] = detail::polar_position(y, Point(1.0));
  (void)c0;
  if (s == 0.0) return 0.0;
  // the integrand changes sign where cosh s - c sinh s = 1
  const double c_star = std::tanh(0.5 * s);
  auto f = [&](double c) { return std::abs(std::expm1(-2.0 * std::log(std::cosh(s) - c * std::sinh(s)))); };
  QuadratureSpec q = quad;
  q.abs_floor = 0.0;
  const double brk[] = {c_star};
  return 0.5 * integrate(f, -1.0, 1.0, q, brk);
}

/// int f(r) phi_lambda(r) 4 pi sinh^2 r dr with phi_lambda(r) = sin(lambda r) / (lambda sinh r);
/// lambda real or purely imaginary. Point masses must sit at o.
inline double spherical_transform_h3(const InitialDatum& f, std::complex<double> lambda, const QuadratureSpec& quad = {}) {
  const ManifoldModel& m = f.model();
  require(m.is_hyperbolic(), "spherical transform is defined on the hyperbolic model");
  require(lambda.real() == 0.0 || lambda.imag() == 0.0, "lambda must be real or purely imaginary");
  double total = 0.0;
  for (const auto& wp : f.masses()) {
    require(wp.location.norm2() == 0.0, "spherical transform needs radial data about o");
    total += wp.weight;
  }
  if (!f.bump()) return total;
  const Bump& b = *f.bump();
  require(b.center.norm2() == 0.0, "spherical transform needs a bump centered at o");
  // phi * sinh^2 r = sinh r * sin(lambda r) / lambda, real for the allowed lambda
  auto phi_sinh2 = [&](double r) -> double {
    if (lambda == 0.0) return r * std::sinh(r);
    if (lambda.imag() == 0.0) return std::sinh(r) * std::sin(lambda.real() * r) / lambda.real();
    const double mu = lambda.imag();
    return std::sinh(r) * std::sinh(mu * r) / mu;
  };
  auto g = [&](double r) { return b(r) * 4.0 * M_PI * phi_sinh2(r); };
  QuadratureSpec q = quad.with_rel_tol(std::min(quad.rel_tol, 1e-12));
  q.abs_floor = 1e-14 * std::abs(f.bump_mass());
  return total + integrate(g, 0.0, b.radius, q);
}

/// || K_t f - M p_t(., o) ||_1 for the Poisson semigroup over the given times.
inline ExperimentReport l1_gap_trajectory(const InitialDatum& f, const std::vector<double>& times,
                                          const QuadratureSpec& quad = {}) {
  const ManifoldModel& m = f.model();
  require(m.is_hyperbolic(), "l1_gap_trajectory runs on the hyperbolic model");
  require(!times.empty(), "times must not be empty");
  for (size_t i = 1; i < times.size(); ++i) require(times[i] > times[i - 1], "times must be increasing");
  const Point o;
  require(f.support_radius(o) <= 2.0, "data must lie within distance 2 of o");
  const KernelFamily fam = KernelFamily::hyp_poisson(m);
  ExperimentReport rep;
  rep.family = fam.name();
  rep.model = m.name();
  rep.times = times;
  for (double t : times) rep.l1_values.push_back(l1_distance(Kernel(fam, t, quad), f, o, quad));
  rep.fit_slope();
  rep.oracle_notes = "weighted sup distance not defined on this model";
  return rep;
}

}  // namespace subfrac
