#pragma once

// Density of the one-sided stable subordinator eta_t^alpha, i.e. the inverse
// Laplace transform of s -> exp(-t s^(alpha/2)), and its two-regime envelope.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "subfrac/errors.hpp"
#include "subfrac/fitting.hpp"
#include "subfrac/quadrature.hpp"
#include "subfrac/special_functions.hpp"

namespace subfrac {

struct StableParams {
  double alpha = 1.0;
  double t = 1.0;
  double u = 1.0;

  void validate() const {
    require(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0,2)");
    require(t > 0.0 && std::isfinite(t), "t must be positive");
    require(u > 0.0 && std::isfinite(u), "u must be positive");
  }
};

/// Exponential constant of the small-u envelope; also the minimum of Kanter's
/// function, so the envelope's exponent is sharp.
inline double c_alpha(double alpha) {
  require(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0,2)");
  return (2.0 - alpha) / 2.0 * std::pow(alpha / 2.0, alpha / (2.0 - alpha));
}

namespace detail {

// With beta = alpha/2, the subordinator at time t is t^(1/beta) S where
// S = (A(U)/E)^((1-beta)/beta), U ~ Unif(0, pi), E ~ Exp(1) and
//   A(phi) = [sin(beta phi)^beta sin((1-beta) phi)^(1-beta) / sin(phi)]^(1/(1-beta)).
// Differentiating P(t^(1/beta) S <= u) gives
//   eta = kappa z / (pi u) * int_0^pi A e^{-A z} dphi,
//   z = t^(1/(1-beta)) u^(-beta/(1-beta)),  kappa = beta/(1-beta).
class KanterIntegrand {
 public:
  explicit KanterIntegrand(double beta)
      : beta_(beta), log_a0_(std::log1p(-beta) + beta / (1.0 - beta) * std::log(beta)) {}

  double a0() const { return std::exp(log_a0_); }
  double log_a0() const { return log_a0_; }

  // log A(phi) - log A(0) for phi in (0, pi/2]
  double excess_left(double phi) const {
    return (beta_ * log_sinc(beta_ * phi) + (1.0 - beta_) * log_sinc((1.0 - beta_) * phi) -
            log_sinc(phi)) /
           (1.0 - beta_);
  }

  // same quantity at phi = pi - delta, delta in (0, pi/2]
  double excess_right(double delta) const {
    const double phi = M_PI - delta;
    const double lsin_phi_over_phi = std::log(std::sin(delta) / phi);
    return (beta_ * log_sinc(beta_ * phi) + (1.0 - beta_) * log_sinc((1.0 - beta_) * phi) -
            lsin_phi_over_phi) /
           (1.0 - beta_);
  }

 private:
  double beta_;
  double log_a0_;
};

// log of eta via the convergent series
//   eta = (1/(pi u)) sum_k (-1)^(k+1) Gamma(k beta + 1)/k! sin(k pi beta) y^k,  y = t u^-beta
inline double log_stable_series(double beta, double t, double u) {
  const double log_y = std::log(t) - beta * std::log(u);
  double sum = 0.0;
  double first = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double mag =
        std::exp(std::lgamma(k * beta + 1.0) - std::lgamma(k + 1.0) + k * log_y);
    const double term = ((k % 2 == 1) ? 1.0 : -1.0) * mag * std::sin(k * M_PI * beta);
    if (k == 1) first = term;
    sum += term;
    if (mag < 1e-18 * std::abs(first)) break;
  }
  return std::log(sum) - std::log(M_PI * u);
}

inline double log_stable_integral(double beta, double t, double u, double rel_tol) {
  const KanterIntegrand kanter(beta);
  const double one_minus = 1.0 - beta;
  const double log_z = (std::log(t) - beta * std::log(u)) / one_minus;
  const double z = std::exp(log_z);
  const double a0z = kanter.a0() * z;

  auto integrand = [&](double excess) {
    // A e^{-(A - A0) z} / A0
    return std::exp(excess - a0z * std::expm1(excess));
  };
  auto left = [&](double phi) { return phi <= 0.0 ? 1.0 : integrand(kanter.excess_left(phi)); };
  auto right = [&](double delta) {
    return delta <= 0.0 ? 0.0 : integrand(kanter.excess_right(delta));
  };

  std::vector<double> left_breaks;
  std::vector<double> right_breaks;
  // Near phi = 0 the excess is ~ beta phi^2 / 2; resolve the Gaussian width.
  const double width = std::sqrt(2.0 / (beta * std::max(a0z, 1e-300)));
  for (int k = 1; k < 80; ++k) {
    const double phi = 0.5 * M_PI * std::ldexp(1.0, -k);
    if (phi < 0.05 * width) break;
    left_breaks.push_back(phi);
  }
  // Near phi = pi, A blows up; resolve down to where A z ~ 50.
  for (int k = 1; k < 90; ++k) {
    const double delta = 0.5 * M_PI * std::ldexp(1.0, -k);
    right_breaks.push_back(delta);
    if (a0z * std::exp(kanter.excess_right(delta)) > 60.0) break;
  }

  QuadratureSpec spec;
  spec.rel_tol = rel_tol;
  spec.abs_floor = 0.0;
  spec.max_panels = 4000;
  const QuadResult lres = integrate_adaptive(left, 0.0, 0.5 * M_PI, spec, left_breaks);
  const QuadResult rres = integrate_adaptive(right, 0.0, 0.5 * M_PI, spec, right_breaks);
  const double total = lres.value + rres.value;
  if (!(total > 0.0) || lres.error + rres.error > 100.0 * rel_tol * total) {
    throw AccuracyError("stable density quadrature did not converge", total,
                        lres.error + rres.error);
  }
  // eta = kappa z / (pi u) * A0 e^{-A0 z} * total
  return std::log(beta / one_minus) + log_z - std::log(M_PI * u) + kanter.log_a0() - a0z +
         std::log(total);
}

}  // namespace detail

/// Natural log of eta_t^alpha(u). Finite even where the density underflows.
inline double log_stable_density(const StableParams& p) {
  p.validate();
  const double beta = 0.5 * p.alpha;
  const double y = p.t * std::pow(p.u, -beta);
  if (y < 0.05) return detail::log_stable_series(beta, p.t, p.u);
  return detail::log_stable_integral(beta, p.t, p.u, 1e-11);
}

inline Flagged stable_density_checked(const StableParams& p) {
  const double lg = log_stable_density(p);
  if (lg < std::log(std::numeric_limits<double>::min())) return {0.0, true};
  return {std::exp(lg), false};
}

inline double stable_density(const StableParams& p) { return stable_density_checked(p).value; }

struct Envelope {
  double lower;
  double upper;
};

/// Log of the envelope shape: stretched exponential below u = t^(2/alpha),
/// power law t u^(-1-alpha/2) above.
inline double log_eta_envelope(const StableParams& p) {
  p.validate();
  const double a = p.alpha;
  const double lt = std::log(p.t);
  const double lu = std::log(p.u);
  if (lu <= 2.0 / a * lt) {
    return lt / (2.0 - a) - (4.0 - a) / (4.0 - 2.0 * a) * lu -
           c_alpha(a) * std::exp(2.0 / (2.0 - a) * lt - a / (2.0 - a) * lu);
  }
  return lt - (1.0 + 0.5 * a) * lu;
}

/// Both sides carry the same shape; the harness fits one constant per side.
inline Envelope eta_envelope(const StableParams& p) {
  const double v = std::exp(log_eta_envelope(p));
  return {v, v};
}

/// Spread of eta / envelope over a (t, u) grid; underflowed points are skipped.
inline ConstantFit eta_envelope_fit(double alpha, std::span<const double> times, std::span<const double> us) {
  std::vector<double> ratios;
  for (double t : times) {
    for (double u : us) {
      const StableParams p{alpha, t, u};
      const Flagged eta = stable_density_checked(p);
      ratios.push_back(eta.underflow ? 0.0 : std::exp(log_stable_density(p) - log_eta_envelope(p)));
    }
  }
  return fit_constants(ratios);
}

}  // namespace subfrac
