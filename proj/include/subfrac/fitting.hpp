#pragma once

// Least-squares power-law fits and multiplicative constant fits.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "subfrac/errors.hpp"

namespace subfrac {

struct RateFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
  size_t used = 0;
  std::string note;
};

/// Slope of log(value) against log(t). Pairs with a nonpositive or non-finite
/// value, or a repeated time, are dropped and listed in `note`.
inline RateFit fit_loglog(std::span<const double> times, std::span<const double> values, size_t min_points = 2) {
  require(times.size() == values.size(), "times and values must have the same length");
  std::vector<double> xs;
  std::vector<double> ys;
  std::string note;
  for (size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const double v = values[i];
    const bool dup = std::find(xs.begin(), xs.end(), std::log(t)) != xs.end();
    if (!(t > 0.0) || !std::isfinite(t) || !(v > 0.0) || !std::isfinite(v) || dup) {
      note += (note.empty() ? "excluded t=" : ", t=") + std::to_string(t);
      continue;
    }
    xs.push_back(std::log(t));
    ys.push_back(std::log(v));
  }
  if (xs.size() < min_points) {
    throw DomainError("need at least " + std::to_string(min_points) + " usable (t, value) pairs, got " +
                      std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  require(sxx > 0.0, "times must not all coincide");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.used = xs.size();
  fit.note = note;
  if (xs.size() > 2) {
    double ssr = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const double r = ys[i] - fit.intercept - fit.slope * xs[i];
      ssr += r * r;
    }
    fit.stderr_slope = std::sqrt(ssr / (n - 2.0) / sxx);
  }
  return fit;
}

/// Convergence-rate estimate; needs at least four usable pairs.
inline RateFit estimate_rate(std::span<const double> times, std::span<const double> values) {
  return fit_loglog(times, values, 4);
}

/// Range of a set of ratios value/shape: the best constants c, C with
/// c * shape <= value <= C * shape over the sample.
struct ConstantFit {
  double lower = 0.0;
  double upper = 0.0;
  size_t used = 0;
  size_t skipped = 0;
  double spread() const { return upper / lower; }
};

inline ConstantFit fit_constants(std::span<const double> ratios) {
  ConstantFit fit;
  fit.lower = INFINITY;
  fit.upper = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      ++fit.skipped;
      continue;
    }
    fit.lower = std::min(fit.lower, r);
    fit.upper = std::max(fit.upper, r);
    ++fit.used;
  }
  require(fit.used > 0, "no usable ratios to fit");
  return fit;
}

}  // namespace subfrac
