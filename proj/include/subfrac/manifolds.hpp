#pragma once

// Model geometries: Euclidean space R^n (n = 1, 2, 3) and real hyperbolic
// 3-space in the Poincare ball model. Every model is homogeneous and
// isotropic, so kernels and volumes depend on distances only.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "subfrac/errors.hpp"
#include "subfrac/quadrature.hpp"
#include "subfrac/special_functions.hpp"

namespace subfrac {

enum class Geometry { euclidean, hyperbolic_ball };

class ManifoldModel {
 public:
  static ManifoldModel euclidean(int n) {
    require(n >= 1 && n <= 3, "Euclidean dimension must be 1, 2 or 3");
    ManifoldModel m;
    m.kind_ = Geometry::euclidean;
    m.dim_ = n;
    m.rho_ = 0.0;
    m.nu_lower_ = n;
    m.nu_upper_ = n;
    m.theta_ = 1.0;
    return m;
  }

  /// Real hyperbolic 3-space: m_alpha = 2, m_2alpha = 0, rho = 1.
  static ManifoldModel hyperbolic_ball3() {
    ManifoldModel m;
    m.kind_ = Geometry::hyperbolic_ball;
    m.dim_ = 3;
    m.m_alpha_ = 2;
    m.m_2alpha_ = 0;
    m.rho_ = 0.5 * m.m_alpha_ + m.m_2alpha_;
    // not doubling; the exponents below are only meaningful on Euclidean models
    m.nu_lower_ = 3.0;
    m.nu_upper_ = 3.0;
    m.theta_ = 1.0;
    return m;
  }

  Geometry kind() const { return kind_; }
  bool is_euclidean() const { return kind_ == Geometry::euclidean; }
  bool is_hyperbolic() const { return kind_ == Geometry::hyperbolic_ball; }
  /// Two-sided Gaussian heat kernel bounds hold (used as a precondition).
  bool has_li_yau() const { return is_euclidean(); }
  int dim() const { return dim_; }
  double rho() const { return rho_; }
  int m_alpha() const { return m_alpha_; }
  int m_2alpha() const { return m_2alpha_; }
  double doubling_lower() const { return nu_lower_; }
  double doubling_upper() const { return nu_upper_; }
  double hoelder_theta() const { return theta_; }

  std::string name() const {
    return is_euclidean() ? "euclid" + std::to_string(dim_) : std::string("h3");
  }

  bool operator==(const ManifoldModel&) const = default;

 private:
  ManifoldModel() = default;

  Geometry kind_ = Geometry::euclidean;
  int dim_ = 1;
  double rho_ = 0.0;
  int m_alpha_ = 0;
  int m_2alpha_ = 0;
  double nu_lower_ = 1.0;
  double nu_upper_ = 1.0;
  double theta_ = 1.0;
};

/// Euclidean coordinates, or ball coordinates (norm < 1) on the hyperbolic model.
/// Unused trailing coordinates stay zero.
struct Point {
  std::array<double, 3> coords{};

  Point() = default;
  explicit Point(double x, double y = 0.0, double z = 0.0) : coords{x, y, z} {}

  double norm2() const { return coords[0] * coords[0] + coords[1] * coords[1] + coords[2] * coords[2]; }
  double norm() const { return std::sqrt(norm2()); }
  bool operator==(const Point&) const = default;
};

inline double dot(const Point& a, const Point& b) {
  return a.coords[0] * b.coords[0] + a.coords[1] * b.coords[1] + a.coords[2] * b.coords[2];
}

inline double distance2_euclid(const Point& a, const Point& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = a.coords[i] - b.coords[i];
    s += d * d;
  }
  return s;
}

inline void validate_point(const ManifoldModel& m, const Point& x) {
  for (int i = m.dim(); i < 3; ++i) {
    require(x.coords[static_cast<size_t>(i)] == 0.0, "point has coordinates beyond the model dimension");
  }
  for (double c : x.coords) require(std::isfinite(c), "point coordinates must be finite");
  if (m.is_hyperbolic()) require(x.norm2() < 1.0, "ball-model point must have norm < 1");
}

/// Hyperbolic distance from the origin of a ball-model point.
inline double h3_radius(const Point& y) { return 2.0 * std::atanh(y.norm()); }

/// Ball-model point at hyperbolic distance r from o along the unit vector `dir`.
inline Point h3_point(double r, const Point& dir) {
  const double th = std::tanh(0.5 * r);
  const double n = dir.norm();
  return Point(th * dir.coords[0] / n, th * dir.coords[1] / n, th * dir.coords[2] / n);
}

/// Distance between the points at radii r and s (from o) whose directions make
/// an angle with cosine 1 - omc. Works on q = cosh d - 1 in log form, so it
/// stays exact for nearby points and finite for radii in the hundreds.
inline double h3_distance_polar_omc(double r, double s, double omc) {
  omc = std::clamp(omc, 0.0, 2.0);
  const double diff = std::abs(0.5 * (r - s));
  // q = 2 sinh^2((r - s)/2) + sinh r sinh s (1 - c)
  const double l1 = diff > 0.0 ? M_LN2 + 2.0 * log_sinh(diff) : -INFINITY;
  const double l2 = (r > 0.0 && s > 0.0 && omc > 0.0) ? log_sinh(r) + log_sinh(s) + std::log(omc) : -INFINITY;
  const double hi = std::max(l1, l2);
  if (hi == -INFINITY) return 0.0;
  const double lq = hi + std::log1p(std::exp(std::min(l1, l2) - hi));
  if (lq < 600.0) return 2.0 * std::asinh(std::sqrt(0.5 * std::exp(lq)));
  return lq - M_LN2 + 2.0 * std::log1p(std::sqrt(1.0 + 2.0 * std::exp(-lq)));
}

/// d - r for the same configuration (c the cosine), exact for large r where
/// forming d and subtracting would lose every digit. Uses
/// cosh d = (e^r / 2) A (1 + e^(-2r) B / A), A = cosh s - c sinh s, B = cosh s + c sinh s.
inline double h3_distance_offset(double r, double s, double c) {
  c = std::clamp(c, -1.0, 1.0);
  if (r < 20.0) return h3_distance_polar_omc(r, s, 1.0 - c) - r;
  // log((1 + sqrt(1 - X^-2)) / 2) for X = cosh of a distance, given log X
  auto half_term = [](double log_x) {
    const double w = std::exp(-2.0 * log_x);
    return std::log1p(-w / (2.0 * (1.0 + std::sqrt(1.0 - w))));
  };
  const double a = std::cosh(s) - c * std::sinh(s);
  const double b = std::cosh(s) + c * std::sinh(s);
  const double x1 = std::exp(-2.0 * r) * b / a;
  const double x0 = std::exp(-2.0 * r);
  const double log_x1 = r - M_LN2 + std::log(a) + std::log1p(x1);
  const double log_x0 = r - M_LN2 + std::log1p(x0);
  return std::log(a) + std::log1p(x1) + half_term(log_x1) - std::log1p(x0) - half_term(log_x0);
}

inline double h3_distance_polar(double r, double s, double c) {
  return h3_distance_polar_omc(r, s, 1.0 - std::clamp(c, -1.0, 1.0));
}

inline double distance(const ManifoldModel& m, const Point& x, const Point& y) {
  validate_point(m, x);
  validate_point(m, y);
  if (m.is_euclidean()) return std::sqrt(distance2_euclid(x, y));
  const double diff2 = distance2_euclid(x, y);
  if (diff2 == 0.0) return 0.0;
  const double q = 2.0 * diff2 / ((1.0 - x.norm2()) * (1.0 - y.norm2()));  // cosh d - 1
  return 2.0 * std::asinh(std::sqrt(0.5 * q));
}

namespace detail {
inline double unit_ball_volume(int n) {
  switch (n) {
    case 1:
      return 2.0;
    case 2:
      return M_PI;
    default:
      return 4.0 * M_PI / 3.0;
  }
}
}  // namespace detail

inline double log_ball_volume(const ManifoldModel& m, double r) {
  require(r > 0.0, "ball radius must be positive");
  if (m.is_euclidean()) return std::log(detail::unit_ball_volume(m.dim())) + m.dim() * std::log(r);
  // pi (sinh 2r - 2r)
  if (r < 0.1) {
    const double x = 2.0 * r;
    const double x2 = x * x;
    const double series = x * x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (1.0 + x2 / 72.0)));
    return std::log(M_PI * series);
  }
  if (r > 20.0) return std::log(M_PI) + 2.0 * r - M_LN2 + std::log1p(-4.0 * r * std::exp(-2.0 * r) - std::exp(-4.0 * r));
  return std::log(M_PI * (std::sinh(2.0 * r) - 2.0 * r));
}

/// V(x, r); homogeneous models, so x only needs to be valid.
inline double ball_volume(const ManifoldModel& m, const Point& x, double r) {
  validate_point(m, x);
  return std::exp(log_ball_volume(m, r));
}

/// Total surface measure of the sphere of radius r: |S^{n-1}| r^{n-1}, or 4 pi sinh^2 r.
inline double log_radial_density(const ManifoldModel& m, double r) {
  require(r > 0.0, "radius must be positive");
  if (m.is_euclidean()) {
    switch (m.dim()) {
      case 1:
        return M_LN2;
      case 2:
        return std::log(2.0 * M_PI * r);
      default:
        return std::log(4.0 * M_PI) + 2.0 * std::log(r);
    }
  }
  return std::log(4.0 * M_PI) + 2.0 * log_sinh(r);
}

inline double radial_density(const ManifoldModel& m, double r) {
  return std::exp(log_radial_density(m, r));
}

inline double log_heat_kernel_radial(const ManifoldModel& m, double t, double d) {
  require(t > 0.0, "heat kernel time must be positive");
  require(d >= 0.0, "distance must be nonnegative");
  const double n = m.dim();
  if (m.is_euclidean()) return -0.5 * n * std::log(4.0 * M_PI * t) - d * d / (4.0 * t);
  return -1.5 * std::log(4.0 * M_PI * t) + log_r_over_sinh(d) - t - d * d / (4.0 * t);
}

inline double heat_kernel_radial(const ManifoldModel& m, double t, double d) {
  return std::exp(log_heat_kernel_radial(m, t, d));
}

inline double heat_kernel(const ManifoldModel& m, double t, const Point& x, const Point& y) {
  require(t > 0.0, "heat kernel time must be positive");
  return heat_kernel_radial(m, t, distance(m, x, y));
}

using RadialFunction = std::function<double(double)>;

/// int_0^inf g(r) * (surface measure at r) dr. `scale` sets the first panel width.
inline QuadResult integrate_radial_result(const ManifoldModel& m, const RadialFunction& g,
                                          const QuadratureSpec& quad, double scale = 1.0) {
  quad.validate();
  auto f = [&](double r) {
    if (r <= 0.0) return m.is_euclidean() && m.dim() == 1 ? 2.0 * g(0.0) : 0.0;
    const double v = g(r);
    return v == 0.0 ? 0.0 : v * radial_density(m, r);  // no 0 * inf far out on H3
  };
  return integrate_to_infinity(f, 0.0, scale, quad);
}

inline double integrate_radial(const ManifoldModel& m, const RadialFunction& g,
                               const QuadratureSpec& quad, double scale = 1.0) {
  const QuadResult r = integrate_radial_result(m, g, quad, scale);
  if (!r.converged) throw AccuracyError("radial integral did not converge", r.value, r.error);
  return r.value;
}

/// Same integral with g supplied as log g, combined with the log density
/// before exponentiating (for kernels that underflow where the measure explodes).
inline double integrate_radial_log(const ManifoldModel& m, const RadialFunction& log_g,
                                   const QuadratureSpec& quad, double scale = 1.0) {
  quad.validate();
  auto f = [&](double r) {
    if (r <= 0.0) return (m.is_euclidean() && m.dim() == 1) ? 2.0 * std::exp(log_g(0.0)) : 0.0;
    return std::exp(log_g(r) + log_radial_density(m, r));
  };
  require(scale > 0.0, "radial scale must be positive");
  // head in r, tail in log r: on H^3 the mass density can decay like a small
  // power of r, and log g + log density cancels to noise for r beyond ~1e12
  QuadratureSpec q = quad;
  q.abs_floor = 0.0;
  const QuadResult head = integrate_adaptive(f, 0.0, scale, q);
  const QuadResult tail = integrate_log_tail(f, std::log(scale), q);
  const double value = head.value + tail.value;
  const double error = head.error + tail.error;
  if (!head.converged || !tail.converged) throw AccuracyError("radial integral did not converge", value, error);
  return value;
}

/// Busemann function of the boundary direction b evaluated at y:
/// log((1 - |y|^2) / |y - b|^2). Equals s on the ray toward b at distance s.
inline double busemann(const Point& y, const Point& b) {
  require(std::abs(b.norm() - 1.0) <= 1e-12, "busemann: direction must be a unit vector");
  require(y.norm2() < 1.0, "busemann: point must lie in the unit ball");
  return std::log((1.0 - y.norm2()) / distance2_euclid(y, b));
}

}  // namespace subfrac
