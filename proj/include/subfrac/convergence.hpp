#pragma once

// Initial data, the integral operators K_t f(x) = int psi_t(x, y) f(y) dmu(y),
// distances between K_t f and M psi_t(., x0), class checks and the
// prescribed-rate construction.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "subfrac/errors.hpp"
#include "subfrac/fitting.hpp"
#include "subfrac/kernels.hpp"
#include "subfrac/manifolds.hpp"
#include "subfrac/quadrature.hpp"

namespace subfrac {

enum class BumpProfile { indicator, cosine_taper };

struct Bump {
  double radius = 1.0;
  double height = 1.0;
  Point center{};
  BumpProfile profile = BumpProfile::indicator;

  /// Value at distance rho from the center.
  double operator()(double rho) const {
    if (rho >= radius) return 0.0;
    if (profile == BumpProfile::indicator) return height;
    return height * 0.5 * (1.0 + std::cos(M_PI * rho / radius));
  }
};

struct WeightedPoint {
  double weight;
  Point location;
};

/// Finite point masses plus an optional radial bump.
class InitialDatum {
 public:
  InitialDatum(const ManifoldModel& m, std::vector<WeightedPoint> masses, std::optional<Bump> bump = std::nullopt)
      : model_(m), masses_(std::move(masses)), bump_(bump) {
    require(!masses_.empty() || bump_.has_value(), "initial datum needs a point mass or a bump");
    for (const auto& wp : masses_) {
      validate_point(m, wp.location);
      require(std::isfinite(wp.weight), "point-mass weights must be finite");
    }
    mass_ = 0.0;
    for (const auto& wp : masses_) mass_ += wp.weight;
    if (bump_) {
      require(bump_->radius > 0.0, "bump radius must be positive");
      validate_point(m, bump_->center);
      bump_mass_ = bump_integral(*bump_);
      mass_ += bump_mass_;
    }
  }

  static InitialDatum dirac(const ManifoldModel& m, const Point& p, double weight = 1.0) {
    return InitialDatum(m, {{weight, p}});
  }

  /// Radial bump rescaled to the requested mass.
  static InitialDatum bump_with_mass(const ManifoldModel& m, Bump b, double mass) {
    b.height = 1.0;
    b.height = mass / InitialDatum(m, {}, b).mass();
    return InitialDatum(m, {}, b);
  }

  const ManifoldModel& model() const { return model_; }
  const std::vector<WeightedPoint>& masses() const { return masses_; }
  const std::optional<Bump>& bump() const { return bump_; }
  double mass() const { return mass_; }
  double bump_mass() const { return bump_mass_; }

  /// Largest distance from p to the support.
  double support_radius(const Point& p) const {
    double r = 0.0;
    for (const auto& wp : masses_) r = std::max(r, distance(model_, p, wp.location));
    if (bump_) r = std::max(r, distance(model_, p, bump_->center) + bump_->radius);
    return r;
  }

 private:
  double bump_integral(const Bump& b) const {
    QuadratureSpec q;
    q.rel_tol = 1e-13;
    q.abs_floor = 0.0;
    auto f = [&](double rho) { return rho <= 0.0 ? (model_.dim() == 1 && model_.is_euclidean() ? 2.0 * b(0.0) : 0.0)
                                                  : b(rho) * radial_density(model_, rho); };
    return integrate(f, 0.0, b.radius, q);
  }

  ManifoldModel model_;
  std::vector<WeightedPoint> masses_;
  std::optional<Bump> bump_;
  double mass_ = 0.0;
  double bump_mass_ = 0.0;
};

namespace detail {

/// Distance between points at distances r and s from a common center whose
/// directions have angle cosine c (c = +-1 on the line).
inline double polar_distance(const ManifoldModel& m, double r, double s, double c) {
  c = std::clamp(c, -1.0, 1.0);
  if (m.is_hyperbolic()) return h3_distance_polar(r, s, c);
  const double diff = r - s;
  return std::sqrt(std::max(0.0, diff * diff + 2.0 * r * s * (1.0 - c)));
}

/// Composite 32-point Gauss-Legendre over the sorted cuts, subdivided
/// until two successive levels agree.
template <class F>
double stable_gauss(F&& f, std::vector<double> cuts, double rel_tol, double abs_tol = 1e-300) {
  static const std::vector<GaussNode> rule = gauss_legendre(32);
  std::sort(cuts.begin(), cuts.end());
  double prev = 0.0;
  for (int level = 0; level < 7; ++level) {
    const int sub = 1 << level;
    double sum = 0.0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double h = (cuts[i + 1] - cuts[i]) / sub;
      for (int j = 0; j < sub; ++j) sum += gauss_legendre_integral(f, cuts[i] + j * h, cuts[i] + (j + 1) * h, rule);
    }
    if (level > 0 && std::abs(sum - prev) <= rel_tol * std::abs(sum) + abs_tol) return sum;
    prev = sum;
  }
  return prev;
}

/// Average of f over the unit sphere of the model's tangent space, written as
/// a function of the cosine c to a fixed axis. Piecewise Gauss-Legendre on the
/// intervals cut by `breaks`, doubled until the value is stable.
template <class F>
double sphere_average(const ManifoldModel& m, F&& f, std::span<const double> breaks = {}, double rel_tol = 1e-9,
                      double abs_tol = 1e-300) {
  if (m.is_euclidean() && m.dim() == 1) return 0.5 * (f(1.0) + f(-1.0));
  const bool planar = m.is_euclidean() && m.dim() == 2;
  // planar: (1/pi) int_0^pi f(cos th) dth; spatial: (1/2) int_{-1}^{1} f(c) dc
  std::vector<double> cuts;
  if (planar) {
    cuts = {0.0, M_PI};
    for (double c : breaks) {
      if (c > -1.0 && c < 1.0) cuts.push_back(std::acos(c));
    }
  } else {
    cuts = {-1.0, 1.0};
    for (double c : breaks) {
      if (c > -1.0 && c < 1.0) cuts.push_back(c);
    }
  }
  auto g = [&](double v) { return planar ? f(std::cos(v)) : f(v); };
  const double norm = planar ? 1.0 / M_PI : 0.5;
  return norm * stable_gauss(g, std::move(cuts), rel_tol, abs_tol / norm);
}

/// d(x, y) - r for |x| = r, |y| = s, angle cosine c, formed without cancellation.
inline double polar_offset(const ManifoldModel& m, double r, double s, double c, double d) {
  if (m.is_hyperbolic()) return h3_distance_offset(r, s, c);
  // d^2 - r^2 = s^2 - 2 r s c
  const double q = s * s - 2.0 * r * s * std::clamp(c, -1.0, 1.0);
  return d + r > 0.0 ? q / (d + r) : 0.0;
}

/// Mean of psi over the sphere of radius rho about a point at distance r,
/// relative to psi(r); closed form per heat time where available.
inline SphereMean sphere_mean(const Kernel& k, double r, double rho) {
  if (auto sm = k.sphere_mean(r, rho)) return *sm;
  const ManifoldModel& m = k.family().model();
  const double rel = r > 0.0 ? sphere_average(m, [&](double c) {
      const double d = polar_distance(m, r, rho, c);
      return k.relative_difference(d, r, polar_offset(m, r, rho, c, d));
    }, {}, 1e-10, 1e-14)
                             : k.relative_difference(rho, 0.0);
  return {rel, std::log1p(rel)};
}

/// int_0^R b(rho) dens(rho) g(rho) drho, split at r when it lies inside.
template <class G>
double bump_integral(const ManifoldModel& m, const Bump& b, double r, G&& g) {
  std::vector<double> cuts{0.0, b.radius};
  if (r > 0.0 && r < b.radius) cuts.push_back(r);
  auto f = [&](double rho) { return b(rho) * radial_density(m, rho) * g(rho); };
  const double scale = std::abs(b.height) * std::exp(log_ball_volume(m, b.radius));
  return stable_gauss(f, std::move(cuts), 1e-11, 1e-15 * scale);
}

/// Point masses and a bump described relative to a base point x0 and an axis
/// through it: every mass sits at signed distance a along the axis.
struct AxialData {
  std::vector<double> weights;
  std::vector<double> offsets;
  std::optional<Bump> bump;  // centered at x0
  double bump_mass = 0.0;
  double mass = 0.0;
};

inline AxialData axial_layout(const InitialDatum& f, const Point& x0) {
  const ManifoldModel& m = f.model();
  validate_point(m, x0);
  if (m.is_hyperbolic()) require(x0.norm2() == 0.0, "on the hyperbolic model the base point must be the origin");
  AxialData out;
  out.mass = f.mass();
  out.bump_mass = f.bump_mass();
  if (f.bump()) {
    require(distance(m, f.bump()->center, x0) == 0.0, "bumps must be centered at the base point");
    out.bump = f.bump();
  }
  Point axis{};
  bool have_axis = false;
  for (const auto& wp : f.masses()) {
    Point v;
    for (int i = 0; i < 3; ++i) v.coords[static_cast<size_t>(i)] = wp.location.coords[static_cast<size_t>(i)] - x0.coords[static_cast<size_t>(i)];
    const double len = v.norm();
    double a = 0.0;
    if (len > 0.0) {
      if (!have_axis) {
        axis = v;
        have_axis = true;
      }
      const double cosang = dot(v, axis) / (len * axis.norm());
      require(std::abs(std::abs(cosang) - 1.0) <= 1e-12, "point masses must lie on one line through the base point");
      const double r = m.is_hyperbolic() ? h3_radius(wp.location) : len;
      a = cosang > 0.0 ? r : -r;
    }
    out.weights.push_back(wp.weight);
    out.offsets.push_back(a);
  }
  return out;
}

/// Evaluates the relative deviation
///   res(r, c) = (K_t f(x) - M psi_t(x, x0)) / psi_t(x, x0)
/// at the point x with d(x, x0) = r and axis cosine c, without cancellation.
class AxialResidual {
 public:
  AxialResidual(const Kernel& k, AxialData data) : k_(k), data_(std::move(data)) {}

  const AxialData& data() const { return data_; }
  const Kernel& kernel() const { return k_; }

  /// Bump part: int b(rho) dens(rho) (sphere mean of psi at rho)/psi(r) - 1 drho.
  double bump_part(double r) const {
    if (!data_.bump) return 0.0;
    return bump_integral(k_.family().model(), *data_.bump, r, [&](double rho) { return sphere_mean(k_, r, rho).rel; });
  }

  /// Cosines where res(r, .) changes sign, i.e. the kinks of |res|. Located
  /// on a 64-cell angular grid, then bisected.
  std::vector<double> sign_change_cosines(double r, double bump) const {
    std::vector<double> out;
    const ManifoldModel& m = k_.family().model();
    if (r <= 0.0 || (m.is_euclidean() && m.dim() == 1) || data_.weights.empty()) return out;
    auto f = [&](double th) { return point_part(r, std::cos(th)) + bump; };
    constexpr int kCells = 64;
    double th0 = 0.0;
    double f0 = f(th0);
    for (int i = 1; i <= kCells; ++i) {
      const double th1 = M_PI * i / kCells;
      const double f1 = f(th1);
      if ((f0 < 0.0) != (f1 < 0.0) && f0 != 0.0 && f1 != 0.0) {
        double lo = th0;
        double hi = th1;
        double flo = f0;
        for (int it = 0; it < 40; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = f(mid);
          if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        out.push_back(std::cos(0.5 * (lo + hi)));
      }
      th0 = th1;
      f0 = f1;
    }
    return out;
  }

  double point_part(double r, double c) const {
    const ManifoldModel& m = k_.family().model();
    double sum = 0.0;
    for (size_t i = 0; i < data_.weights.size(); ++i) {
      const double a = data_.offsets[i];
      const double ca = a >= 0.0 ? c : -c;
      const double d = polar_distance(m, r, std::abs(a), ca);
      sum += data_.weights[i] * k_.relative_difference(d, r, polar_offset(m, r, std::abs(a), ca, d));
    }
    return sum;
  }

 private:
  Kernel k_;
  AxialData data_;
};

/// int_0^inf w(r) dr for a radial weight w living at scale `scale`, with
/// breakpoints; the tail beyond the last break is summed by doubling panels.
template <class F>
double radial_integral(F&& w, std::vector<double> breaks, double scale, const QuadratureSpec& quad) {
  std::sort(breaks.begin(), breaks.end());
  const double r1 = std::max(breaks.empty() ? 0.0 : 2.0 * breaks.back(), 0.0) + scale;
  QuadratureSpec q = quad;
  q.abs_floor = 0.0;
  const QuadResult head = integrate_adaptive(w, 0.0, r1, q, breaks);
  QuadratureSpec qt = q;
  qt.abs_floor = std::max(quad.abs_floor, 0.1 * quad.rel_tol * std::abs(head.value));
  const QuadResult tail = integrate_to_infinity(w, r1, std::max(r1, scale), qt);
  const double total = head.value + tail.value;
  const double err = head.error + tail.error;
  if (!(head.converged && tail.converged) && err > 10.0 * quad.rel_tol * std::abs(total)) {
    throw AccuracyError("radial integral did not converge", total, err);
  }
  return total;
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// K_t f(x) for a kernel evaluator.
inline double apply_operator(const Kernel& k, const InitialDatum& f, const Point& x) {
  const ManifoldModel& m = k.family().model();
  require(m == f.model(), "kernel family and initial datum live on different models");
  validate_point(m, x);
  double sum = 0.0;
  for (const auto& wp : f.masses()) sum += wp.weight * k(x, wp.location);
  if (f.bump()) {
    const Bump& b = *f.bump();
    const double a = distance(m, x, b.center);
    const double lpsi = k.log_value(a);
    sum += detail::bump_integral(m, b, a, [&](double rho) { return std::exp(lpsi + detail::sphere_mean(k, a, rho).log_ratio); });
  }
  return sum;
}

inline double apply_operator(const KernelFamily& fam, double t, const InitialDatum& f, const Point& x) {
  return apply_operator(Kernel(fam, t), f, x);
}

/// (int |K_t f - M psi_t(., x0)|^p dmu)^(1/p) for data on an axis through x0
/// (and bumps centered at x0). p = 1 gives the L1 distance.
inline double lp_distance(const Kernel& k, const InitialDatum& f, const Point& x0, double p,
                          const QuadratureSpec& quad = {}) {
  require(p >= 1.0, "p must be at least 1");
  const ManifoldModel& m = k.family().model();
  require(m == f.model(), "kernel family and initial datum live on different models");
  detail::AxialResidual res(k, detail::axial_layout(f, x0));
  if (res.data().bump == std::nullopt && res.data().weights.size() == 1 && res.data().offsets[0] == 0.0) {
    return 0.0;  // a single mass at the base point
  }
  auto w = [&](double r) {
    if (r <= 0.0 && !(m.is_euclidean() && m.dim() == 1)) return 0.0;
    const double lw = p == 1.0 ? k.log_value_with_density(r) : p * k.log_value(r) + k.log_value_with_density(r) - k.log_value(r);
    const double bump = res.bump_part(r);
    auto g = [&](double c) { return std::pow(std::abs(res.point_part(r, c) + bump), p); };
    const std::vector<double> kinks = res.sign_change_cosines(r, bump);
    const double avg = detail::sphere_average(m, g, kinks);
    return avg == 0.0 ? 0.0 : std::exp(lw) * avg;
  };
  std::vector<double> breaks;
  for (double a : res.data().offsets) {
    if (a != 0.0) {
      breaks.push_back(0.5 * std::abs(a));
      breaks.push_back(std::abs(a));
    }
  }
  if (res.data().bump) breaks.push_back(res.data().bump->radius);
  // kernel differences carry ~1e-13 relative noise; 1e-7 is the useful floor
  QuadratureSpec q = quad.with_rel_tol(std::max(quad.rel_tol, 1e-7));
  const double integral = detail::radial_integral(w, breaks, k.scale(), q);
  return std::pow(integral, 1.0 / p);
}

inline double l1_distance(const Kernel& k, const InitialDatum& f, const Point& x0, const QuadratureSpec& quad = {}) {
  return lp_distance(k, f, x0, 1.0, quad);
}

inline double l1_distance(const KernelFamily& fam, double t, const InitialDatum& f, const Point& x0,
                          const QuadratureSpec& quad = {}) {
  return l1_distance(Kernel(fam, t, quad), f, x0, quad);
}

/// int K_t f dmu, using the same axial machinery (mass-conservation check).
inline double solution_mass(const Kernel& k, const InitialDatum& f, const Point& x0, const QuadratureSpec& quad = {}) {
  const ManifoldModel& m = k.family().model();
  detail::AxialResidual res(k, detail::axial_layout(f, x0));
  const double mass = res.data().mass;
  auto w = [&](double r) {
    if (r <= 0.0 && !(m.is_euclidean() && m.dim() == 1)) return 0.0;
    const double bump = res.bump_part(r);
    auto g = [&](double c) { return res.point_part(r, c) + bump + mass; };
    return std::exp(k.log_value_with_density(r)) * detail::sphere_average(m, g);
  };
  std::vector<double> breaks;
  for (double a : res.data().offsets) {
    if (a != 0.0) breaks.push_back(std::abs(a));
  }
  if (res.data().bump) breaks.push_back(res.data().bump->radius);
  return detail::radial_integral(w, breaks, k.scale(), quad.with_rel_tol(std::max(quad.rel_tol, 1e-9)));
}

/// Points on the axis through x0 (toward the first off-center mass, or the
/// first coordinate direction) covering |z| <= radius_scales * t^(1/gamma)
/// plus the data's support radius, spaced `resolution` * t^(1/gamma) apart.
inline std::vector<Point> axis_grid(const Kernel& k, const InitialDatum& f, const Point& x0, double radius_scales = 10.0,
                                    double resolution = 0.01) {
  const ManifoldModel& m = k.family().model();
  require(m.is_euclidean(), "axis grids are defined on Euclidean models");
  require(resolution > 0.0 && radius_scales > 0.0, "grid parameters must be positive");
  Point axis(1.0);
  for (const auto& wp : f.masses()) {
    Point v;
    for (size_t i = 0; i < 3; ++i) v.coords[i] = wp.location.coords[i] - x0.coords[i];
    if (v.norm() > 0.0) {
      const double len = v.norm();
      for (size_t i = 0; i < 3; ++i) axis.coords[i] = v.coords[i] / len;
      break;
    }
  }
  const double scale = k.scale();
  const double reach = radius_scales * scale + f.support_radius(x0);
  const double step = resolution * scale;
  const auto half = static_cast<long>(std::ceil(reach / step));
  require(half < 5000000, "grid too fine for its radius");
  std::vector<Point> grid;
  grid.reserve(static_cast<size_t>(2 * half + 1));
  for (long i = -half; i <= half; ++i) {
    const double z = static_cast<double>(i) * step;
    Point p = x0;
    for (size_t j = 0; j < 3; ++j) p.coords[j] += z * axis.coords[j];
    grid.push_back(p);
  }
  return grid;
}

/// max over the grid of |K_t f(x) - M psi_t(x, x0)| V(x, t^(1/gamma)).
inline double weighted_sup_distance(const Kernel& k, const InitialDatum& f, const Point& x0,
                                    std::span<const Point> grid) {
  const ManifoldModel& m = k.family().model();
  require(m == f.model(), "kernel family and initial datum live on different models");
  require(!grid.empty(), "grid must not be empty");
  const double log_v = log_ball_volume(m, k.scale());
  double best = 0.0;
  for (const Point& x : grid) {
    validate_point(m, x);
    const double d0 = distance(m, x, x0);
    const double lpsi = k.log_value(d0);
    double rel = 0.0;
    for (const auto& wp : f.masses()) rel += wp.weight * k.relative_difference(distance(m, x, wp.location), d0);
    if (f.bump()) rel += apply_operator(k, InitialDatum(m, {}, f.bump()), x) * std::exp(-lpsi) - f.bump_mass();
    best = std::max(best, std::abs(rel) * std::exp(lpsi + log_v));
  }
  return best;
}

inline double weighted_sup_distance(const KernelFamily& fam, double t, const InitialDatum& f, const Point& x0,
                                    std::span<const Point> grid) {
  return weighted_sup_distance(Kernel(fam, t), f, x0, grid);
}

// ---------------------------------------------------------------------------
// Class P_gamma check

struct PClassGrid {
  std::vector<double> times{10.0, 100.0, 1000.0};
  /// Points x at |x - x0| = z t^(1/gamma) for z on a log grid in [z_min, z_max], both signs, plus x0.
  double z_min = 1e-3;
  double z_max = 3.0;
  int points_per_decade = 12;
  double xi = 1.0;
  double p4_tolerance = 0.2;
};

struct AxiomResult {
  std::string name;
  bool pass = false;
  double constant = 0.0;
  std::string detail;
};

struct PClassReport {
  std::string family;
  double gamma = 0.0;
  double theta_gamma = 0.0;
  std::vector<AxiomResult> axioms;
  double p4_slope = 0.0;
  double p4_stderr = 0.0;
  bool all_pass() const {
    return std::all_of(axioms.begin(), axioms.end(), [](const AxiomResult& a) { return a.pass; });
  }
};

inline PClassReport check_p_class(const KernelFamily& fam, const PClassGrid& spec = {}) {
  const ManifoldModel& m = fam.model();
  require(m.has_li_yau(), "class checks need a Euclidean model");
  require(spec.times.size() >= 2, "class checks need at least two times");
  PClassReport rep;
  rep.family = fam.name();
  rep.gamma = fam.gamma();
  rep.theta_gamma = fam.theta_gamma();

  std::vector<double> zs{0.0};
  const int decades = static_cast<int>(std::ceil(std::log10(spec.z_max / spec.z_min) * spec.points_per_decade));
  for (int i = 0; i <= decades; ++i) {
    const double z = spec.z_min * std::pow(spec.z_max / spec.z_min, static_cast<double>(i) / decades);
    zs.push_back(z);
    zs.push_back(-z);
  }

  bool p1 = true;
  double p2_mass_err = 0.0;
  std::vector<double> sup_ratio;
  bool p2_sup_at_center = true;
  std::vector<double> p3_const;
  std::vector<double> p4_dev;
  const Point x0(0.0);

  for (double t : spec.times) {
    const Kernel k(fam, t);
    const double s = k.scale();
    // (P1) positivity and symmetry
    for (double z : zs) {
      const Point x(z * s);
      const Point y(0.37 * s);
      const double a = k(x, y);
      const double b = k(y, x);
      if (!(a > 0.0) || a != b) p1 = false;
    }
    // (P2) unit mass and sup of order V(t^(1/gamma))^-1
    QuadratureSpec q;
    q.rel_tol = 1e-10;
    const double mass = integrate_radial_log(m, [&](double r) { return k.log_value(r); }, q, s);
    p2_mass_err = std::max(p2_mass_err, std::abs(mass - 1.0));
    const double center = k(0.0);
    for (double z : zs) {
      if (k(std::abs(z) * s) > center) p2_sup_at_center = false;
    }
    sup_ratio.push_back(center * ball_volume(m, x0, s));
    // (P3) quotient bounds with d(x0, y) = t^(1/gamma)
    const Point y(s);
    double qmax = 0.0;
    double qmin = INFINITY;
    for (double z : zs) {
      const Point x(z * s);
      const double ratio = std::exp(k.log_value(distance(m, x, y)) - k.log_value(distance(m, x, x0)));
      qmax = std::max(qmax, ratio);
      qmin = std::min(qmin, ratio);
    }
    p3_const.push_back(std::max(qmax, 1.0 / qmin));
    // (P4) deviation with d(x0, y) = xi
    const Point yx(spec.xi);
    double dev = 0.0;
    for (double z : zs) {
      const Point x(z * s);
      dev = std::max(dev, std::abs(k.relative_difference(distance(m, x, yx), distance(m, x, x0))));
    }
    p4_dev.push_back(dev);
  }

  rep.axioms.push_back({"P1", p1, 0.0, p1 ? "positive and symmetric on the grid" : "nonpositive or asymmetric value"});

  const ConstantFit sup_fit = fit_constants(sup_ratio);
  const bool p2 = p2_mass_err <= 1e-6 && p2_sup_at_center && sup_fit.spread() <= 2.0;
  rep.axioms.push_back({"P2", p2, sup_fit.upper,
                        "max |mass - 1| = " + std::to_string(p2_mass_err) +
                            ", sup * V spread = " + std::to_string(sup_fit.spread())});

  const double c_first = p3_const.front();
  const double c_max = *std::max_element(p3_const.begin(), p3_const.end());
  const bool p3 = std::isfinite(c_max) && c_max <= 1.05 * c_first + 1e-12;
  rep.axioms.push_back({"P3", p3, c_max, "quotient constant per time, first " + std::to_string(c_first) +
                                              ", max " + std::to_string(c_max)});

  const RateFit fit = fit_loglog(spec.times, p4_dev, 2);
  rep.p4_slope = fit.slope;
  rep.p4_stderr = fit.stderr_slope;
  double c4 = 0.0;
  for (size_t i = 0; i < spec.times.size(); ++i) {
    c4 = std::max(c4, p4_dev[i] * std::pow(spec.times[i], rep.theta_gamma));
  }
  const bool p4 = std::abs(fit.slope + rep.theta_gamma) <= spec.p4_tolerance;
  rep.axioms.push_back({"P4", p4, c4, "fitted exponent " + std::to_string(fit.slope) + " vs -" +
                                          std::to_string(rep.theta_gamma)});
  return rep;
}

// ---------------------------------------------------------------------------
// Prescribed rate construction

using RateFunction = std::function<double(double)>;

struct PrescribedRateStep {
  int k = 0;
  double log_t = 0.0;
  double weight = 0.0;  // m_k
  double log_r = 0.0;   // log d(x0, x_k)
  double lhs = 0.0;     // |w(t_k, x0) - P_{t_k}(x0, x0)| V(x0, t_k^(1/alpha))
  double rhs = 0.0;     // c1 k phi(t_k)
  bool verified = false;
};

struct PrescribedRateResult {
  double epsilon = 0.5;
  double weight_at_base = 0.0;
  double c_volume = 1.0;  // C
  double c2 = 1.0;        // C_2
  double c1 = 1.0;        // c_1
  std::vector<PrescribedRateStep> steps;
  bool all_verified() const {
    return !steps.empty() &&
           std::all_of(steps.begin(), steps.end(), [](const PrescribedRateStep& s) { return s.verified; });
  }
};

/// Raised when phi decays too slowly for t_k to stay below the overflow guard.
class ConstructionInfeasible : public DomainError {
 public:
  ConstructionInfeasible(int k, const std::string& what) : DomainError(what), k_(k) {}
  int failing_k() const { return k_; }

 private:
  int k_;
};

inline PrescribedRateResult prescribed_rate_construct(const RateFunction& phi, int k_max, const KernelFamily& fam,
                                                      const Point& x0) {
  require(fam.id() == FamilyId::frac_heat && fam.model().is_euclidean(),
          "the prescribed-rate construction uses the frac-heat family on a Euclidean model");
  require(k_max >= 1 && k_max <= 8, "k_max must lie in 1..8");
  validate_point(fam.model(), x0);
  const ManifoldModel& m = fam.model();
  const double alpha = fam.param();
  const double nu_prime = m.doubling_lower();
  constexpr double kLogGuard = 690.0;  // t below ~1e300

  PrescribedRateResult out;
  // fitted constants, from the t = 1 profile (the kernel is self-similar)
  const Kernel k1(fam, 1.0);
  std::vector<double> vol_ratio;
  std::vector<double> env_ratio;
  for (int i = -30; i <= 60; ++i) {
    const double z = std::pow(10.0, i / 10.0);
    const double vq = std::exp(log_ball_volume(m, 1.0) - log_ball_volume(m, 1.0 + z));
    vol_ratio.push_back(vq * std::pow(1.0 + z, nu_prime));
    const double env = vq * std::pow(1.0 + z, -alpha);
    env_ratio.push_back(std::exp(k1.log_value(z) - k1.log_value(0.0)) / env);
  }
  out.c_volume = std::max(1.0, fit_constants(vol_ratio).upper);
  const ConstantFit ef = fit_constants(env_ratio);
  out.c2 = std::max({1.0, ef.upper, 1.0 / ef.lower});
  out.c1 = std::exp(k1.log_value(0.0) + log_ball_volume(m, 1.0));

  // choose t_k and r_k
  std::vector<double> m_k;
  std::vector<double> log_t;
  std::vector<double> log_r;
  double sum_m = 0.0;
  const double stretch = std::pow(2.0 * out.c_volume * out.c2, 1.0 / (nu_prime + alpha)) - 1.0;
  for (int k = 1; k <= k_max; ++k) {
    const double mk = out.epsilon * std::ldexp(1.0, -k);
    const double target = mk / (2.0 * k);
    double lt = std::log(2.0);
    if (k > 1) {
      // much larger than t_{k-1}, and x_{k-1} deep inside the new scale
      lt = std::max(log_t.back() + std::log(1e3), alpha * (log_r.back() + std::log(1e4)));
    }
    auto ok = [&](double l) { return phi(std::exp(l)) <= target; };
    if (!ok(lt)) {
      double lo = lt;
      double hi = lt;
      double step = 1.0;
      while (!ok(hi)) {
        lo = hi;
        hi += step;
        step *= 2.0;
        if (hi > kLogGuard) {
          if (!ok(kLogGuard)) {
            throw ConstructionInfeasible(k, "construction infeasible at k = " + std::to_string(k) +
                                                ": phi(t) > m_k/(2k) for all t below the overflow guard");
          }
          hi = kLogGuard;
        }
      }
      for (int i = 0; i < 100 && hi - lo > 1e-9 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? hi : lo) = mid;
      }
      lt = hi;
    }
    m_k.push_back(mk);
    log_t.push_back(lt);
    // (1 + r/s)^-(nu' + alpha) < 1/(2 C C2): take r 10% past the threshold
    log_r.push_back(lt / alpha + std::log(1.1 * stretch + 0.1));
    sum_m += mk;
  }
  out.weight_at_base = 1.0 - sum_m;

  for (int k = 1; k <= k_max; ++k) {
    const size_t i = static_cast<size_t>(k - 1);
    const Kernel kt = Kernel::from_log_time(fam, log_t[i]);
    const double l0 = kt.log_value(0.0);
    double dev = 0.0;
    for (size_t j = 0; j < m_k.size(); ++j) dev += m_k[j] * kt.relative_difference(std::exp(log_r[j]), 0.0);
    PrescribedRateStep step;
    step.k = k;
    step.log_t = log_t[i];
    step.weight = m_k[i];
    step.log_r = log_r[i];
    step.lhs = std::abs(dev) * std::exp(l0 + log_ball_volume(m, kt.scale()));
    step.rhs = out.c1 * k * phi(std::exp(log_t[i]));
    step.verified = step.lhs >= step.rhs;
    out.steps.push_back(step);
  }
  return out;
}

}  // namespace subfrac
