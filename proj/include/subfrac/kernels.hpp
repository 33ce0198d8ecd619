#pragma once

// Kernel families subordinated to the heat semigroup: the extension kernel
// Q_t^sigma and the fractional-heat kernel P_t^alpha, evaluated by quadrature
// of their subordination integrals, plus the heat kernel itself and the
// closed-form Poisson kernel of hyperbolic 3-space.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "subfrac/errors.hpp"
#include "subfrac/fitting.hpp"
#include "subfrac/manifolds.hpp"
#include "subfrac/quadrature.hpp"
#include "subfrac/special_functions.hpp"
#include "subfrac/stable.hpp"

namespace subfrac {

enum class FamilyId { heat, extension, frac_heat, hyp_poisson };

class KernelFamily {
 public:
  static KernelFamily heat(const ManifoldModel& m) { return {FamilyId::heat, 0.0, m}; }

  static KernelFamily extension(double sigma, const ManifoldModel& m) {
    require(sigma > 0.0 && sigma < 1.0, "sigma must lie in (0,1)");
    return {FamilyId::extension, sigma, m};
  }

  static KernelFamily frac_heat(double alpha, const ManifoldModel& m) {
    require(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0,2)");
    return {FamilyId::frac_heat, alpha, m};
  }

  static KernelFamily hyp_poisson(const ManifoldModel& m = ManifoldModel::hyperbolic_ball3()) {
    require(m.is_hyperbolic(), "the hyperbolic Poisson family requires the hyperbolic model");
    return {FamilyId::hyp_poisson, 0.0, m};
  }

  FamilyId id() const { return id_; }
  double param() const { return param_; }
  const ManifoldModel& model() const { return model_; }

  /// Class exponent: kernels live at spatial scale t^(1/gamma).
  double gamma() const {
    switch (id_) {
      case FamilyId::heat:
        return 2.0;
      case FamilyId::frac_heat:
        return param_;
      default:
        return 1.0;
    }
  }

  double theta_gamma() const { return model_.hoelder_theta() / gamma(); }

  /// Power of the algebraic tail psi_1(z) ~ z^(-tail_power); heat has none.
  double tail_power() const {
    switch (id_) {
      case FamilyId::extension:
        return model_.dim() + 2.0 * param_;
      case FamilyId::frac_heat:
        return model_.dim() + param_;
      default:
        return std::numeric_limits<double>::infinity();
    }
  }

  std::string name() const {
    switch (id_) {
      case FamilyId::heat:
        return "heat";
      case FamilyId::extension:
        return "extension";
      case FamilyId::frac_heat:
        return "frac-heat";
      default:
        return "hyp-poisson";
    }
  }

  bool operator==(const KernelFamily&) const = default;

 private:
  KernelFamily(FamilyId id, double param, const ManifoldModel& m) : id_(id), param_(param), model_(m) {}

  FamilyId id_;
  double param_;
  ManifoldModel model_;
};

// ---------------------------------------------------------------------------
// Hyperbolic Poisson kernel

/// log p_t(r) for p_t(r) = (r/sinh r) t K_2(R) / (2 pi^2 R^2), R = sqrt(t^2 + r^2).
inline double log_poisson_kernel_h3_closed(double t, double r) {
  require(t > 0.0 && std::isfinite(t), "t must be positive");
  require(r >= 0.0, "distance must be nonnegative");
  const double big_r = std::hypot(t, r);
  return log_r_over_sinh(r) + std::log(t) + log_bessel_k(2.0, big_r) - std::log(2.0 * M_PI * M_PI) -
         2.0 * std::log(big_r);
}

inline double poisson_kernel_h3_closed(double t, double r) {
  return std::exp(log_poisson_kernel_h3_closed(t, r));
}

/// log(p_t(r) * 4 pi sinh^2 r), with r - sqrt(t^2 + r^2) = -t^2 / (r + R) so it
/// stays accurate for r far beyond t^2.
inline double log_poisson_mass_density_h3(double t, double r) {
  require(t > 0.0 && std::isfinite(t), "t must be positive");
  require(r > 0.0 && std::isfinite(r), "radius must be positive");
  const double big_r = std::hypot(t, r);
  return std::log(2.0 / M_PI) + std::log(r) + std::log(t) + std::log(bessel_k_scaled(2.0, big_r)) -
         2.0 * std::log(big_r) - M_LN2 + std::log(-std::expm1(-2.0 * r)) - t * t / (r + big_r);
}

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// QUADPACK qk15 abscissae and weights; Gauss nodes are xgk[1], xgk[3], xgk[5], 0.
inline constexpr std::array<double, 8> kXgk15 = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kWgk15 = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg7 = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// Log of the stable density with a cheap cut for the far left tail, where
/// the (sharp-exponent) envelope already puts it below any relevant scale.
inline double log_eta_or_zero(double alpha, double t, double u) {
  const StableParams p{alpha, t, u};
  if (u < std::pow(t, 2.0 / alpha) && log_eta_envelope(p) < -900.0) return kNegInf;
  return log_stable_density(p);
}

/// Mean of exp(-d^2/(4u)) over the sphere of radius rho about a point at
/// distance r, divided by exp(-r^2/(4u)), in log form. With z = r rho/(2u)
/// the mean of e^{z c} is cosh z (n = 1), I_0(z) (n = 2), sinh z / z (n = 3).
inline double log_sphere_gauss(int n, double rho2_inv4u, double z) {
  double lz = 0.0;
  if (z < 1e-3) {
    const double z2 = z * z;
    static constexpr double c2[] = {0.0, 1.0 / 2.0, 1.0 / 4.0, 1.0 / 6.0};
    static constexpr double c4[] = {0.0, 1.0 / 12.0, 1.0 / 64.0, 1.0 / 180.0};
    return z2 * (c2[n] - c4[n] * z2) - rho2_inv4u;
  }
  switch (n) {
    case 1:
      lz = z + std::log1p(std::exp(-2.0 * z)) - M_LN2;
      break;
    case 2:
      lz = z < 700.0 ? std::log(std::cyl_bessel_i(0.0, z))
                     : z - 0.5 * std::log(2.0 * M_PI * z) + std::log1p(1.0 / (8.0 * z) + 9.0 / (128.0 * z * z));
      break;
    default:
      lz = log_sinh(z) - std::log(z);
  }
  return lz - rho2_inv4u;
}

/// Sphere mean of a kernel relative to its value at the center.
struct SphereMean {
  double rel;        // mean / psi(r) - 1
  double log_ratio;  // log(mean / psi(r))
};

/// A fixed composite Gauss-Kronrod rule for the Euclidean subordination
/// integral psi(d) = int h_u(d) dnu(u), stored per heat time u as
/// base = log(weight * mixing density) - (n/2) log(4 pi u).
class SubordinationRule {
 public:
  struct Node {
    double log_u;
    double inv4u;
    double base_k;
    double base_g;
  };

  /// Extension kernel: with v = t^2/(4u) the mixing law is Gamma(sigma) in v.
  /// Panels are uniform in w = log v.
  static SubordinationRule extension(double sigma, double t, int n, double d_max, double width) {
    const double a = sigma + 0.5 * n;
    const double log_t = std::log(t);
    const double w_hi = std::log(4.0 * a + 80.0);
    const double w_peak = std::log(a) + 2.0 * (log_t - std::log(std::max(d_max, t)));
    const double w_lo = std::min(std::log(a), w_peak) - 50.0 / a;
    const double lg = std::lgamma(sigma);
    SubordinationRule rule(n);
    rule.add_panels(w_lo, w_hi, width, [&](double w, double lwk, double lwg) {
      const double mix = sigma * w - std::exp(w) - lg;
      rule.push(2.0 * log_t - std::log(4.0) - w, lwk + mix, lwg + mix);
    });
    rule.finish();
    return rule;
  }

  /// Fractional-heat kernel: panels uniform in L = log u against eta_t^alpha(u) u.
  static SubordinationRule frac_heat(double alpha, double t, int n, double d_max, double width) {
    const double log_t = std::log(t);
    const double l_mode = 2.0 / alpha * log_t;
    const double kappa = alpha / (2.0 - alpha);
    auto profile = [&](double l) { return log_eta_or_zero(alpha, t, std::exp(l)) + (1.0 - 0.5 * n) * l; };

    // left end: walk down until the d = 0 integrand is negligible
    double ref = profile(l_mode);
    double l_lo = l_mode;
    for (int k = 1; k < 2000; ++k) {
      const double l = l_mode - 0.5 * k;
      const double v = profile(l);
      ref = std::max(ref, v);
      l_lo = l;
      if (v < ref - 55.0 && k > 4) break;
    }
    const double slope = 0.5 * (alpha + n);
    const double l_hi = std::max(l_mode, 2.0 * std::log(std::max(d_max, 1e-300))) + 4.0 + 50.0 / slope;

    SubordinationRule rule(n);
    auto sink = [&](double l, double lwk, double lwg) {
      const double mix = log_eta_or_zero(alpha, t, std::exp(l)) + l;
      rule.push(l, lwk + mix, lwg + mix);
    };
    rule.add_panels(l_lo, l_mode, width / std::max(1.0, kappa), sink);
    rule.add_panels(l_mode, l_hi, width, sink);
    rule.finish();
    return rule;
  }

  /// log psi(d) and log of the Kronrod-Gauss discrepancy.
  std::pair<double, double> log_eval(double d) const {
    const double d2 = d * d;
    const auto first = live_begin(d2);
    double mk = kNegInf;
    for (auto it = first; it != nodes_.end(); ++it) mk = std::max(mk, it->base_k - d2 * it->inv4u);
    if (mk == kNegInf) return {kNegInf, kNegInf};
    double sk = 0.0;
    double sg = 0.0;
    for (auto it = first; it != nodes_.end(); ++it) {
      const double e = it->base_k - d2 * it->inv4u - mk;
      if (e < -40.0) continue;
      sk += std::exp(e);
      if (it->base_g != kNegInf) sg += std::exp(it->base_g - it->base_k + e);
    }
    const double diff = std::abs(sk - sg);
    return {mk + std::log(sk), diff > 0.0 ? mk + std::log(diff) : kNegInf};
  }

  /// psi(d1)/psi(d0) - 1 with full relative precision when d1 is close to d0:
  /// each term is differenced as expm1(-(d1^2 - d0^2)/(4u)) before summing.
  double relative_difference(double d1, double d0) const { return relative_difference(d1, d0, (d1 - d0) * (d1 + d0)); }

  /// Same, with delta = d1^2 - d0^2 supplied exactly by the caller.
  double relative_difference(double d1, double d0, double delta) const {
    const double d2 = d0 * d0;
    const auto first = live_begin(std::min(d2, d1 * d1));
    double mk = kNegInf;
    for (auto it = first; it != nodes_.end(); ++it) mk = std::max(mk, it->base_k - d2 * it->inv4u);
    if (mk == kNegInf) return std::expm1(log_eval(d1).first - log_eval(d0).first);
    double num = 0.0;
    double den = 0.0;
    double mk1 = kNegInf;
    for (auto it = first; it != nodes_.end(); ++it) mk1 = std::max(mk1, it->base_k - d1 * d1 * it->inv4u);
    // a large ratio needs no cancellation care
    if (std::abs(mk1 - mk) > 1.0) return std::expm1(log_eval(d1).first - log_eval(d0).first);
    for (auto it = first; it != nodes_.end(); ++it) {
      const double e = it->base_k - d2 * it->inv4u - mk;
      const double x = -delta * it->inv4u;
      if (std::max(e, e + x) < -40.0) continue;
      const double w = std::exp(e);
      num += e + x > -700.0 ? w * std::expm1(x) : -w;
      den += w;
    }
    return num / den;
  }

  /// Sphere mean of psi at radius rho about a point at distance r, against psi(r).
  SphereMean sphere_mean(double r, double rho) const {
    const double dmin = r - rho;
    const auto first = live_begin(dmin * dmin);
    thread_local std::vector<double> xs;
    xs.resize(nodes_.size());
    double mk = kNegInf;
    double mx = kNegInf;
    for (auto it = first; it != nodes_.end(); ++it) {
      const double e = it->base_k - r * r * it->inv4u;
      const double x = log_sphere_gauss(n_, rho * rho * it->inv4u, 2.0 * r * rho * it->inv4u);
      xs[static_cast<size_t>(it - nodes_.begin())] = x;
      mk = std::max(mk, e);
      mx = std::max(mx, e + x);
    }
    if (mk == kNegInf || std::abs(mx - mk) > 1.0) {
      // no cancellation to protect; use all nodes in log-sum form
      for (auto it = nodes_.begin(); it != first; ++it) {
        xs[static_cast<size_t>(it - nodes_.begin())] = log_sphere_gauss(n_, rho * rho * it->inv4u, 2.0 * r * rho * it->inv4u);
      }
      mk = kNegInf;
      mx = kNegInf;
      for (size_t i = 0; i < nodes_.size(); ++i) {
        const double e = nodes_[i].base_k - r * r * nodes_[i].inv4u;
        mk = std::max(mk, e);
        mx = std::max(mx, e + xs[i]);
      }
      double se = 0.0;
      double sx = 0.0;
      for (size_t i = 0; i < nodes_.size(); ++i) {
        const double e = nodes_[i].base_k - r * r * nodes_[i].inv4u;
        se += std::exp(e - mk);
        sx += std::exp(e + xs[i] - mx);
      }
      const double lr = mx + std::log(sx) - mk - std::log(se);
      return {std::expm1(lr), lr};
    }
    double num = 0.0;
    double den = 0.0;
    for (auto it = first; it != nodes_.end(); ++it) {
      const double e = it->base_k - r * r * it->inv4u - mk;
      const double x = xs[static_cast<size_t>(it - nodes_.begin())];
      if (std::max(e, e + x) < -40.0) continue;
      const double w = std::exp(e);
      num += w * std::expm1(x);
      den += w;
    }
    const double rel = num / den;
    return {rel, std::log1p(rel)};
  }

  size_t size() const { return nodes_.size(); }

 private:
  explicit SubordinationRule(int n) : n_(n) {}

  // nodes where exp(-d^2/4u) < e^-2000 cannot matter
  std::vector<Node>::const_iterator live_begin(double d2) const {
    if (!(d2 > 0.0)) return nodes_.begin();
    return std::partition_point(nodes_.begin(), nodes_.end(), [&](const Node& nd) { return d2 * nd.inv4u > 2000.0; });
  }

  template <class Sink>
  void add_panels(double lo, double hi, double width, Sink&& sink) {
    if (!(hi > lo)) return;
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / width)));
    const double h = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double c = lo + (p + 0.5) * h;
      const double half = 0.5 * h;
      for (size_t j = 0; j < 8; ++j) {
        const double lwk = std::log(half * kWgk15[j]);
        const double lwg = (j % 2 == 1 || j == 7) ? std::log(half * kWg7[j / 2]) : kNegInf;
        const double x = half * kXgk15[j];
        sink(c - x, lwk, lwg);
        if (j != 7) sink(c + x, lwk, lwg);
      }
    }
  }

  // lwk, lwg: log of (Kronrod or Gauss weight) times the mixing density
  void push(double log_u, double lwk, double lwg) {
    if (!std::isfinite(lwk)) return;
    const double heat = -0.5 * n_ * (std::log(4.0 * M_PI) + log_u);
    nodes_.push_back({log_u, 0.25 * std::exp(-log_u), lwk + heat, std::isfinite(lwg) ? lwg + heat : kNegInf});
  }

  void finish() {
    std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.log_u < b.log_u; });
  }

  int n_;
  std::vector<Node> nodes_;
};

/// Profile rules at t = 1, shared across evaluators. Building one costs a few
/// thousand stable-density evaluations, so they are memoized per family and dimension.
inline constexpr double kProfileLogCoverage = 40.0;

inline std::shared_ptr<const SubordinationRule> profile_rule(FamilyId id, double param, int n) {
  static std::mutex mu;
  static std::map<std::tuple<int, double, int>, std::shared_ptr<const SubordinationRule>> cache;
  const auto key = std::make_tuple(static_cast<int>(id), param, n);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const double d_max = std::exp(kProfileLogCoverage);
  auto build = [&](double width) {
    return id == FamilyId::extension ? SubordinationRule::extension(param, 1.0, n, d_max, width)
                                     : SubordinationRule::frac_heat(param, 1.0, n, d_max, width);
  };
  double width = 0.5;
  SubordinationRule rule = build(width);
  // self-check on a spread of distances; refine if the embedded Gauss rule disagrees
  for (int pass = 0; pass < 3; ++pass) {
    double worst = 0.0;
    for (double d : {0.0, 0.3, 1.0, 3.0, 30.0, 1e3, 1e6, 1e12}) {
      const auto [lv, le] = rule.log_eval(d);
      worst = std::max(worst, std::exp(le - lv));
    }
    if (worst < 1e-11) break;
    width *= 0.5;
    rule = build(width);
  }
  auto ptr = std::make_shared<const SubordinationRule>(std::move(rule));
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, ptr);
  return ptr;
}

/// log of the subordination integral on H^3 at distance d, by adaptive
/// quadrature in s = sqrt(u) - d/(2 sqrt(u)), which turns u + d^2/(4u) into
/// s^2 + d and keeps the peak O(1) wide at every d.
template <class LogMix>
double h3_subordinated_log(LogMix&& log_mix, double d, const QuadratureSpec& quad, double u_hint) {
  auto u_of_s = [d](double s) {
    const double big_r = std::sqrt(s * s + 2.0 * d);
    const double sq = s >= 0.0 ? 0.5 * (s + big_r) : d / (big_r - s);
    return std::pair{sq * sq, big_r};
  };
  auto g = [&](double s) {
    const auto [u, big_r] = u_of_s(s);
    if (!(u > 0.0)) return kNegInf;
    const double lm = log_mix(u);
    if (lm == kNegInf) return kNegInf;
    return lm - 1.5 * std::log(4.0 * M_PI * u) + std::log(2.0 * u / big_r) - s * s;
  };
  auto s_of_u = [d](double u) { return std::sqrt(u) - d / (2.0 * std::sqrt(u)); };

  // coarse scan in log u to locate the peak and the live range
  const double l_center = std::log(std::max({u_hint, 0.5 * d, 1e-3}));
  std::vector<double> ls;
  for (double l = std::min(-30.0, l_center - 30.0); l <= std::max(30.0, l_center + 30.0); l += 0.25) ls.push_back(l);
  std::vector<double> gs(ls.size());
  double gmax = kNegInf;
  size_t imax = 0;
  for (size_t i = 0; i < ls.size(); ++i) {
    gs[i] = g(s_of_u(std::exp(ls[i])));
    if (gs[i] > gmax) {
      gmax = gs[i];
      imax = i;
    }
  }
  require(gmax > kNegInf, "subordination integrand vanishes identically");
  // at large d one coarse step spans many widths of the O(1) peak in s: refine
  double sa = s_of_u(std::exp(ls[imax > 0 ? imax - 1 : 0]));
  double sb = s_of_u(std::exp(ls[std::min(imax + 1, ls.size() - 1)]));
  constexpr double kGolden = 0.6180339887498949;
  for (int it = 0; it < 200 && sb - sa > 1e-6 * (1.0 + std::abs(sa)); ++it) {
    const double m1 = sb - kGolden * (sb - sa);
    const double m2 = sa + kGolden * (sb - sa);
    if (g(m1) >= g(m2)) {
      sb = m2;
    } else {
      sa = m1;
    }
  }
  const double s_peak = 0.5 * (sa + sb);
  gmax = std::max(gmax, g(s_peak));
  size_t lo = imax;
  size_t hi = imax;
  while (lo > 0 && gs[lo] > gmax - 60.0) --lo;
  while (hi + 1 < ls.size() && gs[hi] > gmax - 60.0) ++hi;
  double s_lo = d == 0.0 ? std::max(0.0, s_of_u(std::exp(ls[lo]))) : s_of_u(std::exp(ls[lo]));
  double s_hi = s_of_u(std::exp(ls[hi]));
  std::vector<double> breaks;
  for (size_t i = lo; i <= hi; i += 4) breaks.push_back(s_of_u(std::exp(ls[i])));
  breaks.push_back(s_peak);
  // walk out from the peak in s with doubling steps
  for (double dir : {-1.0, 1.0}) {
    double h = 0.25;
    for (int it = 0; it < 200; ++it, h *= 2.0) {
      const double s = s_peak + dir * h;
      breaks.push_back(s);
      if (!(g(s) > gmax - 60.0)) break;
    }
    const double edge = s_peak + dir * h;
    if (dir < 0.0) {
      s_lo = std::min(s_lo, d == 0.0 ? std::max(0.0, edge) : edge);
    } else {
      s_hi = std::max(s_hi, edge);
    }
  }

  QuadratureSpec local = quad;
  local.abs_floor = 0.0;
  auto f = [&](double s) {
    const double v = g(s);
    return v == kNegInf ? 0.0 : std::exp(v - gmax);
  };
  const QuadResult r = integrate_adaptive(f, s_lo, s_hi, local, breaks);
  if (!r.converged) {
    throw AccuracyError("hyperbolic subordination integral did not converge", r.value, r.error);
  }
  return log_r_over_sinh(d) - d + gmax + std::log(r.value);
}

inline double h3_extension_log(double sigma, double t, double d, const QuadratureSpec& quad) {
  const double pref = 2.0 * sigma * std::log(t) - 2.0 * sigma * M_LN2 - std::lgamma(sigma);
  auto log_mix = [&](double u) { return pref - t * t / (4.0 * u) - (1.0 + sigma) * std::log(u); };
  return h3_subordinated_log(log_mix, d, quad, t * t);
}

inline double h3_frac_heat_log(double alpha, double t, double d, const QuadratureSpec& quad) {
  auto log_mix = [&](double u) { return log_eta_or_zero(alpha, t, u); };
  return h3_subordinated_log(log_mix, d, quad, std::pow(t, 2.0 / alpha));
}

/// Evaluate a freshly built rule at (t, d), halving the panel width until the
/// embedded error estimate meets the tolerance.
template <class Build>
double direct_rule_log(Build&& build, double d, const QuadratureSpec& quad) {
  double width = 0.5;
  double lv = 0.0;
  double le = 0.0;
  for (int pass = 0; pass < 4; ++pass) {
    const SubordinationRule rule = build(width);
    std::tie(lv, le) = rule.log_eval(d);
    if (lv > kNegInf && std::exp(le - lv) <= quad.rel_tol) return lv;
    width *= 0.5;
  }
  throw AccuracyError("subordination quadrature did not reach tolerance", std::exp(lv), std::exp(le));
}

}  // namespace detail

/// Evaluator for psi_t(x, y) of one family at one time. Immutable; the
/// expensive part (a subordination rule) is shared between copies.
///
/// On Euclidean models the subordinated kernels use the scaling law
/// psi_t(d) = t^(-n/gamma) psi_1(d t^(-1/gamma)), so any t (including ones
/// only representable through log t) costs the same.
class Kernel {
 public:
  Kernel(const KernelFamily& fam, double t, const QuadratureSpec& quad = {})
      : Kernel(fam, std::log(positive_time(t)), quad, 0) {}

  static Kernel from_log_time(const KernelFamily& fam, double log_t, const QuadratureSpec& quad = {}) {
    require(std::isfinite(log_t), "log time must be finite");
    return Kernel(fam, log_t, quad, 0);
  }

  const KernelFamily& family() const { return fam_; }
  double log_t() const { return log_t_; }
  double t() const { return std::exp(log_t_); }
  /// Spatial scale t^(1/gamma).
  double scale() const { return std::exp(log_t_ / fam_.gamma()); }
  double log_scale() const { return log_t_ / fam_.gamma(); }

  double log_value(double d) const {
    require(d >= 0.0 && std::isfinite(d), "distance must be finite and nonnegative");
    const ManifoldModel& m = fam_.model();
    switch (fam_.id()) {
      case FamilyId::heat: {
        if (m.is_euclidean()) {
          return -0.5 * m.dim() * (std::log(4.0 * M_PI) + log_t_) - 0.25 * d * d * std::exp(-log_t_);
        }
        return log_heat_kernel_radial(m, t(), d);
      }
      case FamilyId::hyp_poisson:
        return log_poisson_kernel_h3_closed(t(), d);
      default:
        break;
    }
    if (m.is_hyperbolic()) {
      return fam_.id() == FamilyId::extension ? detail::h3_extension_log(fam_.param(), t(), d, quad_)
                                               : detail::h3_frac_heat_log(fam_.param(), t(), d, quad_);
    }
    const double n = m.dim();
    const double log_z = d > 0.0 ? std::log(d) - log_scale() : detail::kNegInf;
    double lv;
    if (log_z > detail::kProfileLogCoverage) {
      // beyond the rule's coverage the profile is a pure power law
      const double lz0 = detail::kProfileLogCoverage;
      lv = rule_->log_eval(std::exp(lz0)).first - fam_.tail_power() * (log_z - lz0);
    } else {
      lv = rule_->log_eval(d > 0.0 ? std::exp(log_z) : 0.0).first;
    }
    return -n * log_scale() + lv;
  }

  double operator()(double d) const { return std::exp(log_value(d)); }

  /// log(psi_t(r) * surface measure at r); at r = 0 only the line has mass.
  double log_value_with_density(double r) const {
    const ManifoldModel& m = fam_.model();
    if (r <= 0.0) return (m.is_euclidean() && m.dim() == 1) ? log_value(0.0) + M_LN2 : detail::kNegInf;
    if (fam_.id() == FamilyId::hyp_poisson) return log_poisson_mass_density_h3(t(), r);
    return log_value(r) + log_radial_density(m, r);
  }

  /// psi_t(d1)/psi_t(d0) - 1, accurate even when the two kernel values agree
  /// to many digits (as they do at large t).
  double relative_difference(double d1, double d0) const { return relative_difference(d1, d0, d1 - d0); }

  /// Same, with diff = d1 - d0 supplied by the caller (who can often form it
  /// without cancellation).
  double relative_difference(double d1, double d0, double diff) const {
    require(d1 >= 0.0 && d0 >= 0.0, "distances must be nonnegative");
    if (diff == 0.0) return 0.0;
    const ManifoldModel& m = fam_.model();
    if (fam_.id() == FamilyId::heat && m.is_euclidean()) {
      return std::expm1(-0.25 * diff * (d1 + d0) * std::exp(-log_t_));
    }
    if (fam_.id() == FamilyId::hyp_poisson && d0 > 0.0 && d1 > 0.0) return std::expm1(poisson_h3_log_ratio(d1, d0, diff));
    if (!rule_) return std::expm1(log_value(d1) - log_value(d0));
    const double inv = std::exp(-log_scale());
    const double z1 = d1 * inv;
    const double z0 = d0 * inv;
    if (std::max(z1, z0) > std::exp(detail::kProfileLogCoverage)) return std::expm1(log_value(d1) - log_value(d0));
    return rule_->relative_difference(z1, z0, diff * inv * (z1 + z0));
  }

  /// Mean of psi_t over the sphere of radius rho about a point at distance r,
  /// relative to psi_t(r), for Euclidean heat and subordinated kernels.
  std::optional<detail::SphereMean> sphere_mean(double r, double rho) const {
    const ManifoldModel& m = fam_.model();
    if (fam_.id() == FamilyId::hyp_poisson) return poisson_h3_sphere_mean(r, rho);
    if (!m.is_euclidean()) return std::nullopt;
    if (fam_.id() == FamilyId::heat) {
      const double inv4u = 0.25 * std::exp(-log_t_);
      const double lr = detail::log_sphere_gauss(m.dim(), rho * rho * inv4u, 2.0 * r * rho * inv4u);
      return detail::SphereMean{std::expm1(lr), lr};
    }
    if (!rule_) return std::nullopt;
    const double inv = std::exp(-log_scale());
    if ((r + rho) * inv > std::exp(detail::kProfileLogCoverage)) return std::nullopt;
    return rule_->sphere_mean(r * inv, rho * inv);
  }

  double operator()(const Point& x, const Point& y) const {
    return (*this)(distance(fam_.model(), x, y));
  }

 private:
  // log p_t(d1) - log p_t(d0) for the hyperbolic Poisson kernel, term by term
  double poisson_h3_log_ratio(double d1, double d0, double diff) const {
    const double t2 = std::exp(2.0 * log_t_);
    const double r1 = std::sqrt(t2 + d1 * d1);
    const double r0 = std::sqrt(t2 + d0 * d0);
    const double dsq = diff * (d1 + d0);  // d1^2 - d0^2 = R1^2 - R0^2
    const double l_over_sinh = std::log1p(diff / d0) - diff -
                               (std::log(-std::expm1(-2.0 * d1)) - std::log(-std::expm1(-2.0 * d0)));
    return l_over_sinh + std::log(bessel_k_scaled(2.0, r1) / bessel_k_scaled(2.0, r0)) - std::log1p(dsq / (r0 * r0)) -
           dsq / (r1 + r0);
  }

  // Sphere mean of p_t: with cosh d = cosh r cosh rho - sinh r sinh rho c and
  // d dd = R dR, the c-average is t (K_1(R-)/R- - K_1(R+)/R+) / (4 pi^2 sinh r sinh rho),
  // R+- = sqrt(t^2 + (r +- rho)^2).
  std::optional<detail::SphereMean> poisson_h3_sphere_mean(double r, double rho) const {
    if (rho <= 0.0) return detail::SphereMean{0.0, 0.0};
    if (r <= 0.0) {
      const double lr = log_value(rho) - log_value(0.0);
      return detail::SphereMean{std::expm1(lr), lr};
    }
    const double t = std::exp(log_t_);
    const double r0 = std::hypot(t, r);
    const double rm = std::hypot(t, r - rho);
    const double rp = std::hypot(t, r + rho);
    auto lk1 = [](double z) { return std::log(bessel_k_scaled(1.0, z)) - std::log(z); };
    // exponents measured against R0 to keep large-r values exact
    const double em = lk1(rm) + rho * (2.0 * r - rho) / (r0 + rm);     // + R0 - R-
    const double ep = lk1(rp) - rho * (2.0 * r + rho) / (r0 + rp);     // + R0 - R+
    const double l_diff = em + std::log(-std::expm1(ep - em));
    const double lr = -M_LN2 - log_sinh(rho) - std::log(r) + l_diff - std::log(bessel_k_scaled(2.0, r0)) +
                      2.0 * std::log(r0);
    return detail::SphereMean{std::expm1(lr), lr};
  }

  static double positive_time(double t) {
    require(t > 0.0 && std::isfinite(t), "t must be positive");
    return t;
  }

  Kernel(const KernelFamily& fam, double log_t, const QuadratureSpec& quad, int)
      : fam_(fam), log_t_(log_t), quad_(quad) {
    quad_.validate();
    const bool subordinated = fam.id() == FamilyId::extension || fam.id() == FamilyId::frac_heat;
    if (subordinated && fam.model().is_euclidean()) {
      rule_ = detail::profile_rule(fam.id(), fam.param(), fam.model().dim());
    }
  }

  KernelFamily fam_;
  double log_t_;
  QuadratureSpec quad_;
  std::shared_ptr<const detail::SubordinationRule> rule_;
};

// ---------------------------------------------------------------------------
// Direct evaluation at one (t, x, y)

inline double extension_kernel(double sigma, double t, const ManifoldModel& m, const Point& x,
                               const Point& y, const QuadratureSpec& quad = {}) {
  require(sigma > 0.0 && sigma < 1.0, "sigma must lie in (0,1)");
  require(t > 0.0 && std::isfinite(t), "t must be positive");
  quad.validate();
  const double d = distance(m, x, y);
  if (m.is_hyperbolic()) return std::exp(detail::h3_extension_log(sigma, t, d, quad));
  auto build = [&](double width) {
    return detail::SubordinationRule::extension(sigma, t, m.dim(), std::max(d, t), width);
  };
  return std::exp(detail::direct_rule_log(build, d, quad));
}

inline double fractional_heat_kernel(double alpha, double t, const ManifoldModel& m, const Point& x,
                                     const Point& y, const QuadratureSpec& quad = {}) {
  require(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0,2)");
  require(t > 0.0 && std::isfinite(t), "t must be positive");
  quad.validate();
  const double d = distance(m, x, y);
  if (m.is_hyperbolic()) return std::exp(detail::h3_frac_heat_log(alpha, t, d, quad));
  auto build = [&](double width) {
    return detail::SubordinationRule::frac_heat(alpha, t, m.dim(), std::max(d, std::pow(t, 1.0 / alpha)),
                                                width);
  };
  return std::exp(detail::direct_rule_log(build, d, quad));
}

/// Two-sided envelope shape (constants left to the caller):
///   extension:  V(t + s)^-1 (t / (t + s))^(2 sigma)
///   frac-heat:  V(t^(1/alpha) + s)^-1 t / (t^(1/alpha) + s)^alpha
inline double kernel_envelope(const KernelFamily& fam, double t, double s) {
  require(t > 0.0 && s >= 0.0, "t must be positive and s nonnegative");
  if (fam.id() != FamilyId::extension && fam.id() != FamilyId::frac_heat) {
    throw DomainError("kernel_envelope: unsupported family '" + fam.name() + "'");
  }
  const ManifoldModel& m = fam.model();
  require(m.has_li_yau(), "kernel_envelope requires a Euclidean model");
  if (fam.id() == FamilyId::extension) {
    const double sig = fam.param();
    return std::exp(-log_ball_volume(m, t + s) + 2.0 * sig * (std::log(t) - std::log(t + s)));
  }
  const double a = fam.param();
  const double scale = std::pow(t, 1.0 / a);
  return std::exp(-log_ball_volume(m, scale + s) + std::log(t) - a * std::log(scale + s));
}

/// Spread of kernel / envelope over t in `times` and s = z t^(1/gamma), z in `scaled`.
inline ConstantFit envelope_fit(const KernelFamily& fam, std::span<const double> times, std::span<const double> scaled,
                                const QuadratureSpec& quad = {}) {
  std::vector<double> ratios;
  for (double t : times) {
    const Kernel k(fam, t, quad);
    for (double z : scaled) {
      const double s = z * k.scale();
      ratios.push_back(std::exp(k.log_value(s)) / kernel_envelope(fam, t, s));
    }
  }
  return fit_constants(ratios);
}

}  // namespace subfrac
