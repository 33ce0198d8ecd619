#pragma once

// Adaptive Gauss-Kronrod quadrature on finite and semi-infinite ranges,
// plus fixed Gauss-Legendre rules. All integrators are pure functions of
// their arguments.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "subfrac/errors.hpp"

namespace subfrac {

struct QuadratureSpec {
  double rel_tol = 1e-9;
  double abs_floor = 1e-300;
  int max_panels = 1 << 14;

  void validate() const {
    require(rel_tol > 0.0 && rel_tol < 1e-3, "rel_tol must lie in (0, 1e-3)");
    require(abs_floor >= 0.0, "abs_floor must be nonnegative");
    require(max_panels >= 1, "max_panels must be positive");
  }

  QuadratureSpec with_rel_tol(double tol) const {
    QuadratureSpec out = *this;
    out.rel_tol = tol;
    return out;
  }
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int panels = 0;
  bool converged = true;
};

namespace detail {

// QUADPACK qk21 abscissae and weights.
inline constexpr std::array<double, 11> kXgk21 = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> kWgk21 = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980632460, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg10 = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gk21(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double resg = 0.0;
  double resk = kWgk21[10] * fc;
  double resabs = std::abs(resk);
  std::array<double, 10> fv1{};
  std::array<double, 10> fv2{};
  for (int j = 0; j < 10; ++j) {
    const double dx = half * kXgk21[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    fv1[j] = f1;
    fv2[j] = f2;
    resk += kWgk21[j] * (f1 + f2);
    resabs += kWgk21[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) resg += kWg10[j / 2] * (f1 + f2);
  }
  const double mean = 0.5 * resk;
  double resasc = kWgk21[10] * std::abs(fc - mean);
  for (int j = 0; j < 10; ++j) {
    resasc += kWgk21[j] * (std::abs(fv1[j] - mean) + std::abs(fv2[j] - mean));
  }
  const double ah = std::abs(half);
  resk *= half;
  resabs *= ah;
  resasc *= ah;
  double err = std::abs((resk - resg * half));
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr double tiny = std::numeric_limits<double>::min();
  if (resabs > tiny / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  if (!std::isfinite(resk)) err = std::numeric_limits<double>::infinity();
  return {a, b, resk, err};
}

}  // namespace detail

/// Globally adaptive GK21 over [a, b]. `breaks` are interior points that seed
/// the initial partition. Never throws on non-convergence; inspect `converged`.
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, const QuadratureSpec& spec,
                              std::span<const double> breaks = {}) {
  QuadResult out;
  if (a == b) return out;
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::vector<double> cuts{a};
  for (double x : breaks) {
    if (x > a && x < b) cuts.push_back(x);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<detail::Segment> heap;
  heap.reserve(static_cast<size_t>(std::max<int>(spec.max_panels, 8)) + 2);
  double total = 0.0;
  double total_err = 0.0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    heap.push_back(detail::gk21(f, cuts[i], cuts[i + 1]));
    total += heap.back().value;
    total_err += heap.back().error;
  }
  std::make_heap(heap.begin(), heap.end());

  auto tolerance = [&] { return std::max(spec.rel_tol * std::abs(total), spec.abs_floor); };
  bool stuck = false;
  while (total_err > tolerance() && static_cast<int>(heap.size()) < spec.max_panels) {
    std::pop_heap(heap.begin(), heap.end());
    detail::Segment worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b) ||
        (worst.b - worst.a) < 64.0 * std::numeric_limits<double>::epsilon() *
                                  std::max(std::abs(worst.a), std::abs(worst.b))) {
      heap.push_back(worst);
      std::push_heap(heap.begin(), heap.end());
      stuck = true;
      break;
    }
    detail::Segment left = detail::gk21(f, worst.a, mid);
    detail::Segment right = detail::gk21(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end());
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end());
  }
  // resum to shed accumulated cancellation in the running totals
  total = 0.0;
  total_err = 0.0;
  for (const auto& s : heap) {
    total += s.value;
    total_err += s.error;
  }
  out.value = sign * total;
  out.error = total_err;
  out.panels = static_cast<int>(heap.size());
  out.converged = !stuck && total_err <= tolerance() && std::isfinite(total);
  if (stuck && total_err <= tolerance()) out.converged = true;
  return out;
}

/// Integral over [a, inf) by doubling panels [a + s(2^k - 1), a + s(2^(k+1) - 1)].
/// Stops once two consecutive panels each contribute less than rel_tol of the
/// running total; the remainder of a geometrically decaying tail is added.
template <class F>
QuadResult integrate_to_infinity(F&& f, double a, double scale, const QuadratureSpec& spec) {
  require(scale > 0.0, "panel scale must be positive");
  QuadResult out;
  double lo = a;
  double width = scale;
  double prev = 0.0;
  int small_run = 0;
  bool all_converged = true;
  constexpr int kMaxDoublings = 1000;
  for (int k = 0; k < kMaxDoublings; ++k) {
    const double hi = lo + width;
    if (!std::isfinite(hi)) break;
    QuadratureSpec local = spec;
    local.abs_floor = std::max(spec.abs_floor, 0.05 * spec.rel_tol * std::abs(out.value));
    QuadResult piece = integrate_adaptive(f, lo, hi, local);
    all_converged = all_converged && piece.converged;
    out.value += piece.value;
    out.error += piece.error;
    out.panels += piece.panels;
    const bool small = std::abs(piece.value) <= spec.rel_tol * std::abs(out.value) &&
                       out.value != 0.0;
    small_run = small ? small_run + 1 : 0;
    if (small_run >= 2 && k >= 2) {
      if (prev != 0.0 && piece.value != 0.0 && (prev > 0) == (piece.value > 0)) {
        const double q = piece.value / prev;
        if (q < 0.95) {
          const double rem = piece.value * q / (1.0 - q);
          out.value += rem;
          out.error += 0.5 * std::abs(rem);
        }
      }
      out.converged = all_converged &&
                      out.error <= std::max(4.0 * spec.rel_tol * std::abs(out.value),
                                            spec.abs_floor);
      return out;
    }
    prev = piece.value;
    lo = hi;
    width *= 2.0;
  }
  out.converged = false;
  return out;
}

/// int_{e^l0}^inf g(r) dr in the variable l = log r, for g with at worst a
/// power-law tail. Unit-width panels; once the panel ratios q_k settle the
/// remainder is summed in closed form, with q_k = q_inf + c rho^k fitted by
/// Aitken's method, so slow tails like r^(-1.3) finish long before r reaches
/// magnitudes where log-domain integrands lose their digits.
template <class F>
QuadResult integrate_log_tail(F&& g, double l0, const QuadratureSpec& spec) {
  auto f = [&](double l) {
    const double r = std::exp(l);
    return g(r) * r;
  };
  constexpr int kMaxPanels = 400;
  QuadResult out;
  bool all_converged = true;
  std::vector<double> ps;
  int small_run = 0;
  auto finish = [&](double rem, double rem_err) {
    out.value += rem;
    out.error += rem_err;
    out.converged = all_converged && out.error <= std::max(4.0 * spec.rel_tol * std::abs(out.value), spec.abs_floor);
    return out;
  };
  for (int k = 0; k < kMaxPanels; ++k) {
    QuadratureSpec local = spec;
    local.abs_floor = std::max(spec.abs_floor, 0.01 * spec.rel_tol * std::abs(out.value));
    const QuadResult piece = integrate_adaptive(f, l0 + k, l0 + k + 1.0, local);
    all_converged = all_converged && piece.converged;
    out.value += piece.value;
    out.error += piece.error;
    out.panels += piece.panels;
    ps.push_back(piece.value);
    const double p = piece.value;
    small_run = (out.value != 0.0 && std::abs(p) <= 0.01 * spec.rel_tol * std::abs(out.value)) ? small_run + 1 : 0;
    if (small_run >= 2) return finish(0.0, 0.0);
    if (ps.size() < 5) continue;
    const size_t n = ps.size();
    if (!(ps[n - 5] > 0.0 && ps[n - 4] > 0.0 && ps[n - 3] > 0.0 && ps[n - 2] > 0.0 && p > 0.0)) continue;
    const double q0 = ps[n - 4] / ps[n - 5];
    const double q1 = ps[n - 3] / ps[n - 4];
    const double q2 = ps[n - 2] / ps[n - 3];
    const double q3 = p / ps[n - 2];
    if (!(q3 < 0.98)) continue;
    const double tol = 0.25 * spec.rel_tol * std::abs(out.value);
    const double d0 = q1 - q0, d1 = q2 - q1, d2 = q3 - q2;
    // plain geometric tail
    const double plain_err = p * std::abs(d2) / ((1.0 - q3) * (1.0 - q3));
    if (plain_err <= tol) return finish(p * q3 / (1.0 - q3), plain_err);
    if (d0 == 0.0 || d1 == 0.0) continue;
    const double rho = d2 / d1;
    const double rho_prev = d1 / d0;
    if (!(rho > 0.0 && rho < 0.9 && rho_prev > 0.0 && rho_prev < 0.9)) continue;
    const double q_inf = q3 + d2 * rho / (1.0 - rho);
    if (!(q_inf > 0.0 && q_inf < 0.98)) continue;
    double rem = 0.0;
    double term = p;
    double dq = q3 - q_inf;
    for (int i = 0; i < 100000 && term > 1e-3 * tol; ++i) {
      dq *= rho;
      term *= q_inf + dq;
      rem += term;
    }
    const double miss = std::abs(d2 - d1 * rho_prev);
    const double aitken_err = p * miss * rho / ((1.0 - rho) * (1.0 - q_inf) * (1.0 - q_inf));
    if (aitken_err <= tol) return finish(rem, aitken_err);
  }
  out.converged = false;
  return out;
}

/// Throwing wrappers.
template <class F>
double integrate(F&& f, double a, double b, const QuadratureSpec& spec,
                 std::span<const double> breaks = {}) {
  QuadResult r = integrate_adaptive(f, a, b, spec, breaks);
  if (!r.converged) {
    throw AccuracyError("quadrature did not reach tolerance on [" + std::to_string(a) + ", " +
                            std::to_string(b) + "]",
                        r.value, r.error);
  }
  return r.value;
}

template <class F>
double integrate_semi_infinite(F&& f, double a, double scale, const QuadratureSpec& spec) {
  QuadResult r = integrate_to_infinity(f, a, scale, spec);
  if (!r.converged) {
    throw AccuracyError("semi-infinite quadrature did not converge from " + std::to_string(a),
                        r.value, r.error);
  }
  return r.value;
}

struct GaussNode {
  double x;
  double w;
};

/// n-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline std::vector<GaussNode> gauss_legendre(int n) {
  require(n >= 1, "Gauss-Legendre order must be positive");
  if (n == 1) return {{0.0, 2.0}};
  // P_n(x) and P_n'(x) by the three-term recurrence
  auto legendre = [n](double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
  };
  std::vector<GaussNode> nodes(static_cast<size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<size_t>(i)] = {-x, w};
    nodes[static_cast<size_t>(n - 1 - i)] = {x, w};
  }
  return nodes;
}

/// Fixed n-point Gauss-Legendre integral over [a, b].
template <class F>
double gauss_legendre_integral(F&& f, double a, double b, std::span<const GaussNode> rule) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double sum = 0.0;
  for (const auto& node : rule) sum += node.w * f(c + h * node.x);
  return h * sum;
}

}  // namespace subfrac
