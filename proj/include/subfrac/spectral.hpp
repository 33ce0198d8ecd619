#pragma once

// Independent evaluation of Euclidean radial kernels from their Fourier
// multipliers m(lambda), by radial inverse Fourier transform:
//   n = 1:  (1/pi)        int_0^inf cos(lambda s) m dlambda
//   n = 2:  (1/(2 pi))    int_0^inf lambda J_0(lambda s) m dlambda
//   n = 3:  (1/(2 pi^2 s)) int_0^inf lambda sin(lambda s) m dlambda

#include <cmath>
#include <functional>

#include "subfrac/errors.hpp"
#include "subfrac/kernels.hpp"
#include "subfrac/quadrature.hpp"
#include "subfrac/special_functions.hpp"

namespace subfrac {

using Multiplier = std::function<double(double)>;

/// Spectral multiplier of a family at time t.
inline Multiplier spectral_multiplier(const KernelFamily& fam, double t) {
  require(t > 0.0, "t must be positive");
  switch (fam.id()) {
    case FamilyId::extension: {
      const double sig = fam.param();
      const double pref = std::pow(2.0, 1.0 - sig) / std::tgamma(sig);
      return [=](double lambda) {
        const double z = t * lambda;
        if (z <= 0.0) return 1.0;
        if (z > 740.0) return 0.0;
        return pref * std::pow(z, sig) * bessel_k(sig, z);
      };
    }
    case FamilyId::frac_heat: {
      const double a = fam.param();
      return [=](double lambda) { return std::exp(-t * std::pow(lambda, a)); };
    }
    case FamilyId::heat:
      return [=](double lambda) { return std::exp(-t * lambda * lambda); };
    default:
      throw DomainError("spectral inversion is defined for Euclidean heat, extension and frac-heat families");
  }
}

/// Radial inverse Fourier transform of a decreasing multiplier at distance s.
/// Oscillatory cases sum half-period panels and average the last two partial
/// sums once the panel contributions fall below tolerance.
inline double spectral_inversion(int n, const Multiplier& mult, double s, const QuadratureSpec& quad = {}) {
  require(n >= 1 && n <= 3, "dimension must be 1, 2 or 3");
  require(s >= 0.0, "distance must be nonnegative");
  quad.validate();
  QuadratureSpec inner = quad.with_rel_tol(std::min(quad.rel_tol, 1e-10));
  inner.abs_floor = 0.0;

  // characteristic decay length of the multiplier: m(lam_c) = e^-1 roughly
  double lam_c = 1.0;
  {
    const double m0 = mult(0.0);
    double lo = 0.0;
    double hi = 1.0;
    while (mult(hi) > m0 * std::exp(-1.0) && hi < 1e300) hi *= 2.0;
    for (int i = 0; i < 80; ++i) {
      const double mid = 0.5 * (lo + hi);
      (mult(mid) > m0 * std::exp(-1.0) ? lo : hi) = mid;
    }
    lam_c = std::max(hi, 1e-300);
  }

  std::function<double(double)> integrand;
  double pref = 1.0;
  switch (n) {
    case 1:
      pref = 1.0 / M_PI;
      integrand = [&](double l) { return std::cos(l * s) * mult(l); };
      break;
    case 2:
      pref = 1.0 / (2.0 * M_PI);
      integrand = [&](double l) { return l * std::cyl_bessel_j(0.0, l * s) * mult(l); };
      break;
    default:
      if (s == 0.0) {
        pref = 1.0 / (2.0 * M_PI * M_PI);
        integrand = [&](double l) { return l * l * mult(l); };
      } else {
        pref = 1.0 / (2.0 * M_PI * M_PI * s);
        integrand = [&](double l) { return l * std::sin(l * s) * mult(l); };
      }
  }

  const bool oscillatory = s > 0.0;
  if (!oscillatory || M_PI / s > 60.0 * lam_c) {
    const QuadResult r = integrate_to_infinity(integrand, 0.0, lam_c, inner);
    if (!r.converged) throw AccuracyError("spectral inversion did not converge", pref * r.value, r.error);
    return pref * r.value;
  }

  const double half = M_PI / s;
  double sum = 0.0;
  double prev_sum = 0.0;
  int small_run = 0;
  constexpr int kMaxPanels = 4000000;
  for (int k = 0; k < kMaxPanels; ++k) {
    const QuadResult piece = integrate_adaptive(integrand, k * half, (k + 1) * half, inner);
    prev_sum = sum;
    sum += piece.value;
    const double tail_bound = std::abs(mult((k + 1) * half)) * ((n == 1) ? 1.0 : (k + 1) * half) * half;
    small_run = (tail_bound <= 1e-3 * quad.rel_tol * std::abs(sum)) ? small_run + 1 : 0;
    if (small_run >= 2) return pref * 0.5 * (sum + prev_sum);
  }
  throw AccuracyError("spectral inversion exceeded the panel limit", pref * sum, std::abs(sum - prev_sum));
}

/// Kernel of a Euclidean family at time t and distance s, from its multiplier.
inline double spectral_oracle(int n, const KernelFamily& fam, double t, double s, const QuadratureSpec& quad = {}) {
  require(fam.id() == FamilyId::extension || fam.id() == FamilyId::frac_heat,
          "spectral_oracle supports the extension and frac-heat families");
  return spectral_inversion(n, spectral_multiplier(fam, t), s, quad);
}

}  // namespace subfrac
