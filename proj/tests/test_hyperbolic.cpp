#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "oracles.hpp"
#include "subfrac/hyperbolic_poisson.hpp"

using namespace subfrac;

namespace {
const ManifoldModel H3 = ManifoldModel::hyperbolic_ball3();
const Point B(1.0);

Bump unit_bump() {
  Bump b;
  b.radius = 1.0;
  b.profile = BumpProfile::cosine_taper;
  return b;
}
}  // namespace

TEST(GammaRatio, IdenticallyOneOnH3) {
  for (double s : {0.0, 0.5, 1.0, 3.7}) EXPECT_NEAR(gamma_ratio(s, H3), 1.0, 1e-14);
  EXPECT_THROW(gamma_ratio(1.0, ManifoldModel::euclidean(3)), DomainError);
  EXPECT_THROW(gamma_ratio(-0.1, H3), DomainError);
}

TEST(GammaRatio, Lipschitz) {
  double lip = 0.0;
  for (double s = 0.5; s < 1.0; s += 0.01) lip = std::max(lip, std::abs(gamma_ratio(s + 0.01, H3) - gamma_ratio(s, H3)) / 0.01);
  EXPECT_TRUE(std::isfinite(lip));
  EXPECT_LT(lip, 1.0);
}

TEST(CriticalRegion, Construction) {
  const CriticalRegion cr = CriticalRegion::make(10.0, 1.0);
  EXPECT_DOUBLE_EQ(cr.r_min, 10.0);
  EXPECT_DOUBLE_EQ(cr.r_max, 1000.0);
  EXPECT_THROW(CriticalRegion::make(10.0, 2.0), DomainError);
  EXPECT_THROW(CriticalRegion::make(10.0, 0.0), DomainError);
}

TEST(CriticalRegionMass, PartitionAndInsideMass) {
  const RegionMass rm = critical_region_mass(10.0, 1.0);
  EXPECT_NEAR(rm.total(), 1.0, 1e-6);
  EXPECT_GE(rm.inside, 0.6);
  EXPECT_GE(rm.below, 0.0);
  EXPECT_GE(rm.above, 0.0);
}

TEST(CriticalRegionMass, BelowRegionAgainstSimpson) {
  const double t = 10.0;
  auto f = [&](double r) { return r == 0.0 ? 0.0 : oracle::poisson_h3(t, r) * 4.0 * M_PI * std::sinh(r) * std::sinh(r); };
  const double ref = oracle::simpson(f, 0.0, 10.0, 4000);
  EXPECT_NEAR(critical_region_mass(t, 1.0).below / ref, 1.0, 1e-8);
}

TEST(CriticalRegionMass, BelowRegionSmall) {
  // the inner mass decays super-polynomially, but at t = 10 it is still 2.4e-3
  EXPECT_LE(critical_region_mass(10.0, 1.0).below, 1e-8);
}

TEST(CriticalRegionMass, OutsideMassDecays) {
  std::vector<double> ts{8.0, 16.0, 32.0, 64.0}, out;
  for (double t : ts) {
    const RegionMass rm = critical_region_mass(t, 1.0);
    EXPECT_NEAR(rm.total(), 1.0, 1e-6);
    out.push_back(rm.below + rm.above);
  }
  EXPECT_LE(estimate_rate(ts, out).slope, -0.4);
}

TEST(BusemannGap, ZeroAtOrigin) { EXPECT_EQ(busemann_gap(4.0, 0.25, Point(), B), 0.0); }

TEST(BusemannGap, MatchesDirectDifferenceAtModerateRadius) {
  // at r = t^2 = 4 the direct formula is still accurate
  const Point y = h3_point(1.0, Point(0.6, 0.8, 0.0));
  const double r = 4.0;
  const Point x = h3_point(r, B);
  const double direct = (r - distance(H3, x, y)) - busemann(y, B);
  EXPECT_NEAR(busemann_gap(2.0, 0.25, y, B), direct, 1e-12);
}

TEST(BusemannGap, DecaysAlongBothDirections) {
  const Point y = h3_point(1.0, B);
  double prev_p = INFINITY, prev_m = INFINITY;
  for (double t : {2.0, 4.0, 8.0, 16.0}) {
    const double gp = std::abs(busemann_gap(t, 0.25, y, B));
    const double gm = std::abs(busemann_gap(t, 0.25, y, Point(-1.0)));
    EXPECT_LE(gp, prev_p);
    EXPECT_LE(gm, prev_m);
    EXPECT_LE(gp, 1.0 / (t * t));
    EXPECT_LE(gm, 1.0 / (t * t));
    prev_p = gp;
    prev_m = gm;
  }
}

TEST(BusemannGap, PowerLawSlope) {
  // an off-axis point, so the gap is not identically zero
  const Point y = h3_point(1.0, Point(0.0, 1.0, 0.0));
  std::vector<double> ts{4.0, 8.0, 16.0}, gaps;
  for (double t : ts) gaps.push_back(std::abs(busemann_gap(t, 0.25, y, B)));
  EXPECT_NEAR(fit_loglog(ts, gaps).slope, -2.0, 0.3);
}

TEST(KernelQuotient, TrivialAtOrigin) {
  const QuotientSample s = kernel_quotient(8.0, 64.0, Point(), B);
  EXPECT_EQ(s.measured, 1.0);
  EXPECT_EQ(s.predicted, 1.0);
}

TEST(KernelQuotient, ConvergesToBusemannExponential) {
  const Point y = h3_point(1.0, Point(0.0, 0.6, 0.8));
  std::vector<double> errs;
  for (double t : {8.0, 16.0, 32.0}) {
    double worst = 0.0;
    for (const Point& b : {B, Point(-1.0), Point(0.0, 1.0), Point(0.0, 0.0, 1.0), Point(0.0, -0.6, -0.8)}) {
      const QuotientSample s = kernel_quotient(t, t * t, y, b);
      if (s.underflow) continue;
      EXPECT_NEAR(s.predicted, std::exp(2.0 * busemann(y, b)), 1e-12 * s.predicted);
      worst = std::max(worst, std::abs(s.measured - s.predicted));
    }
    errs.push_back(worst);
  }
  EXPECT_LT(errs[1], errs[0]);
  EXPECT_LT(errs[2], errs[1]);
  EXPECT_LE(errs[2], 0.1);
}

TEST(KernelQuotient, MeasuredAgainstBesselOracle) {
  const Point y = h3_point(1.0, Point(0.0, 1.0));
  const double t = 3.0, r = 9.0;
  const QuotientSample s = kernel_quotient(t, r, y, B);
  const Point x = h3_point(r, B);
  const double ref = oracle::poisson_h3(t, oracle::ball_distance(x.coords.data(), y.coords.data())) / oracle::poisson_h3(t, r);
  EXPECT_NEAR(s.measured / ref, 1.0, 1e-8);
}

TEST(KernelQuotient, PredictedMeanOverDirections) {
  const Point y = h3_point(1.0, B);
  const int n = 64;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double rr = std::sqrt(1.0 - z * z);
    sum += kernel_quotient(8.0, 64.0, y, Point(rr * std::cos(golden * i), rr * std::sin(golden * i), z)).predicted;
  }
  EXPECT_NEAR(sum / n, 1.0, 0.02);
}

TEST(MeanValue, BoundaryAverage) {
  for (double a : {0.25, 0.5, 0.75}) EXPECT_NEAR(boundary_mean_exp2tau(Point(0.0, a, 0.0)), 1.0, 1e-8);
}

TEST(Deficiency, Values) {
  EXPECT_EQ(deficiency(Point()), 0.0);
  const double d = deficiency(h3_point(1.0, B));
  EXPECT_GE(d, 0.1);
  EXPECT_NEAR(d, 0.924234314520, 1e-10);
  // independent: Simpson on the two monotone pieces
  const double s = 1.0, cs = std::tanh(0.5);
  auto g = [&](double c) { return std::abs(std::pow(std::cosh(s) - c * std::sinh(s), -2.0) - 1.0); };
  const double ref = 0.5 * (oracle::simpson(g, -1.0, cs, 20000) + oracle::simpson(g, cs, 1.0, 20000));
  EXPECT_NEAR(d, ref, 1e-9);
}

TEST(SphericalTransform, MassAtImaginaryRho) {
  const InitialDatum f = InitialDatum::bump_with_mass(H3, unit_bump(), 1.0);
  EXPECT_NEAR(spherical_transform_h3(f, {0.0, 1.0}), 1.0, 1e-8);
  EXPECT_NEAR(spherical_transform_h3(f, {0.0, -1.0}), 1.0, 1e-8);
}

TEST(SphericalTransform, DiracAtOriginAndDecay) {
  const InitialDatum d = InitialDatum::dirac(H3, Point(), 0.7);
  for (double l : {0.0, 1.0, 9.0}) EXPECT_NEAR(spherical_transform_h3(d, {l, 0.0}), 0.7, 1e-15);
  const InitialDatum f = InitialDatum::bump_with_mass(H3, unit_bump(), 1.0);
  const double a = std::abs(spherical_transform_h3(f, {1.0, 0.0}));
  const double b = std::abs(spherical_transform_h3(f, {50.0, 0.0}));
  EXPECT_GE(a / b, 10.0);
  EXPECT_THROW(spherical_transform_h3(InitialDatum::dirac(H3, Point(0.3)), {1.0, 0.0}), DomainError);
  EXPECT_THROW(spherical_transform_h3(f, {1.0, 1.0}), DomainError);
}

TEST(PoissonH3, NormalizationAndBoundShape) {
  for (double t : {1.0, 5.0, 20.0}) {
    const double mass = integrate_radial_log(H3, [&](double r) { return log_poisson_kernel_h3_closed(t, r); }, {}, t);
    EXPECT_NEAR(mass, 1.0, 1e-6);
  }
  std::vector<double> ratios;
  for (double t : {5.0, 10.0, 20.0, 40.0}) {
    for (double lr = 0.0; lr <= 3.0 * std::log(t); lr += std::log(t) / 8.0) ratios.push_back(poisson_bound_ratio(t, std::exp(lr)));
  }
  EXPECT_LE(fit_constants(ratios).spread(), 20.0);
}

TEST(PoissonH3, AsymptoticShapeAtForty) {
  std::vector<double> ratios;
  const double lt = std::log(40.0);
  for (double lr = lt; lr <= 3.0 * lt + 1e-12; lr += lt / 16.0) ratios.push_back(poisson_asymptotic_ratio(40.0, std::exp(lr)));
  const ConstantFit fit = fit_constants(ratios);
  EXPECT_LE(fit.spread() - 1.0, 0.05);
  // the Bessel asymptotics fix the constant at 2^(-1/2) pi^(-3/2)
  EXPECT_NEAR(fit.lower, 1.0 / (std::sqrt(2.0) * std::pow(M_PI, 1.5)), 1e-3);
}

TEST(PoissonH3, ExponentialFactorBound) {
  for (double t : {10.0, 20.0, 40.0}) {
    const double eps = 0.25;
    double worst = 0.0;
    for (double lr = (2.0 - eps) * std::log(t); lr <= (2.0 + eps) * std::log(t); lr += 0.05) {
      const double r = std::exp(lr);
      for (double ds : {-2.0, -0.5, 0.5, 2.0}) {
        const double s = r + ds;
        const double q = (r + s) / (std::hypot(t, r) + std::hypot(t, s));
        worst = std::max(worst, std::abs(q - 1.0));
      }
    }
    EXPECT_LE(worst, 2.0 * std::pow(t, -2.0 + 2.0 * eps));
  }
}

TEST(L1Gap, DiracAtOriginIsZero) {
  const ExperimentReport rep = l1_gap_trajectory(InitialDatum::dirac(H3, Point()), {2.0, 5.0});
  for (double v : rep.l1_values) EXPECT_EQ(v, 0.0);
}

TEST(L1Gap, OffCenterDiracApproachesDeficiency) {
  const Point y = h3_point(1.0, B);
  const double def = deficiency(y);
  const ExperimentReport rep = l1_gap_trajectory(InitialDatum::dirac(H3, y), {10.0, 15.0, 20.0});
  for (double v : rep.l1_values) EXPECT_GE(v, 0.5 * def);
  EXPECT_NEAR(rep.l1_values.back() / def, 1.0, 0.15);
  EXPECT_TRUE(rep.weighted_sup_values.empty());
  EXPECT_FALSE(rep.fitted_slope.has_value());
}

TEST(L1Gap, RadialBumpDecays) {
  const InitialDatum f = InitialDatum::bump_with_mass(H3, unit_bump(), 1.0);
  const ExperimentReport rep = l1_gap_trajectory(f, {2.0, 5.0, 10.0, 20.0});
  for (size_t i = 1; i < rep.l1_values.size(); ++i) EXPECT_LT(rep.l1_values[i], rep.l1_values[i - 1]);
  EXPECT_LE(rep.l1_values.back(), 0.25 * rep.l1_values.front());
  ASSERT_TRUE(rep.fitted_slope.has_value());
}

TEST(L1Gap, Preconditions) {
  EXPECT_THROW(l1_gap_trajectory(InitialDatum::dirac(H3, h3_point(3.0, B)), {2.0}), DomainError);
  EXPECT_THROW(l1_gap_trajectory(InitialDatum::dirac(H3, Point()), {5.0, 2.0}), DomainError);
}
