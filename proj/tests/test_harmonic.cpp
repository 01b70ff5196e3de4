#include <gtest/gtest.h>

#include <random>

#include "corona/harmonic.hpp"
#include "support.hpp"

using namespace corona;

namespace {

HarmonicField field(std::vector<XInterval> e, Side side = Side::upper) { return HarmonicField(IntervalUnion(e), side); }

}  // namespace

TEST(HarmonicMeasure, ClosedFormExamples) {
  EXPECT_NEAR(field({{-inf, inf}}).omega(Which::e_set, I), 1.0, 1e-15);
  EXPECT_NEAR(field({{-1, 1}}).omega(Which::e_set, I), 0.5, 1e-15);
  EXPECT_NEAR(field({{0, inf}}).omega(Which::e_set, I), 0.5, 1e-15);
  EXPECT_NEAR(field({{-1, 1}}).omega(Which::e_set, 2.0 * I), 0.295167, 1e-6);
}

TEST(HarmonicMeasure, PositiveAxisAgreesWithQuadrature) {
  const auto f = field({{0, inf}});
  EXPECT_NEAR(f.omega(Which::e_set, I), poisson_oracle(f, Which::e_set, I), 1e-10);
}

TEST(HarmonicMeasure, RealAxisIsDomainError) {
  const auto f = field({{-1, 1}});
  EXPECT_THROW(f.omega(Which::e_set, 0.5), DomainError);
  EXPECT_THROW(f.omega(Which::e_set, cplx(0.5, -1)), DomainError);
  EXPECT_NEAR(field({{-1, 1}}, Side::lower).omega(Which::e_set, cplx(0, -1)), 0.5, 1e-15);
}

TEST(HarmonicMeasure, OracleAgreementRandomized) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> X(-4.0, 4.0), LY(-3.0, 3.0);
  for (int c = 0; c < 20; ++c) {
    const HarmonicField f(fixtures::random_union(rng));
    for (int k = 0; k < 5; ++k) {
      const cplx z{X(rng), std::pow(10.0, LY(rng))};
      EXPECT_NEAR(f.omega(Which::e_set, z), poisson_oracle(f, Which::e_set, z), 1e-8) << z;
    }
  }
}

TEST(HarmonicMeasure, ComplementsSumToOne) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> X(-4.0, 4.0), Y(1e-3, 5.0);
  for (int c = 0; c < 50; ++c) {
    const HarmonicField f(fixtures::random_union(rng));
    const cplx z{X(rng), Y(rng)};
    EXPECT_NEAR(f.omega(Which::e_set, z) + f.omega(Which::gaps, z), 1.0, 1e-12);
  }
}

TEST(HarmonicMeasure, SymmetricUnionMirror) {
  const auto f = field({{-inf, -2}, {-1, 1}, {2, inf}});
  for (double x : {0.3, 1.5, 2.7})
    EXPECT_NEAR(f.omega(Which::gaps, cplx(x, 0.4)), f.omega(Which::gaps, cplx(-x, 0.4)), 1e-14);
}

TEST(HarmonicMeasure, LaplacianRichardson) {
  const auto f = field({{-inf, -2}, {-1, 1}, {2, inf}});
  const cplx z{1.3, 0.45};
  auto lap = [&](double h) {
    auto w = [&](cplx p) { return f.omega(Which::gaps, p); };
    return (w(z + h) + w(z - h) + w(z + I * h) + w(z - I * h) - 4 * w(z)) / (h * h);
  };
  // The discrete Laplacian of a harmonic function is O(h^2); compare two spacings.
  const double l1 = lap(0.02), l2 = lap(0.01);
  EXPECT_NEAR(l1 / l2, 4.0, 0.8);
}

TEST(HarmonicMeasure, BoundaryLimits) {
  const auto f = field({{-inf, -2}, {-1, 1}, {2, inf}});
  EXPECT_NEAR(f.omega(Which::e_set, cplx(0.0, 1e-9)), 1.0, 1e-8);
  EXPECT_NEAR(f.omega(Which::e_set, cplx(1.5, 1e-9)), 0.0, 1e-8);
  EXPECT_DOUBLE_EQ(f.boundary_limit(Which::e_set, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(f.boundary_limit(Which::gaps, 1.5), 1.0);
  EXPECT_DOUBLE_EQ(f.boundary_limit(Which::e_set, 1.0), 0.5);
}

TEST(AnalyticCompletion, CauchyRiemannAndRealPart) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> X(-3.0, 3.0), Y(0.05, 3.0);
  const auto f = field({{-inf, -2}, {-1, 1}, {2, inf}});
  for (int k = 0; k < 50; ++k) {
    const cplx z{X(rng), Y(rng)};
    const double h = 1e-5;
    const cplx fd = (analytic_completion(f, z + h) - analytic_completion(f, z - h)) / (2 * h);
    EXPECT_LT(std::abs(fd - f.dW(z)), 1e-6 * (1 + std::abs(f.dW(z))));
    EXPECT_NEAR(analytic_completion(f, z).real(), f.omega(Which::gaps, z), 1e-12);
    const double b = 0.3;
    const cplx zeta{X(rng), Y(rng)};
    const cplx e = std::exp((f.W(z) - f.W(zeta)) * std::log(b));
    EXPECT_NEAR(std::abs(e), std::pow(b, f.omega(Which::gaps, z) - f.omega(Which::gaps, zeta)), 1e-12);
  }
}

TEST(AnalyticCompletion, ContinuousAcrossGapsWithReflectedValue) {
  const auto f = field({{-inf, -2}, {-1, 1}, {2, inf}});
  for (double x : {-1.7, -1.2, 1.1, 1.5, 1.95}) {
    const cplx above = f.W(cplx(x, 1e-10)), below = f.W(cplx(x, -1e-10));
    EXPECT_LT(std::abs(above - below), 1e-8);
    EXPECT_NEAR(f.W(cplx(x, -0.3)).real(), 2.0 - f.omega(Which::gaps, cplx(x, 0.3)), 1e-12);
  }
}

TEST(GradientRatio, SymmetryAndFiniteDifferences) {
  const auto f = field({{-1, 3}});
  EXPECT_NEAR(omega_gradient_ratio(f, cplx(1.0, 0.7)), 0.0, 1e-14);
  const auto g = field({{-inf, -2}, {-1, 1}, {2, inf}});
  for (cplx z : {cplx(1.3, 0.2), cplx(-1.6, 0.05), cplx(0.4, 1.5)}) {
    const double h = 1e-5;
    const double wx = (g.omega(Which::e_set, z + h) - g.omega(Which::e_set, z - h)) / (2 * h);
    const double wy = (g.omega(Which::e_set, z + I * h) - g.omega(Which::e_set, z - I * h)) / (2 * h);
    EXPECT_NEAR(omega_gradient_ratio(g, z), wx / wy, 1e-6 * (1 + std::abs(wx / wy)));
  }
}

TEST(GradientRatio, BoundedUnderNarrowTents) {
  const auto f = field({{-inf, -2}, {-1, 1}, {2, inf}});
  const double am = pi / 8, g = 2 * am / 3;
  for (const auto& gap : f.gaps()) {
    for (int i = 1; i < 40; ++i)
      for (int j = 1; j < 20; ++j) {
        const double t = double(i) / 40;
        const double x = gap.lo + t * (gap.hi - gap.lo);
        const double ymax = std::min(t, 1 - t) * (gap.hi - gap.lo) * std::tan(g);
        const cplx z{x, ymax * j / 20.0};
        EXPECT_LE(std::abs(omega_gradient_ratio(f, z)), std::tan(g) + 1e-12);
      }
  }
}

TEST(ExtendedMeasure, Conventions) {
  const auto f = field({{-inf, -2}, {-1, 1}, {2, inf}});
  EXPECT_DOUBLE_EQ(extended_measure(f, 1.5), 1.0);
  EXPECT_NEAR(extended_measure(f, cplx(1.5, -0.2)), 2.0 - f.omega(Which::gaps, cplx(1.5, 0.2)), 1e-14);
  EXPECT_GT(extended_measure(f, cplx(1.5, -0.05)), 1.0);
  EXPECT_THROW(extended_measure(f, cplx(0.0, -0.2)), DomainError);
  // continuity across the gap
  EXPECT_NEAR(extended_measure(f, cplx(1.4, 1e-10)), extended_measure(f, cplx(1.4, -1e-10)), 1e-9);
}

TEST(LowerBound, PeriodicUnion) {
  std::vector<XInterval> parts{{-inf, 0}};
  for (int k = 1; k < 10; ++k) parts.push_back({2.0 * k - 1, 2.0 * k});
  parts.push_back({19, inf});
  const HarmonicField f{IntervalUnion(parts)};
  std::vector<cplx> zs;
  for (int k = 1; k < 10; ++k)
    for (double y : {0.1, 1.0, 10.0}) zs.push_back(cplx(2.0 * k - 0.5, y));
  const auto rep = homogeneous_lower_bound_check(f, 0.4, zs);
  EXPECT_TRUE(rep.ok());
  EXPECT_GT(rep.min_margin, 0.0);
  const auto bad = homogeneous_lower_bound_check(f, 0.9, zs);
  EXPECT_FALSE(bad.ok());
}

TEST(TentBoundary, ApexAndArithmetic) {
  const auto f = field({{-inf, -1}, {1, inf}});
  const double gamma = pi / 8, eps = 0.4;
  EXPECT_NEAR(1 - eps * gamma / pi, 0.95, 1e-15);
  const auto pts = tent_boundary_samples(f, gamma, 50);
  const auto rep = tent_boundary_bound(f, gamma, eps, pts);
  EXPECT_TRUE(rep.ok());
  EXPECT_THROW(tent_boundary_bound(f, pi / 4, eps, pts), DomainError);
  EXPECT_TRUE(tent_boundary_bound(f, gamma, 1e-12, pts).ok());
}

// On the imaginary axis omega(iy) = (2/pi)(atan(2/y) - atan(1/y)), stationary at y = sqrt 2.
TEST(CriticalPoints, TwoGapSaddleOnTheAxis) {
  const auto f = field({{-inf, -2}, {-1, 1}, {2, inf}});
  const auto cps = critical_points(f);
  ASSERT_EQ(cps.size(), 1u);
  EXPECT_NEAR(std::abs(cps[0] - cplx(0.0, std::sqrt(2.0))), 0.0, 1e-12);
  EXPECT_NEAR(saddle_level(f), 2.0 / pi * (std::atan(std::sqrt(2.0)) - std::atan(1.0 / std::sqrt(2.0))), 1e-13);
  EXPECT_TRUE(critical_points(field({{-inf, -1}, {1, inf}})).empty());
  EXPECT_EQ(saddle_level(field({{-1, 1}})), 0.0);
}

TEST(CriticalPoints, GradientVanishesOnRandomUnions) {
  std::mt19937_64 rng(17);
  for (int c = 0; c < 30; ++c) {
    const HarmonicField f(fixtures::random_union(rng));
    for (cplx z : critical_points(f)) {
      EXPECT_GT(z.imag(), 0.0);
      EXPECT_LT(std::abs(f.dW(z)), 1e-10) << z;
    }
  }
}
