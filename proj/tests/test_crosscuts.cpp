#include <gtest/gtest.h>

#include <random>

#include "corona/crosscuts.hpp"
#include "support.hpp"

using namespace corona;

namespace {

HarmonicField one_gap(Side side = Side::upper) { return HarmonicField(IntervalUnion({{-inf, -1}, {1, inf}}), side); }

}  // namespace

TEST(Betas, FormulaAndRatio) {
  const auto b = compute_betas(0.3, pi / 8);
  EXPECT_NEAR(b.beta1, 0.9875, 1e-15);
  EXPECT_NEAR(b.beta2, 0.99375, 1e-15);
  EXPECT_NEAR((1 - b.beta1) / (1 - b.beta2), 2.0, 1e-12);
  EXPECT_FALSE(b.degenerate);
  EXPECT_TRUE(compute_betas(1e-7, 0.1).degenerate);
  EXPECT_THROW(compute_betas(0.6, 0.1), DomainError);
  EXPECT_THROW(compute_betas(0.3, pi / 4), DomainError);
  const auto p = BetaPair::from_beta1(0.35);
  EXPECT_NEAR(p.beta2, 0.675, 1e-15);
}

// Level sets of one subtended angle are circular arcs through the gap endpoints.
TEST(Trace, SingleGapIsCircularArc) {
  for (double beta : {0.3, 0.5, 0.9, 0.99}) {
    const auto f = one_gap();
    const auto c = trace_level_curve(f, 0, beta, 1e-3);
    const cplx center(0.0, 1.0 / std::tan(beta * pi));
    const double R = 1.0 / std::sin(beta * pi);
    for (std::size_t k = 1; k + 1 < c.points.size(); ++k) {
      EXPECT_NEAR(std::abs(c.points[k] - center), R, 1e-8);
      EXPECT_NEAR(f.omega(Which::gaps, c.points[k]), beta, 1e-10);
    }
    EXPECT_EQ(c.points.front(), cplx(-1.0));
    EXPECT_EQ(c.points.back(), cplx(1.0));
  }
}

TEST(Trace, HalfLevelPassesThroughRightAnglePoint) {
  const auto c = trace_level_curve(one_gap(), 0, 0.5, 1e-3);
  double best = inf;
  for (const auto& p : c.points) best = std::min(best, std::abs(p - I));
  EXPECT_LT(best, 1e-3);
}

TEST(Trace, LowerSideMirrors) {
  const auto up = trace_level_curve(one_gap(), 0, 0.8, 1e-2);
  const auto lo = trace_level_curve(one_gap(Side::lower), 0, 0.8, 1e-2);
  ASSERT_EQ(up.points.size(), lo.points.size());
  for (std::size_t k = 0; k < up.points.size(); ++k) EXPECT_NEAR(std::abs(up.points[k] - std::conj(lo.points[k])), 0.0, 1e-12);
}

TEST(Trace, Errors) {
  const auto f = one_gap();
  EXPECT_THROW(trace_level_curve(f, 1, 0.5, 1e-2), DomainError);
  EXPECT_THROW(trace_level_curve(f, 0, 1.0, 1e-2), DomainError);
  EXPECT_THROW(trace_level_curve(f, 0, 0.5, 0.0), DomainError);
}

TEST(TangentBound, CircleHalfAngleAtEndpoints) {
  const double beta = 0.95;
  const auto c = trace_level_curve(one_gap(), 0, beta, 1e-4);
  const auto rep = tangent_argument_bound(c, pi);
  EXPECT_NEAR(rep.max_abs_arg, (1 - beta) * pi, 2e-3);
  const auto flat = trace_level_curve(one_gap(), 0, 1 - 1e-4, 1e-3);
  EXPECT_LT(tangent_argument_bound(flat, pi).max_abs_arg, 1e-3);
}

TEST(Carleson, FarBoxIsZeroAndGapBoxBounded) {
  const double am = pi / 8, beta = compute_betas(0.4, am).beta1;
  const auto c = trace_level_curve(one_gap(), 0, beta, 2e-3);
  EXPECT_EQ(carleson_constant({c}, {{10.0, 11.0}}).constant, 0.0);
  EXPECT_LE(carleson_constant({c}, {{-1.0, 1.0}}).constant, 1.0 / std::cos(2 * am / 3) * 1.01);
  EXPECT_THROW(carleson_constant({c}, {}), DomainError);
}

// The curve is a graph over the gap, so no box can beat the secant of its steepest chord.
TEST(Carleson, NestedBoxesBoundedBySteepestChord) {
  const auto c = trace_level_curve(one_gap(), 0, 0.97, 2e-3);
  const double cap = 1.0 / std::cos(tangent_argument_bound(c, pi).max_abs_arg);
  for (Box b{-1.0, 1.0}; b.hi - b.lo > 1e-3; b.hi = 0.5 * (b.lo + b.hi))
    EXPECT_LE(carleson_constant({c}, {b}).constant, cap + 1e-12);
  EXPECT_LE(carleson_constant({c}, dyadic_boxes(-1.0, 1.0, 2.0)).constant, cap + 1e-12);
}

TEST(Trace, RefinementConsistency) {
  const HarmonicField f(IntervalUnion({{-inf, -2}, {-1, 1}, {2, inf}}));
  for (std::size_t g = 0; g < 2; ++g) {
    const double step = 1e-2;
    const auto a = trace_level_curve(f, g, 0.9, step), b = trace_level_curve(f, g, 0.9, step / 4);
    EXPECT_NEAR(a.arclength() / b.arclength(), 1.0, 10 * step);
  }
}

// Random configurations: delta_1 under the alpha_M/3 tents, slopes and
// box ratios within the stated bounds, delta_2 nested closer to the gap.
TEST(Crosscuts, RandomDenjoyCertificates) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto cfg = fixtures::random_denjoy(rng, 3);
    const double am = build_diamonds(cfg).alpha_m;
    const auto betas = compute_betas(cfg.eps0, am);
    const auto f = HarmonicField::from_config(cfg);
    std::vector<LevelCurve> curves;
    for (std::size_t g = 0; g < cfg.gaps.size(); ++g) {
      const double step = 1e-3 * cfg.gaps[g].length();
      const auto d1 = trace_level_curve(f, g, betas.beta1, step);
      const auto d2 = trace_level_curve(f, g, betas.beta2, step);
      EXPECT_EQ(tent_violations(d1, cfg.gaps[g], am / 3), 0u);
      EXPECT_EQ(tent_violations(d2, cfg.gaps[g], am / 3), 0u);
      EXPECT_EQ(tangent_argument_bound(d1, 2 * am / 3, 1e-3).violations, 0u);
      // nesting on the midpoint vertical
      const double mid = 0.5 * (cfg.gaps[g].lo + cfg.gaps[g].hi);
      auto height = [&](const LevelCurve& c) {
        for (std::size_t k = 0; k + 1 < c.points.size(); ++k)
          if ((c.points[k].real() - mid) * (c.points[k + 1].real() - mid) <= 0) return c.points[k].imag();
        return -1.0;
      };
      EXPECT_GT(height(d1), height(d2));
      curves.push_back(d1);
    }
    const auto [lo, hi] = cfg.finite_extent();
    const auto rep = carleson_constant(curves, dyadic_boxes(lo, hi, hi - lo));
    EXPECT_LE(rep.constant, 1.0 / std::cos(2 * am / 3) * 1.01);
  }
}
