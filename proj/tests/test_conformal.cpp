#include <gtest/gtest.h>

#include <random>

#include "corona/conformal.hpp"

using namespace corona;

namespace {

LipschitzGraph wedge(double m) { return LipschitzGraph({0.0}, {-m, m}); }

LipschitzGraph zigzag() { return LipschitzGraph({-2.0, -0.5, 1.0, 2.5}, {0.3, -0.7, 0.9, -0.2, 0.1}); }

std::vector<cplx> half_plane_grid(Side side) {
  std::vector<cplx> out;
  const double s = side == Side::upper ? 1.0 : -1.0;
  for (double x = -6.0; x <= 6.0; x += 0.75)
    for (double y : {0.01, 0.1, 0.5, 1.0, 3.0}) out.push_back(cplx(x, s * y));
  return out;
}

}  // namespace

TEST(BuildMap, FlatGraphIsIdentity) {
  const auto m = build_map(LipschitzGraph{}, Side::upper);
  EXPECT_EQ(m.kind(), MapKind::identity);
  for (cplx w : half_plane_grid(Side::upper)) {
    EXPECT_EQ(m.forward(w), w);
    EXPECT_EQ(m.derivative(w), cplx(1.0));
  }
  EXPECT_THROW(m.forward(cplx(0, -1)), DomainError);
}

TEST(BuildMap, WedgeMatchesPowerMap) {
  for (double slope : {0.2, 0.5, 1.0}) {
    for (Side side : {Side::upper, Side::lower}) {
      const auto m = build_map(wedge(slope), side);
      const double b = (side == Side::upper ? -2.0 : 2.0) * std::atan(slope) / pi;
      for (cplx w : half_plane_grid(side)) {
        // closed form for the (conjugated) wedge: A w^(1+b)/(1+b), A along the last edge
        cplx expect;
        if (side == Side::upper) {
          expect = std::polar(1.0, std::atan(slope)) * std::pow(w, 1 + b) / (1 + b);
        } else {
          const cplx u = std::conj(w);
          expect = std::conj(std::polar(1.0, -std::atan(slope)) * std::pow(u, 1 + b) / (1 + b));
        }
        EXPECT_NEAR(std::abs(m.forward(w) - expect), 0.0, 1e-6) << w;
      }
    }
  }
}

TEST(BuildMap, RoundTripAndRegion) {
  for (Side side : {Side::upper, Side::lower}) {
    const auto m = build_map(zigzag(), side);
    EXPECT_LE(m.polyline()->diagnostics().max_residual, 1e-6);
    for (cplx w : half_plane_grid(side)) {
      const cplx z = m.forward(w);
      EXPECT_TRUE(m.in_region(z));
      EXPECT_NEAR(std::abs(m.inverse(z) - w), 0.0, 1e-8) << w;
    }
  }
}

TEST(BuildMap, DerivativeArgumentBoundedByLipschitzAngle) {
  const auto g = zigzag();
  const auto m = build_map(g, Side::upper);
  EXPECT_LE(max_derivative_argument(m, half_plane_grid(Side::upper)), g.angle() + 1e-6);
}

TEST(BuildMap, BoundaryCorrespondenceMonotone) {
  const auto g = zigzag();
  const auto m = build_map(g, Side::upper);
  double prev = -inf;
  for (double x = -5.0; x <= 5.0; x += 0.125) {
    const double w = m.boundary_preimage(x);
    EXPECT_GT(w, prev);
    EXPECT_NEAR(std::abs(m.forward(cplx(w, 0.0)) - g.point(x)), 0.0, 1e-9);
    prev = w;
  }
}

TEST(BuildMap, TooManyBreakpoints) {
  std::vector<double> br(9), sl(10, 0.1);
  for (int k = 0; k < 9; ++k) br[k] = k;
  EXPECT_THROW(build_map(LipschitzGraph(br, sl), Side::upper), ConfigError);
}

TEST(Reflection, IdentityBaseExtendsAsIdentity) {
  const auto cfg = BoundaryConfig::make(LipschitzGraph{}, {{-inf, -1}, {1, inf}}, 0.4);
  const auto ext = extend_by_reflection(build_map(cfg.graph, Side::upper), cfg);
  for (cplx z : {cplx(0.0, -0.1), cplx(0.5, -0.05), cplx(0.0, 0.7)}) {
    EXPECT_NEAR(std::abs(ext.forward(z) - z), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(ext.inverse(z) - z), 0.0, 1e-15);
  }
  EXPECT_THROW(ext.forward(cplx(3.0, -0.1)), DomainError);
  EXPECT_THROW(ext.inverse(cplx(0.0, -0.9)), DomainError);
}

TEST(Reflection, ContinuousAcrossGapAndSchwarzIdentity) {
  const auto cfg = BoundaryConfig::make(wedge(0.5), {{-inf, -2}, {-1, 1}, {2, inf}}, 0.3);
  const auto base = build_map(cfg.graph, Side::upper);
  const auto ext = extend_by_reflection(base, cfg);
  for (std::size_t j = 0; j < ext.gap_count(); ++j) {
    const auto I = ext.preimage_gap(j);
    for (int k = 1; k < 10; ++k) {
      const double x = I.lo + (I.hi - I.lo) * k / 10.0;
      EXPECT_NEAR(std::abs(ext.forward(cplx(x, 1e-10)) - ext.forward(cplx(x, -1e-10))), 0.0, 1e-9);
      const cplx w(x, -0.02 * (I.hi - I.lo));
      EXPECT_NEAR(std::abs(ext.forward(w) - ext.reflect_across(j, base.forward(std::conj(w)))), 0.0, 1e-15);
      EXPECT_NEAR(std::abs(ext.inverse(ext.forward(w)) - w), 0.0, 1e-8);
    }
  }
}

TEST(DensityPreservation, IdentityAndFullGraph) {
  const auto cfg = BoundaryConfig::make(LipschitzGraph{}, {{-inf, 0}, {1, 3}, {4, inf}}, 0.3);
  const auto rep = check_density_preservation(build_map(cfg.graph, Side::upper), cfg);
  EXPECT_NEAR(rep.eps, certify_homogeneity(cfg, DensityMode::projection, default_density_plan(cfg)).inf_ratio, 1e-15);
  const auto full = BoundaryConfig::make(zigzag(), {{-inf, inf}}, 0.5);
  EXPECT_NEAR(check_density_preservation(build_map(full.graph, Side::upper), full).eps, 2.0, 1e-12);
}

TEST(DensityPreservation, WedgeSweepPositive) {
  for (double slope : {0.1, 0.3, 0.6}) {
    const auto cfg = BoundaryConfig::make(wedge(slope), {{-inf, -2}, {-1, 1}, {2, inf}}, 0.3);
    const auto rep = check_density_preservation(build_map(cfg.graph, Side::upper), cfg);
    EXPECT_GT(rep.eps, 0.0);
    EXPECT_LE(rep.eps, 2.0);
  }
}

TEST(TentMapping, IdentityAndWedge) {
  const auto flat = BoundaryConfig::make(LipschitzGraph{}, {{-inf, -2}, {-1, 1}, {2, inf}}, 0.3);
  EXPECT_EQ(check_tent_mapping(build_map(flat.graph, Side::upper), flat, pi / 16, 500).violations, 0u);
  const auto cfg = BoundaryConfig::make(wedge(0.5), {{-inf, -2}, {-1, 1}, {2, inf}}, 0.3);
  const auto rep = check_tent_mapping(build_map(cfg.graph, Side::upper), cfg, pi / 16, 5000);
  EXPECT_GE(rep.samples, 10000u);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_THROW(check_tent_mapping(build_map(cfg.graph, Side::upper), cfg, pi / 10, 10), DomainError);
}
