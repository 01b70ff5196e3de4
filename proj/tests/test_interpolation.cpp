#include <gtest/gtest.h>

#include <random>

#include "corona/interpolation.hpp"

using namespace corona;

namespace {

HarmonicField two_gap_field() {
  return HarmonicField(IntervalUnion({{-inf, -2.0}, {-1.0, 1.0}, {2.0, inf}}));
}

std::vector<cplx> random_disk(std::mt19937& rng, int n, double rmax) {
  std::uniform_real_distribution<double> r(0.0, rmax), a(0.0, 2 * pi);
  std::vector<cplx> out;
  for (int k = 0; k < n; ++k) out.push_back(std::polar(std::sqrt(r(rng) / rmax) * rmax, a(rng)));
  return out;
}

}  // namespace

TEST(Interpolation, CarlesonProductOfTwoPoints) {
  EXPECT_NEAR(carleson_product({I, 2.0 * I}), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(carleson_product({I, cplx(1.0, 0.0)}), DomainError);
}

TEST(Interpolation, TwoPointPickNormMatchesMobiusOracle) {
  // Minimal s with a disk automorphism carrying 0 -> 1/s and 1/2 -> -1/s: the pseudo-hyperbolic
  // distance 2a/(1+a^2) between +-a must not exceed that of 0 and 1/2.
  double lo = 1.0, hi = 100.0;
  for (int it = 0; it < 200; ++it) {
    const double s = 0.5 * (lo + hi), a = 1.0 / s;
    (2 * a / (1 + a * a) <= 0.5 ? hi : lo) = s;
  }
  const double s = PickInterpolant::minimal_norm({0.0, 0.5}, {1.0, -1.0});
  EXPECT_NEAR(s, hi, 1e-5 * hi);
  EXPECT_NEAR(s, 2.0 + std::sqrt(3.0), 1e-5);
}

TEST(Interpolation, PickInterpolantHitsTargetsWithinBound) {
  std::mt19937 rng(7);
  const auto nodes = random_disk(rng, 8, 0.9);
  std::vector<cplx> targets;
  for (std::size_t k = 0; k < nodes.size(); ++k) targets.push_back(std::polar(1.0, 0.7 * double(k)));
  const PickInterpolant f(nodes, targets);
  for (std::size_t k = 0; k < nodes.size(); ++k) EXPECT_NEAR(std::abs(f(nodes[k]) - targets[k]), 0.0, 1e-8);
  EXPECT_NEAR(f.bound(), 1.001 * f.minimal_norm(), 1e-12);
  for (cplx l : random_disk(rng, 2000, 0.999)) EXPECT_LE(std::abs(f(l)), f.bound() * (1 + 1e-9));
}

TEST(Interpolation, ConstantDataGivesConstant) {
  const PickInterpolant f({0.1, -0.3 * I, 0.5}, {0.4, 0.4, 0.4});
  EXPECT_NEAR(f.minimal_norm(), 0.4, 1e-6);
  EXPECT_NEAR(std::abs(f(0.8 * I) - 0.4), 0.0, 1e-3);
}

TEST(Interpolation, InfeasiblePickProblemIsReported) {
  EXPECT_THROW(PickInterpolant({0.0, 1e-7}, {1.0, -1.0}), ConvergenceError);
  EXPECT_THROW(PickInterpolant({0.0, 1.0}, {1.0, 1.0}), DomainError);
}

TEST(Interpolation, LevelPointInvertsW) {
  const auto f = two_gap_field();
  const cplx target(0.6, -0.4);
  const cplx z = level_point(f, target, cplx(1.5, 0.3));
  EXPECT_NEAR(std::abs(f.W(z) - target), 0.0, 1e-12);
  EXPECT_GT(z.imag(), 0.0);
}

TEST(Interpolation, GenerationSplitSeparatesClasses) {
  std::vector<cplx> pts;
  for (int k = 0; k < 40; ++k) pts.push_back(cplx(0.3 * k, 1.0));
  const auto s = generation_split(pts, 8.0);
  std::size_t total = 0;
  for (const auto& c : s.classes) {
    total += c.size();
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = a + 1; b < c.size(); ++b) EXPECT_GE(std::abs(pts[c[a]] - pts[c[b]]), 8.0);
  }
  EXPECT_EQ(total, pts.size());
  EXPECT_EQ(s.classes.size(), 27u);
  EXPECT_EQ(s.p, 5);
}

class TwoGapSequence : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    field_ = std::make_unique<HarmonicField>(two_gap_field());
    betas_ = BetaPair::from_beta1(0.35);
    B_ = separation_A(0.35);
    ExtractionOptions opt;
    opt.y_floor = 1e-3;
    seq_ = std::make_unique<SeparatedSequence>(extract_sequence(*field_, betas_, B_, opt));
  }
  static void TearDownTestSuite() {
    seq_.reset();
    field_.reset();
  }
  static inline std::unique_ptr<HarmonicField> field_;
  static inline BetaPair betas_{};
  static inline double B_ = 0.0;
  static inline std::unique_ptr<SeparatedSequence> seq_;
};

TEST_F(TwoGapSequence, SeparatedAndOnTheCrosscut) {
  ASSERT_GT(seq_->size(), 20u);
  for (cplx z : seq_->points) EXPECT_NEAR(field_->omega(Which::gaps, z), betas_.beta1, 1e-10);
  for (std::size_t i = 0; i < seq_->size(); ++i)
    for (std::size_t j = i + 1; j < seq_->size(); ++j) {
      const cplx a = seq_->points[i], b = seq_->points[j];
      EXPECT_GE(std::abs(a - b) / std::max(a.imag(), b.imag()), B_ * (1 - 1e-12));
    }
  EXPECT_GT(seq_->beta_hi, betas_.beta1);
  EXPECT_LT(seq_->beta_hi, betas_.beta2);
}

TEST_F(TwoGapSequence, CoversTheBandAndCellsSitInBalls) {
  const auto band = band_region(*field_, betas_, B_);
  std::vector<cplx> samples;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // band points above the truncation height, by rejection
  while (samples.size() < 400) {
    const cplx z(-2.0 + 4.0 * u(rng), std::pow(10.0, -2.5 + 3.0 * u(rng)));
    if (band.contains(z) && z.imag() > 3e-3) samples.push_back(z);
  }
  const auto rep = check_covering(*field_, *seq_, samples);
  EXPECT_EQ(rep.violations, 0u) << "worst " << rep.worst;
  EXPECT_LE(rep.cell_ball_worst, 3.0);
  const auto h = harnack_check(band, samples);
  EXPECT_TRUE(h.ok()) << h.min_margin;
}

TEST_F(TwoGapSequence, VaropoulosFamilyOnTheHalfPlane) {
  const auto split = generation_split(seq_->points, 8.0);
  const InterpFamily fam(seq_->points, split, cayley_chart());
  std::vector<cplx> samples;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 300; ++k) samples.push_back(cplx(-3.0 + 6.0 * u(rng), std::pow(10.0, -3.0 + 3.5 * u(rng))));
  for (cplx z : seq_->points) samples.push_back(z * cplx(1.0, 0.0) + cplx(0.0, 0.1 * z.imag()));
  const auto rep = verify_family(fam, samples);
  EXPECT_LE(rep.node_error, 1e-8);
  EXPECT_LE(rep.orthogonality, 1e-8);
  EXPECT_LE(rep.sup_excess, 1e-6);
  EXPECT_LE(rep.class_sum_excess, 1e-6);
  EXPECT_LE(rep.sum_excess, 0.0);
  const auto cells = schwarz_cell_bound(fam, *field_, *seq_);
  EXPECT_EQ(cells.violations, 0u) << "min |h_n| " << cells.min_modulus;
}

TEST(Interpolation, ExtendedChartMapsIntoTheDisk) {
  const auto f = two_gap_field();
  const ExtendedChart chart(f, 0.27);
  EXPECT_TRUE(chart.contains(cplx(0.0, 1.0)));
  EXPECT_TRUE(chart.contains(cplx(1.5, 0.0)));
  EXPECT_TRUE(chart.contains(cplx(1.5, -0.05)));
  EXPECT_FALSE(chart.contains(cplx(0.0, -0.05)));
  EXPECT_FALSE(chart.contains(cplx(1.5, -5.0)));
  for (cplx z : {cplx(0.0, 1.0), cplx(1.5, 0.2), cplx(1.5, 0.0), cplx(1.5, -0.05), cplx(-1.5, -0.1), cplx(10.0, 3.0)})
    EXPECT_LT(std::abs(chart(z)), 1.0);
  // boundary points of E map to the circle; continuity across a gap
  EXPECT_NEAR(std::abs(chart(cplx(0.0, 1e-9))), 1.0, 1e-6);
  EXPECT_NEAR(std::abs(chart(cplx(1.5, 1e-6)) - chart(cplx(1.5, -1e-6))), 0.0, 1e-5);
  // the true beta1 lens lies inside the polygon
  auto lower = trace_level_curve(f, 1, 0.35, 1e-3);
  for (cplx z : lower.points) {
    if (z.imag() > 0.0) {
      EXPECT_TRUE(chart.contains(std::conj(z))) << z;
    }
  }
}
