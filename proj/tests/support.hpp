#pragma once

#include <random>
#include <vector>

#include "corona/graph_geometry.hpp"
#include "corona/harmonic.hpp"

namespace corona::fixtures {

// Flat-graph union with 1..max_gaps bounded gaps; eps0 is half the sampled projection density,
// i.e. the fraction of every centred window that E0 fills.
inline BoundaryConfig random_denjoy(std::mt19937_64& rng, int max_gaps = 4) {
  std::uniform_int_distribution<int> ng(1, max_gaps);
  std::uniform_real_distribution<double> len(0.2, 2.0);
  const int n = ng(rng);
  std::vector<XInterval> e0{{-inf, 0.0}};
  double x = 0.0;
  for (int k = 0; k < n; ++k) {
    const double a = x + len(rng);
    x = a + len(rng);
    e0.push_back({a, x});
  }
  e0.back().hi = inf;
  BoundaryConfig c = BoundaryConfig::make(LipschitzGraph{}, e0, 0.5);
  auto plan = default_density_plan(c);
  for (const auto& iv : c.e0)
    for (int j = 0; j <= 16; ++j) {
      const double lo = std::isfinite(iv.lo) ? iv.lo : iv.hi - 4.0, hi = std::isfinite(iv.hi) ? iv.hi : iv.lo + 4.0;
      const double xc = lo + (hi - lo) * j / 16.0;
      for (int k = -40; k <= 40; ++k) plan.push_back({xc, std::pow(2.0, k / 4.0)});
    }
  c.eps0 = 0.5 * certify_homogeneity(c, DensityMode::projection, plan).inf_ratio;
  return c;
}

// Random union of 1..5 components; ends may be unbounded.
inline IntervalUnion random_union(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nc(1, 5);
  std::uniform_real_distribution<double> len(0.05, 2.0), coin(0.0, 1.0);
  const int n = nc(rng);
  std::vector<XInterval> parts;
  double x = -3.0 + len(rng);
  for (int k = 0; k < n; ++k) {
    const double a = x, b = x + len(rng);
    parts.push_back({a, b});
    x = b + len(rng);
  }
  if (coin(rng) < 0.4) parts.front().lo = -inf;
  if (coin(rng) < 0.4) parts.back().hi = inf;
  return IntervalUnion(parts);
}

}  // namespace corona::fixtures
