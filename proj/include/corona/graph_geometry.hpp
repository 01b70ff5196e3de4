#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "corona/common.hpp"

namespace corona {

// Closed x-interval; either end may be infinite.
struct XInterval {
  double lo;
  double hi;
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
  double length() const { return hi - lo; }
};

// Piecewise-linear graph x -> x + i A(x), anchored at A(x_0) = 0 for the first breakpoint
// (or A(0) = 0 when there are no breakpoints).
class LipschitzGraph {
 public:
  LipschitzGraph() : slopes_{0.0} {}

  LipschitzGraph(std::vector<double> breakpoints, std::vector<double> slopes)
      : breaks_(std::move(breakpoints)), slopes_(std::move(slopes)) {
    if (slopes_.size() != breaks_.size() + 1)
      throw ConfigError("graph: need exactly one more slope than breakpoints");
    for (std::size_t k = 1; k < breaks_.size(); ++k)
      if (!(breaks_[k] > breaks_[k - 1])) throw ConfigError("graph: breakpoints must ascend strictly");
    for (double s : slopes_)
      if (!std::isfinite(s)) throw ConfigError("graph: slopes must be finite");
    heights_.assign(breaks_.size(), 0.0);
    for (std::size_t k = 1; k < breaks_.size(); ++k)
      heights_[k] = heights_[k - 1] + slopes_[k] * (breaks_[k] - breaks_[k - 1]);
  }

  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<double>& slopes() const { return slopes_; }
  bool flat() const {
    return std::all_of(slopes_.begin(), slopes_.end(), [](double s) { return s == 0.0; });
  }

  double slope_bound() const {
    double m = 0.0;
    for (double s : slopes_) m = std::max(m, std::abs(s));
    return m;
  }
  double angle() const { return std::atan(slope_bound()); }

  // Index of the segment containing x (segment k spans [x_{k-1}, x_k]).
  std::size_t segment(double x) const {
    return static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), x) - breaks_.begin());
  }

  double height(double x) const {
    if (breaks_.empty()) return slopes_[0] * x;
    const std::size_t k = segment(x);
    if (k == 0) return slopes_[0] * (x - breaks_[0]);
    return heights_[k - 1] + slopes_[k] * (x - breaks_[k - 1]);
  }

  cplx point(double x) const { return {x, height(x)}; }

  bool on_graph(cplx z, double rel_tol = 1e-9) const {
    return std::abs(z - point(z.real())) <= rel_tol * (1.0 + std::abs(z));
  }

  // Split [lo, hi] at breakpoints into straight pieces.
  std::vector<XInterval> straight_pieces(XInterval iv) const {
    std::vector<XInterval> out;
    double a = iv.lo;
    for (double b : breaks_) {
      if (b <= a) continue;
      if (b >= iv.hi) break;
      out.push_back({a, b});
      a = b;
    }
    out.push_back({a, iv.hi});
    return out;
  }

  // Arc length of the graph over [lo, hi].
  double arc_length(double lo, double hi) const {
    if (hi <= lo) return 0.0;
    double s = 0.0;
    for (const auto& p : straight_pieces({lo, hi})) {
      const double m = slopes_[segment(0.5 * (p.lo + p.hi))];
      if (!p.bounded()) return inf;
      s += p.length() * std::sqrt(1.0 + m * m);
    }
    return s;
  }

  // x such that the arc length from x0 to x equals s (s may be negative).
  double advance_by_arclength(double x0, double s) const {
    double x = x0;
    double left = std::abs(s);
    const double dir = s >= 0 ? 1.0 : -1.0;
    while (left > 0.0) {
      const std::size_t k = segment(dir > 0 ? x : std::nextafter(x, -inf));
      const double m = slopes_[k];
      const double stretch = std::sqrt(1.0 + m * m);
      double edge = dir > 0 ? (k < breaks_.size() ? breaks_[k] : inf) : (k > 0 ? breaks_[k - 1] : -inf);
      const double avail = std::abs(edge - x) * stretch;
      if (avail >= left) return x + dir * left / stretch;
      left -= avail;
      x = edge;
    }
    return x;
  }

 private:
  std::vector<double> breaks_;
  std::vector<double> slopes_;
  std::vector<double> heights_;
};

struct BoundaryConfig {
  LipschitzGraph graph;
  std::vector<XInterval> e0;  // ascending, first unbounded left, last unbounded right
  std::vector<XInterval> gaps;
  std::vector<double> gap_angles;
  double eps0 = 0.0;

  static BoundaryConfig make(LipschitzGraph graph, std::vector<XInterval> e0, double eps0) {
    BoundaryConfig c;
    c.graph = std::move(graph);
    c.e0 = std::move(e0);
    c.eps0 = eps0;
    c.finish();
    return c;
  }

  // Derives gaps and gap angles and checks structural invariants.
  void finish() {
    if (e0.empty()) throw ConfigError("config: e0 must contain at least one interval");
    if (std::isfinite(e0.front().lo) || std::isfinite(e0.back().hi))
      throw ConfigError("config: first e0 interval must be unbounded left and last unbounded right");
    gaps.clear();
    gap_angles.clear();
    for (std::size_t k = 0; k < e0.size(); ++k) {
      if (!(e0[k].hi >= e0[k].lo)) throw ConfigError("config: e0 interval with hi < lo");
      if (k > 0) {
        if (!(e0[k].lo > e0[k - 1].hi)) throw ConfigError("config: e0 intervals must be disjoint and ascending");
        XInterval g{e0[k - 1].hi, e0[k].lo};
        const std::size_t seg = graph.segment(g.lo);
        if (graph.segment(std::nextafter(g.hi, -inf)) != seg)
          throw ConfigError("config: a gap crosses a graph breakpoint");
        gaps.push_back(g);
        gap_angles.push_back(std::atan(graph.slopes()[seg]));
      }
    }
  }

  bool in_e0(double x) const {
    return std::any_of(e0.begin(), e0.end(), [x](const XInterval& iv) { return x >= iv.lo && x <= iv.hi; });
  }

  // Extent of the bounded features (gap endpoints and bounded e0 pieces).
  std::pair<double, double> finite_extent() const {
    double lo = inf, hi = -inf;
    for (const auto& iv : e0) {
      for (double v : {iv.lo, iv.hi})
        if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) return {-1.0, 1.0};
    if (hi - lo < 1e-12) return {lo - 1.0, hi + 1.0};
    return {lo, hi};
  }
};

// Length of the part of the straight segment p0 + t u, t in [t0, t1], inside the closed disk |z - c| <= r.
inline double clipped_length(cplx p0, cplx u, double t0, double t1, cplx c, double r) {
  const cplx d = p0 - c;
  const double b = std::real(std::conj(u) * d);
  const double cc = std::norm(d) - r * r;
  const double disc = b * b - cc;
  if (disc <= 0.0) return 0.0;
  const double s = std::sqrt(disc);
  const double lo = std::max(t0, -b - s), hi = std::min(t1, -b + s);
  return std::max(0.0, hi - lo);
}

// Arc measure of the part of the graph over x-interval iv that lies in the ball.
inline double arc_in_ball(const LipschitzGraph& g, XInterval iv, cplx center, double r) {
  double total = 0.0;
  for (const auto& p : g.straight_pieces(iv)) {
    const double mid = std::isfinite(p.lo) ? (std::isfinite(p.hi) ? 0.5 * (p.lo + p.hi) : p.lo + 1.0) : p.hi - 1.0;
    const double m = g.slopes()[g.segment(mid)];
    const cplx u = cplx(1.0, m) / std::sqrt(1.0 + m * m);
    // Anchor at the piece point with x = clamp(center.x) to keep t finite.
    const double xa = std::clamp(center.real(), std::isfinite(p.lo) ? p.lo : -inf, std::isfinite(p.hi) ? p.hi : inf);
    const cplx anchor = g.point(xa);
    const double stretch = std::sqrt(1.0 + m * m);
    const double t0 = std::isfinite(p.lo) ? (p.lo - xa) * stretch : -inf;
    const double t1 = std::isfinite(p.hi) ? (p.hi - xa) * stretch : inf;
    total += clipped_length(anchor, u, t0, t1, center, r);
  }
  return total;
}

inline double arc_measure_in_ball(const BoundaryConfig& cfg, cplx center, double r) {
  if (!cfg.graph.on_graph(center)) throw DomainError("arc_measure_in_ball: center is not on the graph");
  if (!(r > 0.0)) throw DomainError("arc_measure_in_ball: radius must be positive");
  double total = 0.0;
  for (const auto& iv : cfg.e0) total += arc_in_ball(cfg.graph, iv, center, r);
  return total;
}

enum class DensityMode { ball, projection, interval };

struct DensitySample {
  double x;  // z = x + i A(x)
  double r;
};

struct DensityWitness {
  double x;
  double r;
  double ratio;
};

struct DensityReport {
  DensityMode mode;
  double inf_ratio = inf;
  DensityWitness worst{};
  std::vector<DensityWitness> samples;
};

// Lebesgue measure of the union of x-intervals within (lo, hi).
inline double projected_measure(const std::vector<XInterval>& set, double lo, double hi) {
  double s = 0.0;
  for (const auto& iv : set) s += std::max(0.0, std::min(hi, iv.hi) - std::max(lo, iv.lo));
  return s;
}

inline double density_ratio(const BoundaryConfig& cfg, DensityMode mode, double x, double r) {
  switch (mode) {
    case DensityMode::ball:
      return arc_measure_in_ball(cfg, cfg.graph.point(x), r) / r;
    case DensityMode::projection:
      return projected_measure(cfg.e0, x - r, x + r) / r;
    case DensityMode::interval: {
      const double lo = cfg.graph.advance_by_arclength(x, -r);
      const double hi = cfg.graph.advance_by_arclength(x, r);
      double s = 0.0;
      for (const auto& iv : cfg.e0) {
        const double a = std::max(lo, iv.lo), b = std::min(hi, iv.hi);
        if (b > a) s += cfg.graph.arc_length(a, b);
      }
      return s / r;
    }
  }
  return 0.0;
}

// Dyadic radii 2^k, k = -6..6, times the configuration diameter; centers at e0 endpoints and midpoints.
inline std::vector<DensitySample> default_density_plan(const BoundaryConfig& cfg) {
  const auto [lo, hi] = cfg.finite_extent();
  const double diam = hi - lo;
  std::vector<double> xs;
  for (const auto& iv : cfg.e0) {
    if (std::isfinite(iv.lo)) xs.push_back(iv.lo);
    if (std::isfinite(iv.hi)) xs.push_back(iv.hi);
    if (iv.bounded()) xs.push_back(0.5 * (iv.lo + iv.hi));
    else if (std::isfinite(iv.lo)) xs.push_back(iv.lo + 0.5 * diam);
    else if (std::isfinite(iv.hi)) xs.push_back(iv.hi - 0.5 * diam);
    else xs.push_back(0.0);
  }
  std::vector<DensitySample> plan;
  for (double x : xs)
    for (int k = -6; k <= 6; ++k) plan.push_back({x, std::ldexp(diam, k)});
  return plan;
}

inline DensityReport certify_homogeneity(const BoundaryConfig& cfg, DensityMode mode,
                                         const std::vector<DensitySample>& plan) {
  if (plan.empty()) throw DomainError("certify_homogeneity: empty sampling plan");
  DensityReport rep;
  rep.mode = mode;
  for (const auto& s : plan) {
    if (!cfg.in_e0(s.x)) throw DomainError("certify_homogeneity: sample center not in E0");
    const double q = density_ratio(cfg, mode, s.x, s.r);
    rep.samples.push_back({s.x, s.r, q});
    if (q < rep.inf_ratio) {
      rep.inf_ratio = q;
      rep.worst = {s.x, s.r, q};
    }
  }
  return rep;
}

struct DensityChain {
  double eps1, eps2, eps3;
};

inline DensityChain density_constant_chain(double eps0, double alpha) {
  if (!(eps0 > 0.0 && eps0 <= 0.5)) throw DomainError("density_constant_chain: need 0 < eps0 <= 1/2");
  if (!(alpha >= 0.0 && alpha < pi / 2)) throw DomainError("density_constant_chain: need 0 <= alpha < pi/2");
  const double c = std::cos(alpha);
  return {c * eps0, c * c * eps0, eps0 * c / (2.0 * std::numbers::e)};
}

struct Tent {
  cplx z1, z2;
  double gamma;

  bool contains(cplx z) const {
    if (z == z1 || z == z2) return false;
    const double a1 = std::arg((z - z1) / (z2 - z1));
    const double a2 = std::arg((z1 - z2) / (z - z2));
    return a1 > 0.0 && a1 < gamma && a2 > 0.0 && a2 < gamma;
  }
  cplx apex() const { return z1 + 0.5 * (z2 - z1) * cplx(1.0, std::tan(gamma)); }
  std::array<cplx, 3> triangle() const { return {z1, apex(), z2}; }
};

inline bool tent_contains(const Tent& t, cplx z) { return t.contains(z); }

struct Diamond {
  Tent upper, lower;
};

struct DiamondSet {
  double alpha_m;
  std::vector<Diamond> diamonds;
};

namespace detail {

inline double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

inline bool segments_cross(cplx p1, cplx p2, cplx q1, cplx q2) {
  const double d1 = cross(p2 - p1, q1 - p1), d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1), d4 = cross(q2 - q1, p2 - q1);
  return d1 * d2 < 0.0 && d3 * d4 < 0.0;
}

inline bool strictly_inside(const std::array<cplx, 3>& t, cplx z) {
  const double s0 = cross(t[1] - t[0], z - t[0]);
  const double s1 = cross(t[2] - t[1], z - t[1]);
  const double s2 = cross(t[0] - t[2], z - t[2]);
  return (s0 > 0 && s1 > 0 && s2 > 0) || (s0 < 0 && s1 < 0 && s2 < 0);
}

inline bool triangles_overlap(const std::array<cplx, 3>& a, const std::array<cplx, 3>& b) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (segments_cross(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])) return true;
  for (const auto& v : a)
    if (strictly_inside(b, v)) return true;
  for (const auto& v : b)
    if (strictly_inside(a, v)) return true;
  return false;
}

}  // namespace detail

inline DiamondSet build_diamonds(const BoundaryConfig& cfg) {
  if (cfg.gaps.empty()) throw DomainError("build_diamonds: no gaps");
  DiamondSet ds{(pi / 2 - cfg.graph.angle()) / 4.0, {}};
  for (const auto& g : cfg.gaps) {
    const cplx z1 = cfg.graph.point(g.lo), z2 = cfg.graph.point(g.hi);
    ds.diamonds.push_back({Tent{z1, z2, ds.alpha_m}, Tent{z2, z1, ds.alpha_m}});
  }
  for (std::size_t i = 0; i < ds.diamonds.size(); ++i)
    for (std::size_t j = i + 1; j < ds.diamonds.size(); ++j)
      for (const Tent* a : {&ds.diamonds[i].upper, &ds.diamonds[i].lower})
        for (const Tent* b : {&ds.diamonds[j].upper, &ds.diamonds[j].lower})
          if (detail::triangles_overlap(a->triangle(), b->triangle()))
            throw ConsistencyError("build_diamonds: diamonds " + std::to_string(i) + " and " +
                                   std::to_string(j) + " overlap");
  return ds;
}

// Transfinite-diameter estimate of a bounded union of graph x-intervals.
// Fekete points are found by greedy insertion then local exchange on a cosine-clustered candidate grid;
// the leading (log n + c)/n defect of d_n is removed using d_n and d_{n/2}.
struct CapacityEstimate {
  double value;      // extrapolated
  double fekete;     // d_n at the requested refinement
  double fekete_half;
};

namespace detail {

inline double fekete_diameter(const std::vector<cplx>& cand, int n) {
  const std::size_t m = cand.size();
  std::vector<double> pot(m, 0.0);  // sum over picked j of log|c - z_j|
  std::vector<char> taken(m, 0);
  std::vector<std::size_t> pick;
  auto add = [&](std::size_t k, double sgn) {
    for (std::size_t i = 0; i < m; ++i)
      if (i != k) pot[i] += sgn * std::log(std::abs(cand[i] - cand[k]));
    taken[k] = sgn > 0;
  };
  auto best_free = [&]() {
    std::size_t arg = 0;
    double v = -inf;
    for (std::size_t i = 0; i < m; ++i)
      if (!taken[i] && pot[i] > v) v = pot[i], arg = i;
    return arg;
  };
  // Start from the two most distant candidates.
  std::size_t a = 0, b = 0;
  double far = -1.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (std::abs(cand[i] - cand[j]) > far) far = std::abs(cand[i] - cand[j]), a = i, b = j;
  pick = {a, b};
  add(a, 1.0);
  add(b, 1.0);
  while (static_cast<int>(pick.size()) < n) {
    const std::size_t k = best_free();
    pick.push_back(k);
    add(k, 1.0);
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool moved = false;
    for (auto& k : pick) {
      add(k, -1.0);
      const std::size_t arg = best_free();
      if (arg != k && pot[arg] > pot[k] + 1e-13) moved = true, k = arg;
      add(k, 1.0);
    }
    if (!moved) break;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pick.size(); ++i)
    for (std::size_t j = i + 1; j < pick.size(); ++j) s += std::log(std::abs(cand[pick[i]] - cand[pick[j]]));
  return std::exp(2.0 * s / (double(n) * (n - 1)));
}

}  // namespace detail

inline CapacityEstimate estimate_capacity(const LipschitzGraph& g, const std::vector<XInterval>& set,
                                          int refinement) {
  if (set.empty()) throw DomainError("estimate_capacity: empty set");
  if (refinement < 8) throw DomainError("estimate_capacity: refinement must be at least 8");
  double total = 0.0;
  for (const auto& iv : set) {
    if (!iv.bounded()) throw DomainError("estimate_capacity: unbounded set");
    total += iv.length();
  }
  std::vector<cplx> cand;
  const int per = 96 * refinement;
  for (const auto& iv : set) {
    const int k = std::max(16, int(per * iv.length() / total));
    for (int i = 0; i <= k; ++i) {
      const double t = 0.5 * (1.0 - std::cos(pi * i / k));
      cand.push_back(g.point(iv.lo + t * iv.length()));
    }
  }
  const double dn = detail::fekete_diameter(cand, refinement);
  const double dh = detail::fekete_diameter(cand, refinement / 2);
  const double n = refinement;
  const double c = n * (std::log(dh) - std::log(dn)) - std::log(n) + 2.0 * std::log(2.0);
  const double lc = std::log(dn) - (std::log(n) + c) / n;
  return {std::min(dn, std::exp(lc)), dn, dh};
}

}  // namespace corona
