#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "corona/common.hpp"
#include "corona/graph_geometry.hpp"
#include "corona/harmonic.hpp"

namespace corona {

struct BetaPair {
  double beta1;
  double beta2;
  bool degenerate = false;  // deficits below 1e-6: betas indistinguishable from 1 in practice

  // beta2 at half the deficit of beta1.
  static BetaPair from_beta1(double beta1) {
    if (!(beta1 > 0 && beta1 < 1)) throw DomainError("BetaPair: need 0 < beta1 < 1");
    return {beta1, 1.0 - 0.5 * (1.0 - beta1), (1.0 - beta1) < 1e-6};
  }
};

inline BetaPair compute_betas(double eps, double alpha_m) {
  if (!(eps > 0 && eps <= 0.5)) throw DomainError("compute_betas: need 0 < eps <= 1/2");
  if (!(alpha_m > 0 && alpha_m < pi / 4)) throw DomainError("compute_betas: need 0 < alpha_M < pi/4");
  const double deficit = eps * alpha_m / (3 * pi);
  return {1.0 - deficit, 1.0 - deficit / 2, deficit < 1e-6};
}

struct LevelCurve {
  std::size_t gap_index;
  double level;
  std::vector<cplx> points;  // from the left gap endpoint to the right one
  Side side = Side::upper;

  double arclength() const {
    double s = 0.0;
    for (std::size_t k = 1; k < points.size(); ++k) s += std::abs(points[k] - points[k - 1]);
    return s;
  }
};

namespace detail {

// Solves omega(gaps) = level along the line z0 + s d by Newton with bisection safeguard.
inline cplx correct_onto_level(const HarmonicField& f, double level, cplx z0, cplx d, double s_max) {
  auto g = [&](double s) { return f.omega(Which::gaps, z0 + s * d) - level; };
  auto dg = [&](double s) {
    const auto [wx, wy] = f.grad_e(z0 + s * d);
    return -(wx * d.real() + wy * d.imag());
  };
  double s = 0.0;
  for (int it = 0; it < 40; ++it) {
    const double v = g(s);
    if (std::abs(v) <= 1e-13) return z0 + s * d;
    const double ds = v / dg(s);
    s -= std::clamp(ds, -s_max, s_max);
  }
  // Fallback: bracket and bisect.
  double a = -s_max, b = s_max;
  if (g(a) * g(b) > 0) throw ConvergenceError("trace_level_curve: corrector did not converge");
  for (int it = 0; it < 200 && b - a > 1e-15 * (1 + std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    (g(a) * g(m) <= 0 ? b : a) = m;
  }
  return z0 + 0.5 * (a + b) * d;
}

inline bool proper_cross(cplx p1, cplx p2, cplx q1, cplx q2) { return detail::segments_cross(p1, p2, q1, q2); }

}  // namespace detail

// Predictor-corrector trace of {omega(., gaps) = level} over one gap, seeded on the gap's midpoint vertical.
inline LevelCurve trace_level_curve(const HarmonicField& f, std::size_t gap_index, double level, double step) {
  if (gap_index >= f.gaps().size()) throw DomainError("trace_level_curve: no such gap");
  const XInterval gap = f.gaps()[gap_index];
  if (!gap.bounded()) throw DomainError("trace_level_curve: gap must be bounded");
  if (!(level > 0 && level < 1)) throw DomainError("trace_level_curve: level must lie in (0,1)");
  if (!(step > 0)) throw DomainError("trace_level_curve: step must be positive");
  const double sgn = f.side() == Side::upper ? 1.0 : -1.0;
  const double mid = 0.5 * (gap.lo + gap.hi), half = 0.5 * (gap.hi - gap.lo);

  // Seed: omega decreases with height on the midpoint vertical.
  double ylo = 1e-12 * half, yhi = half;
  auto w = [&](double y) { return f.omega(Which::gaps, cplx(mid, sgn * y)); };
  while (w(yhi) > level) {
    ylo = yhi;
    yhi *= 2;
    if (yhi > 1e8 * half) throw ConvergenceError("trace_level_curve: could not bracket the seed");
  }
  for (int it = 0; it < 200 && yhi - ylo > 1e-15 * yhi; ++it) {
    const double ym = 0.5 * (ylo + yhi);
    (w(ym) > level ? ylo : yhi) = ym;
  }
  const cplx seed{mid, sgn * 0.5 * (ylo + yhi)};

  auto march = [&](double dir, double endpoint) {
    std::vector<cplx> pts;
    cplx z = seed;
    cplx prev(dir, 0.0);
    const std::size_t cap = static_cast<std::size_t>(50 * (gap.hi - gap.lo + std::abs(seed.imag())) / step) + 1000;
    while (std::abs(z - cplx(endpoint)) >= step) {
      const auto [wx, wy] = f.grad_e(z);
      // grad of omega(gaps) is minus grad of omega(e_set); tangent is perpendicular.
      cplx t = cplx(wy, -wx);
      t /= std::abs(t);
      if (std::real(t * std::conj(prev)) < 0) t = -t;
      prev = t;
      const cplx pred = z + step * t;
      cplx n = cplx(wx, wy) / std::hypot(wx, wy);
      const cplx next = detail::correct_onto_level(f, level, pred, n, 0.5 * step);
      if (!f.in_open_half_plane(next)) break;
      pts.push_back(next);
      z = next;
      if (pts.size() > cap) throw ConvergenceError("trace_level_curve: march did not reach the gap endpoint");
    }
    return pts;
  };
  auto left = march(-1.0, gap.lo);
  auto right = march(1.0, gap.hi);

  LevelCurve c{gap_index, level, {}, f.side()};
  c.points.push_back(cplx(gap.lo));
  for (auto it = left.rbegin(); it != left.rend(); ++it) c.points.push_back(*it);
  c.points.push_back(seed);
  for (const auto& p : right) c.points.push_back(p);
  c.points.push_back(cplx(gap.hi));

  // Simplicity check restricted to nearby segments (global checks are quadratic).
  const auto& P = c.points;
  for (std::size_t i = 0; i + 1 < P.size(); ++i)
    for (std::size_t j = i + 2; j + 1 < P.size() && j < i + 40; ++j)
      if (detail::proper_cross(P[i], P[i + 1], P[j], P[j + 1]))
        throw ConsistencyError("trace_level_curve: traced polyline self-intersects");
  return c;
}

struct ArgumentReport {
  double max_abs_arg = 0.0;
  std::size_t violations = 0;
  std::size_t worst_segment = 0;
  bool ok() const { return violations == 0; }
};

// Direction of every chord, folded to (-pi/2, pi/2], against the bound plus a step-dependent slack.
inline ArgumentReport tangent_argument_bound(const LevelCurve& c, double bound, double slack = 0.0) {
  ArgumentReport rep;
  for (std::size_t k = 0; k + 1 < c.points.size(); ++k) {
    const cplx d = c.points[k + 1] - c.points[k];
    double a = std::atan2(d.imag(), d.real());
    if (a > pi / 2) a -= pi;
    if (a <= -pi / 2) a += pi;
    if (std::abs(a) > rep.max_abs_arg) rep.max_abs_arg = std::abs(a), rep.worst_segment = k;
    if (std::abs(a) > bound + slack) ++rep.violations;
  }
  return rep;
}

struct Box {
  double lo, hi;  // I = (lo, hi); box I x (0, |I|) on the curve's side
};

inline std::vector<Box> dyadic_boxes(double x_lo, double x_hi, double scale) {
  std::vector<Box> out;
  const int j0 = static_cast<int>(std::floor(std::log2(scale)));
  for (int j = j0 - 3; j <= j0 + 2; ++j) {
    const double L = std::ldexp(1.0, j);
    const long k0 = static_cast<long>(std::floor(x_lo / L)) - 1, k1 = static_cast<long>(std::ceil(x_hi / L)) + 1;
    for (long k = k0; k <= k1; ++k) out.push_back({k * L, (k + 1) * L});
  }
  return out;
}

namespace detail {

// Length of segment p->q inside the axis-aligned rectangle (Liang-Barsky).
inline double clip_in_rect(cplx p, cplx q, double x0, double x1, double y0, double y1) {
  const cplx d = q - p;
  double t0 = 0.0, t1 = 1.0;
  auto edge = [&](double num, double den) {
    if (den == 0.0) return num >= 0.0;
    const double t = num / den;
    if (den > 0) t1 = std::min(t1, t);
    else t0 = std::max(t0, t);
    return t0 <= t1;
  };
  if (!edge(x1 - p.real(), d.real()) || !edge(p.real() - x0, -d.real()) || !edge(y1 - p.imag(), d.imag()) ||
      !edge(p.imag() - y0, -d.imag()))
    return 0.0;
  return std::max(0.0, t1 - t0) * std::abs(d);
}

}  // namespace detail

struct CarlesonReport {
  double constant = 0.0;
  Box worst{0, 0};
};

inline CarlesonReport carleson_constant(const std::vector<LevelCurve>& curves, const std::vector<Box>& boxes) {
  if (boxes.empty()) throw DomainError("carleson_constant: empty box plan");
  CarlesonReport rep;
  for (const auto& b : boxes) {
    const double L = b.hi - b.lo;
    double len = 0.0;
    for (const auto& c : curves)
      for (std::size_t k = 0; k + 1 < c.points.size(); ++k) {
        cplx p = c.points[k], q = c.points[k + 1];
        if (c.side == Side::lower) p = std::conj(p), q = std::conj(q);
        len += detail::clip_in_rect(p, q, b.lo, b.hi, 0.0, L);
      }
    if (len / L > rep.constant) rep.constant = len / L, rep.worst = b;
  }
  return rep;
}

// Number of interior vertices outside the tent over their gap.
inline std::size_t tent_violations(const LevelCurve& c, const XInterval& gap, double gamma) {
  const Tent t = c.side == Side::upper ? Tent{cplx(gap.lo), cplx(gap.hi), gamma} : Tent{cplx(gap.hi), cplx(gap.lo), gamma};
  std::size_t bad = 0;
  for (std::size_t k = 1; k + 1 < c.points.size(); ++k)
    if (!t.contains(c.points[k])) ++bad;
  return bad;
}

}  // namespace corona
