#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "corona/common.hpp"
#include "corona/conformal.hpp"
#include "corona/crosscuts.hpp"
#include "corona/harmonic.hpp"

namespace corona {

inline double separation_A(double beta1) { return (1.0 - beta1) / (1.0 + 3.0 * beta1); }

// Solves W(z) = target on the field's open half plane by damped Newton from a guess; steps are capped
// at half the current height.
inline cplx level_point(const HarmonicField& f, cplx target, cplx guess) {
  cplx z = guess;
  for (int it = 0; it < 200; ++it) {
    const cplx r = f.W(z) - target;
    if (std::abs(r) < 1e-14) return z;
    cplx step = r / f.dW(z);
    if (!std::isfinite(std::abs(step))) break;
    const double cap = 0.5 * std::abs(z.imag());
    if (std::abs(step) > cap) step *= cap / std::abs(step);
    cplx next = z - step;
    while (!f.in_open_half_plane(next)) step *= 0.5, next = z - step;
    z = next;
  }
  if (!(std::abs(f.W(z) - target) <= 1e-10)) throw ConvergenceError("level_point: Newton did not converge");
  return z;
}

// Euclidean distance from z to a polyline.
inline double polyline_distance(const std::vector<cplx>& P, cplx z) {
  double d = inf;
  for (std::size_t k = 0; k + 1 < P.size(); ++k) {
    const cplx a = P[k], b = P[k + 1], ab = b - a;
    const double t = std::clamp(std::real((z - a) * std::conj(ab)) / std::norm(ab), 0.0, 1.0);
    d = std::min(d, std::abs(z - (a + t * ab)));
  }
  return d;
}

// The band {omega > beta1, d(z) < B} along the traced delta_1 arcs.
struct BandRegion {
  HarmonicField field;
  BetaPair betas;
  double B;
  std::vector<LevelCurve> delta1;

  double omega(cplx z) const { return field.omega(Which::gaps, z); }
  double normalized_distance(cplx z) const {
    double d = inf;
    for (const auto& c : delta1) d = std::min(d, polyline_distance(c.points, z));
    return d / std::abs(z.imag());
  }
  bool contains(cplx z) const {
    return field.in_open_half_plane(z) && omega(z) > betas.beta1 && normalized_distance(z) < B;
  }
};

inline BandRegion band_region(const HarmonicField& f, const BetaPair& betas, double B, double step_fraction = 1e-3) {
  BandRegion r{f, betas, B, {}};
  for (std::size_t g = 0; g < f.gaps().size(); ++g)
    if (f.gaps()[g].bounded()) r.delta1.push_back(trace_level_curve(f, g, betas.beta1, step_fraction * f.gaps()[g].length()));
  return r;
}

// Sampled certificate of omega < beta2 on band points.
inline MarginReport harnack_check(const BandRegion& band, const std::vector<cplx>& samples) {
  MarginReport r;
  for (cplx z : samples)
    if (band.contains(z)) record_margin(r, band.betas.beta2 - band.omega(z), z);
  return r;
}

// One W-coordinate cell [beta1, beta_hi] x [t_lo, t_hi] around node z = Z(beta1 + i t).
struct Cell {
  std::size_t gap;
  cplx node;
  double t;
  double t_lo, t_hi;
  double u_lo, u_hi;
};

struct SeparatedSequence {
  std::vector<cplx> points;
  std::vector<Cell> cells;
  double B = 0.0;
  double beta_hi = 0.0;
  Side side = Side::upper;

  std::size_t size() const { return points.size(); }
};

namespace detail {

inline double sep_ratio(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(a.imag()), std::abs(b.imag())); }

}  // namespace detail

struct ExtractionOptions {
  double y_floor = 1e-4;      // truncation: stop below this height, relative to the gap length
  double scan = 2e-3;         // t-increment of the greedy scan
  double beta_hi = -1.0;      // upper edge of the cells in omega; negative: largest level within d < B
};

// Largest level u whose curve stays within normalized distance B of delta_1 (sampled along t).
inline double band_top_level(const HarmonicField& f, double beta1, double beta2, double B,
                             const std::vector<std::pair<double, cplx>>& samples) {
  auto fits = [&](double u) {
    for (const auto& [t, z1] : samples) {
      const cplx z = level_point(f, cplx(u, t), z1);
      if (std::abs(z - z1) / std::abs(z.imag()) >= B) return false;
    }
    return true;
  };
  double lo = beta1, hi = beta2;
  if (fits(hi)) return hi;
  for (int it = 0; it < 40; ++it) {
    const double m = 0.5 * (lo + hi);
    (fits(m) ? lo : hi) = m;
  }
  return lo;
}

// Greedy maximal selection along each delta_1 arc in the conformal parameter t = Im W, walking
// both ways from the gap's midpoint vertical until the height drops below the floor.
inline SeparatedSequence extract_sequence(const HarmonicField& f, const BetaPair& betas, double B,
                                          const ExtractionOptions& opt = {}) {
  if (!(B > 0.0)) throw DomainError("extract_sequence: B must be positive");
  SeparatedSequence seq;
  seq.B = B;
  seq.side = f.side();
  const double sgn = f.side() == Side::upper ? 1.0 : -1.0;
  std::vector<std::pair<double, cplx>> curve_samples;
  struct Arc {
    std::size_t gap;
    std::vector<double> t;
    std::vector<cplx> z;
  };
  std::vector<Arc> arcs;
  for (std::size_t g = 0; g < f.gaps().size(); ++g) {
    const XInterval gap = f.gaps()[g];
    if (!gap.bounded()) continue;
    const double floor_y = opt.y_floor * gap.length();
    // seed on the midpoint vertical
    const double mid = 0.5 * (gap.lo + gap.hi);
    double ylo = 1e-12 * gap.length(), yhi = gap.length();
    auto om = [&](double y) { return f.omega(Which::gaps, cplx(mid, sgn * y)); };
    while (om(yhi) > betas.beta1) yhi *= 2;
    for (int it = 0; it < 200 && yhi - ylo > 1e-15 * yhi; ++it) {
      const double ym = 0.5 * (ylo + yhi);
      (om(ym) > betas.beta1 ? ylo : yhi) = ym;
    }
    const cplx seed(mid, sgn * 0.5 * (ylo + yhi));
    const double t0 = f.W(seed).imag();
    Arc arc{g, {t0}, {seed}};
    for (double dir : {1.0, -1.0}) {
      std::vector<double> ts;
      std::vector<cplx> zs;
      double t_last = t0;
      cplx z_last = seed, z_scan = seed;
      double t = t0;
      while (true) {
        // first t beyond t_last whose point is B-separated from the last node
        cplx z = z_scan;
        double t_prev = t;
        bool found = false;
        for (int k = 0; k < 100000; ++k) {
          t_prev = t;
          t += dir * opt.scan;
          z = level_point(f, cplx(betas.beta1, t), z);
          curve_samples.push_back({t, z});
          if (detail::sep_ratio(z, z_last) >= B) {
            found = true;
            break;
          }
          z_scan = z;
        }
        if (!found) throw ConvergenceError("extract_sequence: scan did not separate");
        double a = t_prev, b = t;
        cplx za = z_scan, zb = z;
        for (int it = 0; it < 50; ++it) {
          const double m = 0.5 * (a + b);
          const cplx zm = level_point(f, cplx(betas.beta1, m), za);
          if (detail::sep_ratio(zm, z_last) >= B) b = m, zb = zm;
          else a = m, za = zm;
        }
        t = b;
        z_scan = zb;
        if (std::abs(zb.imag()) < floor_y) break;
        ts.push_back(b);
        zs.push_back(zb);
        t_last = b;
        z_last = zb;
      }
      (void)t_last;
      if (dir > 0) {
        arc.t.insert(arc.t.end(), ts.begin(), ts.end());
        arc.z.insert(arc.z.end(), zs.begin(), zs.end());
      } else {
        arc.t.insert(arc.t.begin(), ts.rbegin(), ts.rend());
        arc.z.insert(arc.z.begin(), zs.rbegin(), zs.rend());
      }
    }
    arcs.push_back(std::move(arc));
  }
  seq.beta_hi = opt.beta_hi > 0.0 ? opt.beta_hi : band_top_level(f, betas.beta1, betas.beta2, B, curve_samples);
  for (const auto& arc : arcs) {
    const std::size_t n = arc.t.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double lo = k > 0 ? 0.5 * (arc.t[k - 1] + arc.t[k]) : arc.t[k] - 0.5 * (arc.t[k + 1 > n - 1 ? k : k + 1] - arc.t[k]);
      const double hi = k + 1 < n ? 0.5 * (arc.t[k] + arc.t[k + 1]) : arc.t[k] + 0.5 * (arc.t[k] - arc.t[k > 0 ? k - 1 : k]);
      seq.points.push_back(arc.z[k]);
      seq.cells.push_back({arc.gap, arc.z[k], arc.t[k], std::min(lo, hi), std::max(lo, hi), betas.beta1, seq.beta_hi});
    }
  }
  // Pairwise separation of the output, checked exactly.
  for (std::size_t i = 0; i < seq.points.size(); ++i)
    for (std::size_t j = i + 1; j < seq.points.size(); ++j)
      if (detail::sep_ratio(seq.points[i], seq.points[j]) < B * (1 - 1e-12))
        throw ConsistencyError("extract_sequence: separation violated");
  return seq;
}

// Point of a cell at W-coordinates (u, t), continued from the node.
inline cplx cell_point(const HarmonicField& f, const Cell& c, double u, double t) {
  return level_point(f, cplx(u, t), c.node);
}

struct CoveringReport {
  std::size_t samples = 0;
  std::size_t violations = 0;  // band points farther than 3B y_n from every node
  double worst = 0.0;          // max over samples of min_n |z - z_n| / y_n
  double cell_ball_worst = 0.0;  // max over sampled cell points of |z - z_n| / (B y_n)
};

// Every band sample lies in some cell; every cell sits in its node ball.
inline CoveringReport check_covering(const HarmonicField& f, const SeparatedSequence& seq,
                                     const std::vector<cplx>& band_samples, int per_cell_side = 4) {
  CoveringReport rep;
  for (cplx z : band_samples) {
    double best = inf;
    for (cplx p : seq.points) best = std::min(best, std::abs(z - p) / std::abs(p.imag()));
    ++rep.samples;
    rep.worst = std::max(rep.worst, best);
    if (best > 3 * seq.B) ++rep.violations;
  }
  for (const auto& c : seq.cells)
    for (int a = 0; a <= per_cell_side; ++a)
      for (int b = 0; b <= per_cell_side; ++b) {
        const double u = c.u_lo + (c.u_hi - c.u_lo) * a / per_cell_side;
        const double t = c.t_lo + (c.t_hi - c.t_lo) * b / per_cell_side;
        const cplx z = cell_point(f, c, u, t);
        rep.cell_ball_worst = std::max(rep.cell_ball_worst, std::abs(z - c.node) / (seq.B * std::abs(c.node.imag())));
      }
  return rep;
}

inline double carleson_product(const std::vector<cplx>& pts) {
  for (cplx z : pts)
    if (!(z.imag() > 0.0)) throw DomainError("carleson_product: points must lie in the upper half plane");
  double best = 1.0;
  for (std::size_t n = 0; n < pts.size(); ++n) {
    double p = 1.0;
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (k != n) p *= std::abs((pts[n] - pts[k]) / (pts[n] - std::conj(pts[k])));
    best = std::min(best, p);
  }
  return best;
}

struct GenerationSplit {
  std::vector<std::vector<std::size_t>> classes;
  int p = 0;
};

// Greedy coloring: each point joins the first class in which it is `separation`-separated from every
// member (normalized by the smaller height); p = ceil(log2 #classes).
inline GenerationSplit generation_split(const std::vector<cplx>& pts, double separation) {
  GenerationSplit s;
  auto nd = [](cplx a, cplx b) { return std::abs(a - b) / std::min(std::abs(a.imag()), std::abs(b.imag())); };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool placed = false;
    for (auto& c : s.classes) {
      if (std::all_of(c.begin(), c.end(), [&](std::size_t j) { return nd(pts[i], pts[j]) >= separation; })) {
        c.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) s.classes.push_back({i});
  }
  while ((std::size_t(1) << s.p) < s.classes.size()) ++s.p;
  if (s.p > 20) throw ConvergenceError("generation_split: more than 2^20 classes");
  return s;
}

// Finite Nevanlinna-Pick interpolant in the unit disk: central Schur-algorithm solution scaled by s.
class PickInterpolant {
 public:
  PickInterpolant() = default;
  PickInterpolant(std::vector<cplx> nodes, std::vector<cplx> targets, double norm_margin = 1.001) {
    if (nodes.empty() || nodes.size() != targets.size()) throw DomainError("pick_interpolate: bad sizes");
    for (cplx l : nodes)
      if (!(std::abs(l) < 1.0)) throw DomainError("pick_interpolate: nodes must lie in the open disk");
    min_norm_ = minimal_norm(nodes, targets);
    if (!(min_norm_ < 1e6)) throw ConvergenceError("pick_interpolate: Pick problem infeasible below 1e6");
    scale_ = std::max(min_norm_, 1e-300) * norm_margin;
    // Schur algorithm on F = targets/scale.
    std::vector<cplx> lam = nodes, val(targets.size());
    for (std::size_t k = 0; k < val.size(); ++k) val[k] = targets[k] / scale_;
    while (!lam.empty()) {
      const cplx l0 = lam.front(), g = val.front();
      if (!(std::abs(g) < 1.0)) throw ConsistencyError("pick_interpolate: Schur parameter not contractive");
      gamma_.push_back(g);
      centers_.push_back(l0);
      std::vector<cplx> nl, nv;
      for (std::size_t k = 1; k < lam.size(); ++k) {
        const cplx b = (lam[k] - l0) / (1.0 - std::conj(l0) * lam[k]);
        nv.push_back((val[k] - g) / (b * (1.0 - std::conj(g) * val[k])));
        nl.push_back(lam[k]);
      }
      lam = std::move(nl);
      val = std::move(nv);
    }
  }

  double minimal_norm() const { return min_norm_; }
  double bound() const { return scale_; }

  cplx operator()(cplx lambda) const {
    cplx F = 0.0;
    for (std::size_t k = gamma_.size(); k-- > 0;) {
      const cplx b = (lambda - centers_[k]) / (1.0 - std::conj(centers_[k]) * lambda);
      F = (gamma_[k] + b * F) / (1.0 + std::conj(gamma_[k]) * b * F);
    }
    return scale_ * F;
  }

  // Smallest s with [(1 - w_i conj(w_k)/s^2)/(1 - l_i conj(l_k))] positive semidefinite: generalized
  // eigenvalue estimate, then bisection on Cholesky feasibility to relative 1e-6.
  static double minimal_norm(const std::vector<cplx>& l, const std::vector<cplx>& w) {
    const Eigen::Index n = Eigen::Index(l.size());
    Eigen::MatrixXcd K(n, n), M(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k) {
        K(i, k) = 1.0 / (1.0 - l[i] * std::conj(l[k]));
        M(i, k) = w[i] * std::conj(w[k]) * K(i, k);
      }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(M, K, Eigen::EigenvaluesOnly);
    const double est = std::sqrt(std::max(ges.eigenvalues().maxCoeff(), 0.0));
    auto feasible = [&](double s) {
      Eigen::MatrixXcd P = K - M / (s * s);
      // scale to unit diagonal before the test
      Eigen::VectorXd d = K.diagonal().real().cwiseSqrt().cwiseInverse();
      P = d.asDiagonal() * P * d.asDiagonal();
      Eigen::LLT<Eigen::MatrixXcd> llt(P + 1e-13 * Eigen::MatrixXcd::Identity(n, n));
      return llt.info() == Eigen::Success;
    };
    if (est == 0.0) return 0.0;
    double lo = est * (1 - 1e-2), hi = est * (1 + 1e-2);
    while (!feasible(hi)) hi *= 2;
    while (lo > 1e-300 && feasible(lo)) lo *= 0.5;
    while (hi - lo > 1e-6 * hi) {
      const double m = 0.5 * (lo + hi);
      (feasible(m) ? hi : lo) = m;
    }
    return hi;
  }

 private:
  std::vector<cplx> gamma_, centers_;
  double min_norm_ = 0.0;
  double scale_ = 1.0;
};

inline PickInterpolant pick_interpolate(const std::vector<cplx>& nodes, const std::vector<cplx>& targets) {
  return PickInterpolant(nodes, targets);
}

// Conformal chart of a simply connected domain onto the unit disk.
using DiskChart = std::function<cplx(cplx)>;

inline DiskChart identity_chart() {
  return [](cplx z) { return z; };
}

// Cayley transform of the upper half plane, centered at i c.
inline DiskChart cayley_chart(double c = 1.0) {
  return [c](cplx z) { return (z - I * c) / (z + I * c); };
}

// Chart of the extended upper half plane: H+ plus, below each gap, the lens bounded by the reflected
// level curve at `level`; mapped by Schwarz-Christoffel onto H+ and then by a Cayley transform.
class ExtendedChart {
 public:
  ExtendedChart(const HarmonicField& upper, double level, double dt = 0.25, double floor = 1e-3, double chord_tol = 5e-2) {
    if (upper.side() != Side::upper) throw DomainError("ExtendedChart: upper field expected");
    std::vector<cplx> v;
    std::vector<Lens> lenses;
    for (std::size_t g = 0; g < upper.gaps().size(); ++g) {
      const XInterval gap = upper.gaps()[g];
      if (!gap.bounded()) continue;
      // vertices uniform in t = Im W along the level curve: geometric grading toward each endpoint
      const double mid = 0.5 * (gap.lo + gap.hi);
      double ylo = 1e-14, yhi = gap.length();
      while (upper.omega(Which::gaps, cplx(mid, yhi)) > level) yhi *= 2;
      for (int it = 0; it < 200; ++it) {
        const double ym = 0.5 * (ylo + yhi);
        (upper.omega(Which::gaps, cplx(mid, ym)) > level ? ylo : yhi) = ym;
      }
      const cplx seed(mid, yhi);
      const double t0 = upper.W(seed).imag();
      std::vector<std::pair<double, cplx>> arc{{t0, seed}};
      for (double dir : {1.0, -1.0}) {
        cplx z = seed;
        for (int k = 1;; ++k) {
          const double t = t0 + dir * k * dt;
          z = level_point(upper, cplx(level, t), z);
          if (z.imag() < floor * gap.length()) break;
          arc.push_back({t, z});
        }
      }
      std::sort(arc.begin(), arc.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
      // subdivide chords that stray from the curve by more than chord_tol times the height
      for (std::size_t k = 0; k + 1 < arc.size();) {
        const double tm = 0.5 * (arc[k].first + arc[k + 1].first);
        const cplx zm = level_point(upper, cplx(level, tm), arc[k].second);
        const cplx a = arc[k].second, ab = arc[k + 1].second - a;
        if (std::abs(detail::cross(ab, zm - a)) / std::abs(ab) > chord_tol * zm.imag()) arc.insert(arc.begin() + long(k) + 1, {tm, zm});
        else ++k;
      }
      if (std::abs(arc.front().second - cplx(gap.lo)) > std::abs(arc.back().second - cplx(gap.lo)))
        std::reverse(arc.begin(), arc.end());
      Lens lens{gap, {cplx(gap.lo)}};
      for (const auto& [t, z] : arc) lens.polygon.push_back(std::conj(z));
      lens.polygon.push_back(cplx(gap.hi));
      v.insert(v.end(), lens.polygon.begin(), lens.polygon.end());
      lenses.push_back(std::move(lens));
    }
    if (lenses.empty()) throw DomainError("ExtendedChart: no bounded gaps");
    lenses_ = std::make_shared<const std::vector<Lens>>(std::move(lenses));
    auto planner = [lenses = lenses_](const PolylineMap& m, cplx z) {
      if (z.imag() >= 0.0) return m.default_path(z);
      const Lens& L = (*lenses)[lens_of(*lenses, z)];
      const double xm = 0.5 * (L.gap.lo + L.gap.hi);
      auto p = m.default_path(cplx(xm, 0.0));
      p.push_back(cplx(xm, 0.0));
      return p;
    };
    map_ = std::make_shared<PolylineMap>(v, 1.0, 1.0, planner);
    c_ = std::abs(map_->reference_preimage().imag());
  }

  bool contains(cplx z) const {
    if (z.imag() > 0.0) return true;
    for (const auto& L : *lenses_) {
      if (z.imag() == 0.0 && z.real() > L.gap.lo && z.real() < L.gap.hi) return true;
      if (z.imag() < 0.0 && inside(L, z)) return true;
    }
    return false;
  }

  cplx preimage(cplx z) const {
    if (!contains(z)) throw DomainError("ExtendedChart: point outside the extended domain");
    return map_->inverse(z);
  }
  // Continuation from a nearby point with known preimage; falls back to the planned path when the
  // continued value leaves the closed upper half plane or Newton fails.
  cplx preimage_near(cplx z, cplx z_hint, cplx w_hint) const {
    if (!contains(z)) throw DomainError("ExtendedChart: point outside the extended domain");
    try {
      const cplx w = map_->inverse_from(z, z_hint, w_hint);
      if (w.imag() >= -1e-12) return w;
    } catch (const ConvergenceError&) {
    }
    return map_->inverse(z);
  }
  cplx to_disk(cplx w) const { return (w - I * c_) / (w + I * c_); }
  cplx operator()(cplx z) const { return to_disk(preimage(z)); }
  DiskChart as_function() const {
    return [self = *this](cplx z) { return self(z); };
  }

  const PolylineMap& map() const { return *map_; }

 private:
  struct Lens {
    XInterval gap;
    std::vector<cplx> polygon;  // gap.lo, points below, gap.hi
  };
  std::shared_ptr<const std::vector<Lens>> lenses_;
  std::shared_ptr<const PolylineMap> map_;
  double c_ = 1.0;

  // Even-odd rule on the closed lens polygon.
  static bool inside(const Lens& L, cplx z) {
    const auto& P = L.polygon;
    bool in = false;
    for (std::size_t k = 0, j = P.size() - 1; k < P.size(); j = k++) {
      if ((P[k].imag() > z.imag()) != (P[j].imag() > z.imag())) {
        const double x = P[j].real() + (z.imag() - P[j].imag()) * (P[k].real() - P[j].real()) / (P[k].imag() - P[j].imag());
        if (z.real() < x) in = !in;
      }
    }
    return in;
  }
  static std::size_t lens_of(const std::vector<Lens>& lenses, cplx z) {
    for (std::size_t j = 0; j < lenses.size(); ++j)
      if (inside(lenses[j], z)) return j;
    throw DomainError("ExtendedChart: point below the axis outside every lens");
  }
};

// The squared roots-of-unity averages over each class.
class InterpFamily {
 public:
  InterpFamily(std::vector<cplx> nodes, GenerationSplit split, DiskChart chart)
      : nodes_(std::move(nodes)), split_(std::move(split)), chart_(std::move(chart)) {
    members_.resize(nodes_.size());
    for (std::size_t c = 0; c < split_.classes.size(); ++c) {
      const auto& cls = split_.classes[c];
      const std::size_t n0 = cls.size();
      std::vector<cplx> lam;
      for (std::size_t idx : cls) lam.push_back(chart_(nodes_[idx]));
      std::vector<PickInterpolant> fs;
      for (std::size_t j = 1; j <= n0; ++j) {
        std::vector<cplx> tg;
        for (std::size_t m = 1; m <= n0; ++m) tg.push_back(root(n0, m * j));
        fs.push_back(PickInterpolant(lam, tg));
        N_ = std::max(N_, fs.back().bound());
      }
      for (std::size_t m = 0; m < n0; ++m) members_[cls[m]] = {c, m + 1};
      interps_.push_back(std::move(fs));
      chart_nodes_.push_back(std::move(lam));
    }
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<cplx>& nodes() const { return nodes_; }
  const GenerationSplit& split() const { return split_; }
  double interpolation_constant() const { return N_; }
  double kappa() const { return N_ * N_ * double(std::size_t(1) << split_.p); }
  const DiskChart& chart() const { return chart_; }

  // All h_m at a chart value.
  std::vector<cplx> eval_chart(cplx lambda) const {
    std::vector<cplx> h(nodes_.size());
    for (std::size_t c = 0; c < split_.classes.size(); ++c) {
      const auto& cls = split_.classes[c];
      const std::size_t n0 = cls.size();
      std::vector<cplx> fj(n0);
      for (std::size_t j = 0; j < n0; ++j) fj[j] = interps_[c][j](lambda);
      for (std::size_t m = 1; m <= n0; ++m) {
        cplx s = 0.0;
        for (std::size_t j = 1; j <= n0; ++j) s += std::conj(root(n0, m * j)) * fj[j - 1];
        s /= double(n0);
        h[cls[m - 1]] = s * s;
      }
    }
    return h;
  }
  std::vector<cplx> eval(cplx z) const { return eval_chart(chart_(z)); }

 private:
  std::vector<cplx> nodes_;
  GenerationSplit split_;
  DiskChart chart_;
  std::vector<std::vector<PickInterpolant>> interps_;
  std::vector<std::vector<cplx>> chart_nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> members_;
  double N_ = 0.0;

  static cplx root(std::size_t n, std::size_t k) { return std::polar(1.0, 2.0 * pi * double(k % n) / double(n)); }
};

struct FamilyReport {
  double node_error = 0.0;      // max |h_m(z_m) - 1|
  double orthogonality = 0.0;   // max |h_m(z_k)|, k != m in the same class
  double sup_excess = -inf;     // max sampled |h_m| - N^2
  double sum_excess = -inf;     // max sampled sum |h_m| - kappa
  double class_sum_excess = -inf;  // max sampled per-class sum |h_m| - N^2
  std::size_t samples = 0;
};

// Node values, orthogonality within classes, and sup/sum bounds on sample points.
inline FamilyReport verify_family(const InterpFamily& fam, const std::vector<cplx>& sample_points) {
  FamilyReport rep;
  const double N2 = sqr(fam.interpolation_constant());
  for (std::size_t i = 0; i < fam.size(); ++i) {
    const auto h = fam.eval(fam.nodes()[i]);
    rep.node_error = std::max(rep.node_error, std::abs(h[i] - 1.0));
    for (const auto& cls : fam.split().classes)
      if (std::find(cls.begin(), cls.end(), i) != cls.end())
        for (std::size_t k : cls)
          if (k != i) rep.orthogonality = std::max(rep.orthogonality, std::abs(h[k]));
  }
  for (cplx z : sample_points) {
    const auto h = fam.eval(z);
    ++rep.samples;
    double total = 0.0;
    for (const auto& cls : fam.split().classes) {
      double s = 0.0;
      for (std::size_t k : cls) s += std::abs(h[k]), rep.sup_excess = std::max(rep.sup_excess, std::abs(h[k]) - N2);
      rep.class_sum_excess = std::max(rep.class_sum_excess, s - N2);
      total += s;
    }
    rep.sum_excess = std::max(rep.sum_excess, total - fam.kappa());
  }
  return rep;
}

struct CellBoundReport {
  double min_modulus = inf;
  std::size_t samples = 0;
  std::size_t violations = 0;
  std::size_t worst_cell = 0;
};

// |h_n| > 1/2 on sampled points of cell n (corners, edges, interior grid).
inline CellBoundReport schwarz_cell_bound(const InterpFamily& fam, const HarmonicField& f, const SeparatedSequence& seq,
                                          int per_side = 4) {
  CellBoundReport rep;
  for (std::size_t n = 0; n < seq.cells.size(); ++n) {
    const auto& c = seq.cells[n];
    for (int a = 0; a <= per_side; ++a)
      for (int b = 0; b <= per_side; ++b) {
        const cplx z = cell_point(f, c, c.u_lo + (c.u_hi - c.u_lo) * a / per_side, c.t_lo + (c.t_hi - c.t_lo) * b / per_side);
        const double m = std::abs(fam.eval(z)[n]);
        ++rep.samples;
        if (!(m > 0.5)) ++rep.violations;
        if (m < rep.min_modulus) rep.min_modulus = m, rep.worst_cell = n;
      }
  }
  return rep;
}

}  // namespace corona
