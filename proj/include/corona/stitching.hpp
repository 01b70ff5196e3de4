#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "corona/common.hpp"
#include "corona/harmonic.hpp"
#include "corona/interpolation.hpp"
#include "corona/quadrature.hpp"
#include "corona/scheduler.hpp"

namespace corona {

using CVec = Eigen::VectorXcd;

inline std::size_t side_index(Side s) { return s == Side::upper ? 0 : 1; }
inline Side generation_side(int m) { return m % 2 == 0 ? Side::upper : Side::lower; }
inline double sup_norm(const CVec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
// sum_j f_j g_j (no conjugation)
inline cplx pairing(const CVec& f, const CVec& g) { return (f.array() * g.array()).sum(); }

// C^2 step 6t^5 - 15t^4 + 10t^3, clamped to [0,1].
inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
inline double smooth_step_slope(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 30.0 * t * t * sqr(1.0 - t);
}

// phi = S((hi - omega)/(hi - lo)) with omega = Re W of the side's field, continued across the gaps.
class PartitionOfUnity {
 public:
  PartitionOfUnity(HarmonicField field, double lo, double hi) : field_(std::move(field)), lo_(lo), hi_(hi) {
    if (!(hi > lo)) throw DomainError("partition_of_unity: need lo < hi");
  }

  double omega(cplx z) const { return field_.W(z).real(); }
  double operator()(cplx z) const { return smooth_step((hi_ - omega(z)) / (hi_ - lo_)); }
  // dbar phi = -S'(tau)/(hi - lo) * dbar(Re W) with dbar(Re W) = conj(W')/2.
  cplx dbar(cplx z) const {
    const double d = hi_ - lo_;
    return -smooth_step_slope((hi_ - omega(z)) / d) / d * 0.5 * std::conj(field_.dW(z));
  }
  std::pair<double, double> gradient(cplx z) const {
    const cplx g = dbar(z);
    return {2.0 * g.real(), 2.0 * g.imag()};
  }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const HarmonicField& field() const { return field_; }

 private:
  HarmonicField field_;
  double lo_, hi_;
};

inline PartitionOfUnity partition_of_unity(const HarmonicField& f, const BetaPair& betas) {
  return PartitionOfUnity(f, betas.beta1, betas.beta2);
}

// G = phi g_prev + (1 - phi) g_cur; endpoints of phi skip the unused input.
inline CVec blend(double phi, const std::function<CVec()>& prev, const std::function<CVec()>& cur) {
  if (phi >= 1.0) return prev();
  if (phi <= 0.0) return cur();
  return phi * prev() + (1.0 - phi) * cur();
}

// Corona data f_1..f_n with its regional seed solutions.
struct CoronaData {
  std::string preset;
  std::vector<std::function<cplx(cplx)>> f;
  double mu = 0.0;
  double sup = 0.0;

  std::size_t n() const { return f.size(); }
  CVec operator()(cplx z) const {
    CVec v(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) v(Eigen::Index(j)) = f[j](z);
    return v;
  }
};

struct SeedFamily {
  int generation;
  Side side;
  std::function<CVec(cplx)> g;
};

struct TestData {
  CoronaData data;
  SeedFamily upper, lower;
  double N = 0.0;  // max sampled seed norm
};

namespace detail {

// z - e - sqrt((z-e)^2 - d^2), analytic off [e-d, e+d]; |k| = d on the cut, k ~ d^2/(2(z-e)) at infinity.
inline cplx cut_factor(cplx z, double e, double d) {
  const cplx s = std::sqrt(z - e - d) * std::sqrt(z - e + d);
  return z - e - s;
}

// Boundary samples of Omega (both edges of E) and a large circle.
inline std::vector<cplx> omega_boundary_samples(const IntervalUnion& E) {
  std::vector<cplx> out;
  for (const auto& p : E.parts()) {
    const double lo = std::isfinite(p.lo) ? p.lo : std::min(p.hi, 0.0) - 1e4;
    const double hi = std::isfinite(p.hi) ? p.hi : std::max(p.lo, 0.0) + 1e4;
    const int n = 2000;
    for (int k = 0; k <= n; ++k) {
      const double s = double(k) / n;
      // cluster at both ends
      const double x = lo + (hi - lo) * 0.5 * (1.0 - std::cos(pi * s));
      for (double sg : {1.0, -1.0}) out.push_back(cplx(x, sg * 1e-13));
    }
  }
  for (int k = 0; k < 720; ++k) out.push_back(std::polar(1e4, 2 * pi * (k + 0.5) / 720));
  return out;
}

}  // namespace detail

// Presets: "cutpole" (f_j = c_j (z - w_j) k(z) with k the cut factor over a piece of E) and "trivial"
// (f_1 constant, identical seeds). "cutpole-swapped" places the zeros on the wrong sides and is rejected.
// in_upper / in_lower test membership in the closed extended domains.
inline TestData make_test_data(const IntervalUnion& E, const std::string& preset,
                               const std::function<bool(cplx)>& in_upper, const std::function<bool(cplx)>& in_lower) {
  const XInterval* piece = nullptr;
  for (const auto& p : E.parts())
    if (p.bounded() && (!piece || p.length() > piece->length())) piece = &p;
  if (!piece) throw ConfigError("make_test_data: presets need a bounded component of E");
  const double e = 0.5 * (piece->lo + piece->hi), d = 0.25 * piece->length();
  const double lift = 1.5 * std::max(1.0, 0.5 * piece->length());
  const auto bsamples = detail::omega_boundary_samples(E);
  std::vector<cplx> grid;
  for (int a = 0; a < 161; ++a)
    for (int b = 0; b < 161; ++b) {
      const cplx z(-8.0 + 16.0 * a / 160.0 + 1e-3, -8.0 + 16.0 * b / 160.0 + 1e-3);
      if (z.imag() == 0.0 && E.contains(z.real())) continue;
      grid.push_back(z);
    }
  for (cplx z : bsamples) grid.push_back(z);

  auto normalized = [&](cplx w) {
    auto raw = [=](cplx z) { return (z - w) * detail::cut_factor(z, e, d); };
    double sup = 0.0;
    for (cplx z : grid) sup = std::max(sup, std::abs(raw(z)));
    const double c = 1.0 / sup;
    return std::function<cplx(cplx)>([=](cplx z) { return c * raw(z); });
  };

  TestData td;
  td.data.preset = preset;
  if (preset == "cutpole" || preset == "cutpole-swapped") {
    const bool swapped = preset == "cutpole-swapped";
    const cplx w1(e, swapped ? lift : -lift), w2(e, swapped ? -lift : lift);
    if (in_upper(w1)) throw ConfigError("make_test_data: zero of f1 lies in the upper extended domain");
    if (in_lower(w2)) throw ConfigError("make_test_data: zero of f2 lies in the lower extended domain");
    td.data.f = {normalized(w1), normalized(w2)};
    const auto f1 = td.data.f[0], f2 = td.data.f[1];
    td.upper = {0, Side::upper, [f1](cplx z) {
                  CVec g(2);
                  g << 1.0 / f1(z), 0.0;
                  return g;
                }};
    td.lower = {1, Side::lower, [f2](cplx z) {
                  CVec g(2);
                  g << 0.0, 1.0 / f2(z);
                  return g;
                }};
  } else if (preset == "trivial") {
    td.data.f = {[](cplx) { return cplx(0.5); }, normalized(cplx(e, lift))};
    auto seed = [](cplx) {
      CVec g(2);
      g << 2.0, 0.0;
      return g;
    };
    td.upper = {0, Side::upper, seed};
    td.lower = {1, Side::lower, seed};
  } else {
    throw ConfigError("make_test_data: unknown preset '" + preset + "'");
  }

  // mu by grid minimization of max |f_j| with local pattern-search refinement; seed norms on the same grid.
  auto maxf = [&](cplx z) {
    double m = 0.0;
    for (const auto& f : td.data.f) m = std::max(m, std::abs(f(z)));
    return m;
  };
  std::vector<std::pair<double, cplx>> vals;
  for (cplx z : grid) vals.push_back({maxf(z), z});
  std::partial_sort(vals.begin(), vals.begin() + 8, vals.end(),
                    [](const auto& x, const auto& y) { return x.first < y.first; });
  double mu = vals.front().first;
  for (int k = 0; k < 8; ++k) {
    cplx z = vals[k].second;
    double v = vals[k].first, h = 0.05;
    while (h > 1e-9) {
      bool moved = false;
      for (cplx dz : {cplx(h, 0), cplx(-h, 0), cplx(0, h), cplx(0, -h)}) {
        const cplx c = z + dz;
        if (c.imag() == 0.0) continue;
        const double cv = maxf(c);
        if (cv < v) v = cv, z = c, moved = true;
      }
      if (!moved) h *= 0.5;
    }
    mu = std::min(mu, v);
  }
  td.data.mu = mu;
  double sup = 0.0;
  for (cplx z : grid) sup = std::max(sup, maxf(z));
  td.data.sup = sup;
  if (!(mu > 0.0) || sup > 1.0 + 1e-9) throw ConfigError("make_test_data: corona bounds mu <= max|f| <= 1 fail");
  double N = 0.0;
  for (cplx z : grid) {
    if (z.imag() >= 0.0 && in_upper(z)) N = std::max(N, sup_norm(td.upper.g(z)));
    if (z.imag() <= 0.0 && in_lower(z)) N = std::max(N, sup_norm(td.lower.g(z)));
  }
  td.N = N;
  return td;
}

struct StitchOptions {
  std::string preset = "cutpole";
  double beta1 = 0.35;
  double separation = 8.0;     // class separation of the generation split
  double chart_margin = 0.08;  // chart polygon follows the level beta1 - margin
  double saddle_clearance = 0.12;  // beta1 is raised to (largest saddle level) + clearance
  double r = 0.1;
  double tolerance = 1e-3;
  int max_generations = 12;
  int order = 8;               // Gauss nodes per cell side
  int random_per_cell = 8;     // extra sup-norm samples per cell
  double y_floor = 1e-4;       // truncation height of the band, relative to the gap length
  double K0 = 0.05;            // probe constant before calibration
  int max_restarts = 5;
  double ratio_safety = 1.5;
  int grid = 100;              // residual grid is grid x grid
  double window = 3.0;         // residual grid half-width in units of the longest bounded gap
  unsigned seed = 1;
};

// Options with beta1 lifted clear of the saddles of omega, so every gap keeps its own
// delta_1 arc and the chart level stays above the saddles too.
inline StitchOptions lift_beta1(StitchOptions opt, const IntervalUnion& E) {
  if (!(opt.saddle_clearance > opt.chart_margin)) throw ConfigError("StitchOptions: saddle clearance must exceed the chart margin");
  opt.beta1 = std::max(opt.beta1, saddle_level(HarmonicField(E)) + opt.saddle_clearance);
  if (!(opt.beta1 < 1.0)) throw ConfigError("StitchOptions: no admissible beta1 above the saddles");
  return opt;
}

// Quadrature mesh of the upper band in W-coordinates; the lower band is its mirror image.
struct BandMesh {
  struct CellInfo {
    std::size_t first = 0;
    cplx center;
    double radius = 0.0;
    double u_lo, u_hi, t_lo, t_hi;
  };
  int order = 0;
  std::vector<CellInfo> cells;
  std::vector<cplx> zeta;      // upper-frame nodes
  std::vector<cplx> w;         // W+(zeta)
  std::vector<double> weight;  // w-area weights
  std::vector<double> jac;     // |Z'(w)|^2 = 1/|W'|^2
  std::vector<std::size_t> cell_of;
  Rule rule;
  std::shared_ptr<LagrangeBasis> basis;

  std::size_t size() const { return zeta.size(); }
  std::size_t per_cell() const { return std::size_t(order) * std::size_t(order); }
  // node index of (i along u, j along t) in cell c
  std::size_t node(std::size_t c, int i, int j) const { return cells[c].first + std::size_t(i * order + j); }
};

inline BandMesh build_band_mesh(const HarmonicField& upper, const SeparatedSequence& seq, int order) {
  if (order < 2) throw DomainError("build_band_mesh: order must be at least 2");
  BandMesh M;
  M.order = order;
  M.rule = gauss_legendre(order);
  M.basis = std::make_shared<LagrangeBasis>(M.rule.nodes);
  for (std::size_t c = 0; c < seq.cells.size(); ++c) {
    const Cell& cell = seq.cells[c];
    BandMesh::CellInfo info{M.zeta.size(), {}, 0.0, cell.u_lo, cell.u_hi, cell.t_lo, cell.t_hi};
    const double hu = 0.5 * (cell.u_hi - cell.u_lo), ht = 0.5 * (cell.t_hi - cell.t_lo);
    cplx guess_row = cell.node;
    for (int i = 0; i < order; ++i) {
      const double u = cell.u_lo + hu * (M.rule.nodes[i] + 1.0);
      guess_row = level_point(upper, cplx(u, cell.t), guess_row);
      cplx guess = guess_row;
      for (int j = 0; j < order; ++j) {
        const double t = cell.t_lo + ht * (M.rule.nodes[j] + 1.0);
        guess = level_point(upper, cplx(u, t), guess);
        M.zeta.push_back(guess);
        M.w.push_back(cplx(u, t));
        M.weight.push_back(M.rule.weights[i] * M.rule.weights[j] * hu * ht);
        M.jac.push_back(1.0 / std::norm(upper.dW(guess)));
        M.cell_of.push_back(c);
      }
    }
    info.center = level_point(upper, cplx(cell.u_lo + hu, cell.t_lo + ht), cell.node);
    for (double a : {cell.u_lo, cell.u_hi})
      for (double b : {cell.t_lo, cell.t_hi})
        info.radius = std::max(info.radius, std::abs(level_point(upper, cplx(a, b), info.center) - info.center));
    M.cells.push_back(info);
  }
  return M;
}

namespace detail {

struct LocalNode {
  double xi, eta, weight;  // normalized cell coordinates and normalized-area weight
};

// Rule on the normalized rectangle [a,b]x[c,d] for integrands with a 1/(z - zeta) singularity at (x0,y0):
// Duffy triangles when the point lies inside, quadtree refinement while it is within 1.5 half-sides.
// Duffy rule on the triangle (x0,y0), A, B: the 1/r singularity at the apex is cancelled by the jacobian.
inline void duffy_triangle(double x0, double y0, double ax, double ay, double bx, double by, const Rule& duffy,
                           std::vector<LocalNode>& out) {
  const double e1x = ax - x0, e1y = ay - y0, e2x = bx - ax, e2y = by - ay;
  const double area2 = std::abs(e1x * e2y - e1y * e2x);
  if (area2 == 0.0) return;
  for (std::size_t i = 0; i < duffy.nodes.size(); ++i) {
    const double s = 0.5 * (duffy.nodes[i] + 1.0), ws = 0.5 * duffy.weights[i];
    for (std::size_t j = 0; j < duffy.nodes.size(); ++j) {
      const double t = 0.5 * (duffy.nodes[j] + 1.0), wt = 0.5 * duffy.weights[j];
      out.push_back({x0 + s * (e1x + t * e2x), y0 + s * (e1y + t * e2y), ws * wt * s * area2});
    }
  }
}

inline void local_rule(double a, double b, double c, double d, double x0, double y0, const Rule& gauss,
                       const Rule& duffy, int depth, std::vector<LocalNode>& out) {
  const double xm = 0.5 * (a + b), ym = 0.5 * (c + d), hx = 0.5 * (b - a), hy = 0.5 * (d - c);
  const bool inside = x0 >= a && x0 <= b && y0 >= c && y0 <= d;
  if (inside) {
    // Split at the point; each quadrant gets a square with the point at a corner (two Duffy
    // triangles) and a remainder strip handled as a near-singular rectangle.
    for (double fx : {a, b})
      for (double fy : {c, d}) {
        const double w = std::abs(fx - x0), h = std::abs(fy - y0);
        if (w == 0.0 || h == 0.0) continue;
        const double side = std::min(w, h), sx = fx > x0 ? side : -side, sy = fy > y0 ? side : -side;
        duffy_triangle(x0, y0, x0 + sx, y0, x0 + sx, y0 + sy, duffy, out);
        duffy_triangle(x0, y0, x0 + sx, y0 + sy, x0, y0 + sy, duffy, out);
        const double ylo = std::min(y0, fy), yhi = std::max(y0, fy), xlo = std::min(x0, fx), xhi = std::max(x0, fx);
        if (w > side) {
          const double s0 = x0 + sx;
          local_rule(std::min(s0, fx), std::max(s0, fx), ylo, yhi, x0, y0, gauss, duffy, depth + 1, out);
        } else if (h > side) {
          const double s0 = y0 + sy;
          local_rule(xlo, xhi, std::min(s0, fy), std::max(s0, fy), x0, y0, gauss, duffy, depth + 1, out);
        }
      }
    return;
  }
  // distance to the rectangle in units of its longer half-side
  const double dx = std::max(std::abs(x0 - xm) - hx, 0.0), dy = std::max(std::abs(y0 - ym) - hy, 0.0);
  const double delta = std::hypot(dx, dy) / std::max(hx, hy);
  if (delta > 1.5 || depth >= 24) {
    for (std::size_t i = 0; i < gauss.nodes.size(); ++i)
      for (std::size_t j = 0; j < gauss.nodes.size(); ++j)
        out.push_back({xm + hx * gauss.nodes[i], ym + hy * gauss.nodes[j], gauss.weights[i] * gauss.weights[j] * hx * hy});
    return;
  }
  if (hx > 2.0 * hy) {
    local_rule(a, xm, c, d, x0, y0, gauss, duffy, depth + 1, out);
    local_rule(xm, b, c, d, x0, y0, gauss, duffy, depth + 1, out);
  } else if (hy > 2.0 * hx) {
    local_rule(a, b, c, ym, x0, y0, gauss, duffy, depth + 1, out);
    local_rule(a, b, ym, d, x0, y0, gauss, duffy, depth + 1, out);
  } else {
    local_rule(a, xm, c, ym, x0, y0, gauss, duffy, depth + 1, out);
    local_rule(xm, b, c, ym, x0, y0, gauss, duffy, depth + 1, out);
    local_rule(a, xm, ym, d, x0, y0, gauss, duffy, depth + 1, out);
    local_rule(xm, b, ym, d, x0, y0, gauss, duffy, depth + 1, out);
  }
}

}  // namespace detail

// Kernel weights kappa_q replacing weight_q/(z - zeta_q) for the nodes of cell c (upper frame), from the
// tensor interpolant of the w-density and of Z(w). Empty when the coarse rule is adequate.
inline std::vector<cplx> near_kernel_weights(const BandMesh& M, std::size_t c, cplx z, cplx w0) {
  const auto& C = M.cells[c];
  if (std::abs(z - C.center) > 4.0 * C.radius) return {};
  const double hu = 0.5 * (C.u_hi - C.u_lo), ht = 0.5 * (C.t_hi - C.t_lo);
  const double x0 = (w0.real() - C.u_lo) / hu - 1.0, y0 = (w0.imag() - C.t_lo) / ht - 1.0;
  if (std::max(std::abs(x0), std::abs(y0)) - 1.0 > 1.5) return {};
  static thread_local std::vector<detail::LocalNode> nodes;
  nodes.clear();
  const Rule duffy = gauss_legendre(M.order + 4);
  detail::local_rule(-1.0, 1.0, -1.0, 1.0, x0, y0, M.rule, duffy, 0, nodes);
  const int n = M.order;
  std::vector<double> lu(n), lt(n);
  auto z_interp = [&](double xi, double eta) {
    M.basis->eval(xi, lu.data());
    M.basis->eval(eta, lt.data());
    cplx s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += lu[i] * lt[j] * M.zeta[M.node(c, i, j)];
    return s;
  };
  const bool inside = std::abs(x0) <= 1.0 && std::abs(y0) <= 1.0;
  const cplx z_eff = inside ? z_interp(x0, y0) : z;
  std::vector<cplx> kappa(M.per_cell(), 0.0);
  for (const auto& nd : nodes) {
    const cplx zr = z_interp(nd.xi, nd.eta);  // also fills lu, lt at the node
    const cplx diff = z_eff - zr;
    if (std::abs(diff) < 1e-14 * (1.0 + std::abs(z))) continue;  // node exclusion
    const cplx k = nd.weight * hu * ht / diff;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) kappa[std::size_t(i * n + j)] += lu[i] * lt[j] * k;
  }
  return kappa;
}

struct GenerationRecord {
  int m = 0;          // generation index of g^m
  double b = 0.0;     // factor b_{m-1} used to build g^m
  double x = 0.0;     // x_m
  double y = 0.0;     // y_m
  double K = 0.0;
  double residual = 0.0;
  double ratio = 0.0;  // x_m / x_{m-1}
  bool zero = false;   // dbar data vanished identically
};

struct RegionMargin {
  std::string name;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst = inf;  // min over samples of (bound - value)/bound
  cplx worst_at{};
};

struct VariationReport {
  int m = 0;  // checks of generation m+1 against the bounds with b_m, x_m, y_m
  std::vector<RegionMargin> regions;
  bool ok() const {
    return std::all_of(regions.begin(), regions.end(), [](const RegionMargin& r) { return r.violations == 0; });
  }
};

struct Certificate {
  int generations = 0;
  bool passed = false;
  double disagreement = 0.0;  // sup over gap samples of the even/odd final families
  cplx disagreement_at{};
  double residual = 0.0;      // sup over the Omega grid
  cplx residual_at{};
  std::size_t grid_points = 0;
  double sup_norm = 0.0;      // sampled sup of the final families
  double case_i_value = 0.0, case_i_bound = 0.0;
  double tail_bound = 0.0;
  std::string failure;
};

struct StitchResult {
  std::vector<GenerationRecord> trace;
  std::vector<VariationReport> variations;
  std::vector<double> K_history;
  std::vector<std::string> restart_reasons;
  int restarts = 0;
  bool schedule_ok = true;
  double N = 0.0, mu = 0.0, interpolation_constant = 0.0, kappa = 0.0, beta_phi = 0.0, min_cell_modulus = 0.0;
  int p = 0;
  std::size_t cells = 0, mesh_nodes = 0;
  Certificate certificate;
};

// The alternating stitching iteration on the Denjoy model E subset of R.
class Stitcher {
 public:
  Stitcher(const Stitcher&) = delete;
  Stitcher& operator=(const Stitcher&) = delete;

  Stitcher(IntervalUnion E, StitchOptions opt = {})
      : opt_(lift_beta1(std::move(opt), E)),
        E_(std::move(E)),
        upper_(E_, Side::upper),
        betas_(BetaPair::from_beta1(opt_.beta1)),
        B_(separation_A(opt_.beta1)),
        chart_(upper_, opt_.beta1 - opt_.chart_margin) {
    if (opt_.grid < 2 || opt_.grid % 2) throw ConfigError("Stitcher: grid must be even and at least 2");
    if (!(opt_.r > 0.0 && opt_.r < 1.0)) throw ConfigError("Stitcher: need 0 < r < 1");
    if (opt_.max_generations < 2) throw ConfigError("Stitcher: need at least two generations");
    if (!(opt_.tolerance > 0.0)) throw ConfigError("Stitcher: tolerance must be positive");
    ExtractionOptions eo;
    eo.y_floor = opt_.y_floor;
    seq_ = extract_sequence(upper_, betas_, B_, eo);
    family_ = std::make_unique<InterpFamily>(seq_.points, generation_split(seq_.points, opt_.separation),
                                             [this](cplx z) { return chart_(z); });
    mesh_ = build_band_mesh(upper_, seq_, opt_.order);
    phi_.emplace_back(HarmonicField(E_, Side::upper), betas_.beta1, seq_.beta_hi);
    phi_.emplace_back(HarmonicField(E_, Side::lower), betas_.beta1, seq_.beta_hi);
    data_ = make_test_data(
        E_, opt_.preset, [this](cplx z) { return in_domain(Side::upper, z); },
        [this](cplx z) { return in_domain(Side::lower, z); });
    // mesh node probes, both sides
    for (std::size_t s = 0; s < 2; ++s) {
      node_probe_[s].reserve(mesh_.size());
      for (cplx zeta : mesh_.zeta) node_probe_[s].push_back(add_probe(s == 0 ? zeta : std::conj(zeta)));
    }
    // band samples: corners, center and random interior points of every cell
    std::mt19937 rng(opt_.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const auto& c : seq_.cells) {
      std::vector<std::pair<double, double>> uv{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0.5, 0.5}};
      for (int k = 0; k < opt_.random_per_cell; ++k) uv.push_back({U(rng), U(rng)});
      for (auto [a, b] : uv) {
        const cplx z = level_point(upper_, cplx(c.u_lo + a * (c.u_hi - c.u_lo), c.t_lo + b * (c.t_hi - c.t_lo)), c.node);
        band_samples_[0].push_back(add_probe(z));
        band_samples_[1].push_back(add_probe(std::conj(z)));
      }
    }
    for (const auto& g : upper_.gaps()) {
      if (!g.bounded()) continue;
      for (int k = 0; k < 64; ++k) gap_samples_.push_back(add_probe(cplx(g.lo + (g.hi - g.lo) * (k + 0.5) / 64, 0.0)));
    }
    for (int a = 0; a < 24; ++a)
      for (int b = 0; b < 24; ++b) {
        const cplx z(-4.0 + 8.0 * (a + 0.5) / 24, -3.0 + 6.0 * (b + 0.5) / 24);
        coarse_grid_.push_back(add_probe(z));
      }
  }

  const StitchOptions& options() const { return opt_; }
  const BetaPair& betas() const { return betas_; }
  double B() const { return B_; }
  const SeparatedSequence& sequence() const { return seq_; }
  const InterpFamily& family() const { return *family_; }
  const BandMesh& mesh() const { return mesh_; }
  const TestData& test_data() const { return data_; }
  const ExtendedChart& chart() const { return chart_; }
  const PartitionOfUnity& phi(Side s) const { return phi_[side_index(s)]; }
  double K() const { return K_; }

  bool in_domain(Side s, cplx z) const { return chart_.contains(s == Side::upper ? z : std::conj(z)); }

  std::size_t add_probe(cplx z) {
    Probe p;
    p.z = z;
    probes_.push_back(std::move(p));
    return probes_.size() - 1;
  }
  cplx probe_point(std::size_t p) const { return probes_[p].z; }

  // g^m at a probe.
  CVec g(std::size_t p, int m) {
    Probe& P = probes_[p];
    if (P.g.size() <= std::size_t(m)) P.g.resize(std::size_t(m) + 1), P.G.resize(std::size_t(m) + 1);
    if (P.g[std::size_t(m)]) return *P.g[std::size_t(m)];
    const Side s = generation_side(m);
    if (!in_domain(s, P.z)) throw DomainError("Stitcher: point outside the family's extended domain");
    CVec out;
    if (m == 0) out = data_.upper.g(P.z);
    else if (m == 1) out = data_.lower.g(P.z);
    else {
      if (std::size_t(m) >= gens_.size() || !gens_[std::size_t(m)]) throw ConsistencyError("Stitcher: generation not built");
      out = G(p, m) + correction(p, m);
    }
    P.g[std::size_t(m)] = out;
    return *P.g[std::size_t(m)];
  }

  // G^m = phi g^{m-2} + (1 - phi) g^{m-1}, m >= 2.
  CVec G(std::size_t p, int m) {
    Probe& P = probes_[p];
    if (P.G.size() <= std::size_t(m)) P.g.resize(std::size_t(m) + 1), P.G.resize(std::size_t(m) + 1);
    if (P.G[std::size_t(m)]) return *P.G[std::size_t(m)];
    const Side s = generation_side(m);
    if (!in_domain(s, P.z)) throw DomainError("Stitcher: point outside the family's extended domain");
    const double ph = phi_[side_index(s)](P.z);
    CVec out = blend(ph, [&] { return g(p, m - 2); }, [&] { return g(p, m - 1); });
    probes_[p].G[std::size_t(m)] = out;
    return *probes_[p].G[std::size_t(m)];
  }

  // dbar G^m = (g^{m-2} - g^{m-1}) dbar phi.
  CVec dbar_G(std::size_t p, int m) {
    const Side s = generation_side(m);
    const cplx dphi = phi_[side_index(s)].dbar(probes_[p].z);
    if (dphi == 0.0) return CVec::Zero(Eigen::Index(data_.data.n()));
    return (g(p, m - 2) - g(p, m - 1)) * dphi;
  }

  // Builds the dbar data of generation m (>= 2) with factor b.
  void build_generation(int m, double b) {
    if (m < 2) throw DomainError("build_generation: m must be at least 2");
    if (!(b > 0.0 && b < 1.0)) throw DomainError("build_generation: need 0 < b < 1");
    const Side s = generation_side(m);
    const std::size_t si = side_index(s), n = data_.data.n();
    Generation gen;
    gen.m = m;
    gen.b = b;
    gen.log_b = std::log(b);
    gen.G.resize(mesh_.size());
    gen.dG.resize(mesh_.size());
    const Eigen::Index P = Eigen::Index(n * (n - 1) / 2);
    gen.payload = Eigen::MatrixXcd::Zero(Eigen::Index(mesh_.size()), P);
    bool all_zero = true;
    for (std::size_t q = 0; q < mesh_.size(); ++q) {
      const std::size_t p = node_probe_[si][q];
      gen.G[q] = G(p, m);
      gen.dG[q] = dbar_G(p, m);
      if (gen.dG[q].isZero(0.0)) continue;
      all_zero = false;
      const SideData& sd = side_data(p, s);
      const cplx w = s == Side::upper ? mesh_.w[q] : std::conj(mesh_.w[q]);
      const cplx scale = mesh_.jac[q] * std::exp(-gen.log_b * w) / sd.h[mesh_.cell_of[q]];
      Eigen::Index col = 0;
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k, ++col)
          gen.payload(Eigen::Index(q), col) = scale * (gen.G[q](Eigen::Index(j)) * gen.dG[q](Eigen::Index(k)) -
                                                       gen.G[q](Eigen::Index(k)) * gen.dG[q](Eigen::Index(j)));
    }
    gen.zero = all_zero;
    if (gens_.size() <= std::size_t(m)) gens_.resize(std::size_t(m) + 1);
    gens_[std::size_t(m)] = std::move(gen);
  }

  bool generation_zero(int m) const { return gens_.at(std::size_t(m))->zero; }
  double generation_b(int m) const { return gens_.at(std::size_t(m))->b; }

  // Drops generations >= m and every memoized value depending on them.
  void truncate(int m) {
    if (gens_.size() > std::size_t(m)) gens_.resize(std::size_t(m));
    for (auto& P : probes_) {
      if (P.g.size() > std::size_t(m)) P.g.resize(std::size_t(m));
      if (P.G.size() > std::size_t(m)) P.G.resize(std::size_t(m));
    }
  }

  // a_{j,k}^m(z) on its own: (1/pi) sum_l int_{D_l} b^{W(z)-W(zeta)} G_j dbar G_k (zeta)/(z - zeta)
  // h_l(z)/h_l(zeta) dA(zeta).
  cplx dbar_coefficient(int m, std::size_t j, std::size_t k, cplx z) {
    const Generation& gen = generation(m);
    const Side s = generation_side(m);
    Eigen::MatrixXcd pay(Eigen::Index(mesh_.size()), 1);
    for (std::size_t q = 0; q < mesh_.size(); ++q) {
      const SideData& sd = side_data(node_probe_[side_index(s)][q], s);
      const cplx w = s == Side::upper ? mesh_.w[q] : std::conj(mesh_.w[q]);
      pay(Eigen::Index(q), 0) = mesh_.jac[q] * std::exp(-gen.log_b * w) / sd.h[mesh_.cell_of[q]] *
                                gen.G[q](Eigen::Index(j)) * gen.dG[q](Eigen::Index(k));
    }
    const std::size_t p = add_probe(z);
    return integrate(p, s, gen.log_b, pay)(0);
  }
  // G_j dbar G_k at z, the expected dbar of a_{j,k}.
  cplx dbar_density(int m, std::size_t j, std::size_t k, cplx z) {
    const std::size_t p = add_probe(z);
    return G(p, m)(Eigen::Index(j)) * dbar_G(p, m)(Eigen::Index(k));
  }

  // The full run: K calibration, generations until x_M/(1-r) drops below tolerance/2,
  // variation checks and the final certificate.
  StitchResult run() {
    StitchResult res;
    res.N = data_.N;
    res.mu = data_.data.mu;
    res.interpolation_constant = family_->interpolation_constant();
    res.kappa = family_->kappa();
    res.p = family_->split().p;
    res.beta_phi = seq_.beta_hi;
    res.cells = seq_.cells.size();
    res.mesh_nodes = mesh_.size();
    res.min_cell_modulus = schwarz_cell_bound(*family_, upper_, seq_, 2).min_modulus;

    const double x1 = measure_x(1), y1 = measure_y(1);
    K_ = opt_.K0;
    bool calibrated = false;
    for (;;) {
      truncate(2);
      res.trace.clear();
      res.variations.clear();
      res.trace.push_back({1, 0.0, x1, y1, K_, residual(1), 0.0, false});
      bool restart = false;
      for (int m = 1; m + 1 <= opt_.max_generations; ++m) {
        const GenerationRecord& prev = res.trace.back();
        const double b = feedback_factor(m, opt_.r, K_, x1, prev.y, betas_.beta2);
        build_generation(m + 1, b);
        GenerationRecord rec;
        rec.m = m + 1;
        rec.b = b;
        rec.K = K_;
        rec.zero = generation_zero(m + 1);
        rec.x = measure_x(m + 1);
        rec.y = measure_y(m + 1);
        rec.residual = residual(m + 1);
        rec.ratio = prev.x > 0.0 ? rec.x / prev.x : 0.0;
        const double xy = prev.x * prev.y;
        if (!calibrated) {
          calibrated = true;
          const double obs = xy > 0.0 ? observed_K(m + 1, b, xy) : 0.0;
          if (obs > 0.0) {
            K_ = 2.0 * obs;
            res.K_history.push_back(K_);
            restart = true;
            break;
          }
        }
        auto var = verify_variations(m, prev.x, prev.y);
        const double bar = m == 1 ? opt_.r : opt_.r * prev.x;
        const bool ratio_bad = rec.x > opt_.ratio_safety * bar;
        res.variations.push_back(var);
        res.trace.push_back(rec);
        if (!var.ok() || ratio_bad) {
          std::string why = "m=" + std::to_string(m + 1) + ":";
          if (ratio_bad) why += " x ratio";
          for (const auto& R : var.regions)
            if (R.violations) why += " " + R.name;
          res.restart_reasons.push_back(why);
          if (res.restarts < opt_.max_restarts) {
            ++res.restarts;
            K_ *= 2.0;
            res.K_history.push_back(K_);
            restart = true;
          } else {
            res.schedule_ok = false;
          }
          if (restart) break;
        }
        if (rec.zero) break;
        // current step plus geometric tail
        if (rec.x / (1.0 - opt_.r) < 0.5 * opt_.tolerance) break;
      }
      if (!restart) break;
    }
    res.certificate = certify(res);
    return res;
  }

  // Sampled sup of |g^m - g^{m-1}| over the band where generation m+1 blends, and over the gaps.
  double measure_x(int m) {
    double x = 0.0;
    for (std::size_t p : band_samples_[side_index(generation_side(m + 1))]) x = std::max(x, sup_norm(g(p, m) - g(p, m - 1)));
    for (std::size_t p : gap_samples_) x = std::max(x, sup_norm(g(p, m) - g(p, m - 1)));
    return x;
  }
  double measure_y(int m) {
    double y = 0.0;
    for (std::size_t p : band_samples_[side_index(generation_side(m + 1))]) y = std::max(y, sup_norm(G(p, m + 1)));
    return y;
  }

  // max |sum f_j g_j^m - 1| over band and gap samples inside the family's domain.
  double residual(int m) {
    double r = 0.0;
    const Side s = generation_side(m);
    auto visit = [&](std::size_t p) {
      if (!in_domain(s, probes_[p].z)) return;
      r = std::max(r, std::abs(pairing(f_at(p), g(p, m)) - 1.0));
    };
    for (auto p : band_samples_[0]) visit(p);
    for (auto p : band_samples_[1]) visit(p);
    for (auto p : gap_samples_) visit(p);
    return r;
  }

  // Growth bounds on g^{m+1} and its regional variations, with the running K.
  VariationReport verify_variations(int m, double x, double y) {
    VariationReport rep;
    rep.m = m;
    const Side s = generation_side(m + 1);
    const double b = generation_b(m + 1), xy = x * y, b1 = betas_.beta1, b2 = betas_.beta2;
    RegionMargin all{"4.4", 0, 0, inf}, above{"above-delta1", 0, 0, inf}, middle{"6.2", 0, 0, inf},
        below{"6.3", 0, 0, inf}, V{"V", 0, 0, inf};
    cplx z;
    auto rec = [&z](RegionMargin& R, double bound, double value) {
      ++R.samples;
      const double margin = bound > 0.0 ? (bound - value) / bound : (value == 0.0 ? 0.0 : -inf);
      if (margin < -1e-9) ++R.violations;
      if (margin < R.worst) R.worst = margin, R.worst_at = z;
    };
    for (std::size_t p : calibration_samples()) {
      z = probes_[p].z;
      if (!in_domain(s, z)) continue;
      const double om = phi_[side_index(s)].omega(z);
      const CVec gn = g(p, m + 1);
      const CVec Gn = G(p, m + 1);
      rec(all, K_ * std::pow(b, om - b2) * xy, sup_norm(gn - Gn));
      if (om <= b1) rec(above, K_ * std::pow(b, -b2) * xy, sup_norm(gn - g(p, m - 1)));
      if (om > b1 && om < b2) {
        double worst = -inf;
        for (Eigen::Index j = 0; j < gn.size(); ++j)
          worst = std::max(worst, std::abs(gn(j)) - std::abs(Gn(j)));
        rec(middle, K_ * std::pow(b, b1 - b2) * xy, std::max(worst, 0.0));
      }
      if (om >= b2) rec(below, K_ * xy, sup_norm(gn - g(p, m)));
      if (om > 1.0 && in_domain(generation_side(m), z)) rec(V, K_ * std::pow(b, 1.0 - b2) * xy, sup_norm(gn - g(p, m)));
    }
    rep.regions = {all, above, middle, below, V};
    return rep;
  }

  std::vector<std::size_t> calibration_samples() const {
    std::vector<std::size_t> out = band_samples_[0];
    out.insert(out.end(), band_samples_[1].begin(), band_samples_[1].end());
    out.insert(out.end(), gap_samples_.begin(), gap_samples_.end());
    out.insert(out.end(), coarse_grid_.begin(), coarse_grid_.end());
    return out;
  }
  const std::vector<std::size_t>& gap_samples() const { return gap_samples_; }
  const std::vector<std::size_t>& band_samples(Side s) const { return band_samples_[side_index(s)]; }

  // Final families: even limit on the upper extended domain, odd limit on the lower one.
  Certificate certify(const StitchResult& res) {
    Certificate c;
    const int M = res.trace.back().m;
    c.generations = M;
    const int me = M % 2 == 0 ? M : M - 1, mo = M % 2 == 1 ? M : M - 1;
    for (std::size_t p : gap_samples_) {
      const double d = sup_norm(g(p, me) - g(p, mo));
      if (d > c.disagreement) c.disagreement = d, c.disagreement_at = probes_[p].z;
    }
    const int n = opt_.grid;
    double x0 = inf, x1 = -inf, L = 0.0;
    for (const auto& gap : upper_.gaps())
      if (gap.bounded()) x0 = std::min(x0, gap.lo), x1 = std::max(x1, gap.hi), L = std::max(L, gap.length());
    const double cx = 0.5 * (x0 + x1), hx = 1.01 * opt_.window * L, hy = 2.0 * hx / 3.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        // even point count per axis, so no point lands on the real axis
        const cplx z(cx - hx + 2.0 * hx * a / (n - 1), -hy + 2.0 * hy * b / (n - 1));
        const std::size_t p = add_probe(z);
        const int m = z.imag() > 0.0 ? me : mo;
        const CVec gv = g(p, m);
        const double r = std::abs(pairing(f_at(p), gv) - 1.0);
        if (r > c.residual) c.residual = r, c.residual_at = z;
        c.sup_norm = std::max(c.sup_norm, sup_norm(gv));
        ++c.grid_points;
      }
    // case (i): above delta1 on the upper side, telescoped over odd k
    double tele = data_.N;
    for (std::size_t k = 0; k + 1 < res.trace.size(); ++k)
      if (res.trace[k].m % 2 == 1) tele += K_ * std::pow(res.trace[k + 1].b, -betas_.beta2) * res.trace[k].x * res.trace[k].y;
    c.case_i_bound = tele;
    for (std::size_t p : coarse_grid_) {
      const cplx z = probes_[p].z;
      if (z.imag() <= 0.0 || phi_[0].omega(z) > betas_.beta1) continue;
      c.case_i_value = std::max(c.case_i_value, sup_norm(g(p, me)));
    }
    c.tail_bound = res.trace.back().x / (1.0 - opt_.r);
    if (c.disagreement > opt_.tolerance) c.failure = "disagreement on the gaps exceeds the tolerance";
    else if (c.residual > opt_.tolerance) c.failure = "corona residual on the grid exceeds the tolerance";
    else if (!res.trace.back().zero && c.tail_bound >= 0.5 * opt_.tolerance)
      c.failure = "generation cap reached before the tail bound fell below tolerance/2";
    c.passed = c.failure.empty();
    return c;
  }

  CVec f_at(std::size_t p) {
    Probe& P = probes_[p];
    if (P.f.size() == 0) P.f = data_.data(P.z);
    return P.f;
  }

 private:
  struct Generation {
    int m = 0;
    double b = 0.0, log_b = 0.0;
    std::vector<CVec> G, dG;
    Eigen::MatrixXcd payload;  // per node: antisymmetric dbar data times the zeta-side factors
    bool zero = false;
  };
  struct SideData {
    bool ready = false;
    cplx W;
    std::vector<cplx> h;
    std::vector<std::pair<std::size_t, std::vector<cplx>>> near;  // cell, replacement kernel weights
  };
  struct Probe {
    cplx z;
    CVec f;
    std::array<SideData, 2> side;
    std::vector<std::optional<CVec>> g, G;
  };

  StitchOptions opt_;
  IntervalUnion E_;
  HarmonicField upper_;
  BetaPair betas_;
  double B_;
  ExtendedChart chart_;
  SeparatedSequence seq_;
  std::unique_ptr<InterpFamily> family_;
  BandMesh mesh_;
  std::vector<PartitionOfUnity> phi_;
  TestData data_;
  std::vector<Probe> probes_;
  std::array<std::vector<std::size_t>, 2> node_probe_, band_samples_;
  std::vector<std::size_t> gap_samples_, coarse_grid_;
  std::vector<std::optional<Generation>> gens_;
  double K_ = 1.0;
  std::array<std::optional<std::pair<cplx, cplx>>, 2> hint_;  // last (z, w) in the upper frame per side

  const Generation& generation(int m) const {
    if (std::size_t(m) >= gens_.size() || !gens_[std::size_t(m)]) throw ConsistencyError("Stitcher: generation not built");
    return *gens_[std::size_t(m)];
  }

  const SideData& side_data(std::size_t p, Side s) {
    SideData& sd = probes_[p].side[side_index(s)];
    if (sd.ready) return sd;
    const cplx z = probes_[p].z;
    const cplx zu = s == Side::upper ? z : std::conj(z);  // upper frame
    if (!chart_.contains(zu)) throw DomainError("Stitcher: point outside the extended domain");
    auto& hint = hint_[side_index(s)];
    cplx w;
    if (hint && zu.imag() > 0.0 && hint->first.imag() > 0.0) w = chart_.preimage_near(zu, hint->first, hint->second);
    else if (hint && std::abs(zu - hint->first) < 0.2 * std::abs(zu.imag()) && zu.imag() * hint->first.imag() > 0.0)
      w = chart_.preimage_near(zu, hint->first, hint->second);
    else w = chart_.preimage(zu);
    hint = std::pair{zu, w};
    auto h = family_->eval_chart(chart_.to_disk(w));
    const cplx Wu = upper_.W(zu);
    SideData out;
    out.ready = true;
    out.W = s == Side::upper ? Wu : std::conj(Wu);
    out.h.resize(h.size());
    for (std::size_t l = 0; l < h.size(); ++l) out.h[l] = s == Side::upper ? h[l] : std::conj(h[l]);
    for (std::size_t c = 0; c < mesh_.cells.size(); ++c) {
      auto kappa = near_kernel_weights(mesh_, c, zu, Wu);
      if (kappa.empty()) continue;
      if (s == Side::lower)
        for (auto& v : kappa) v = std::conj(v);
      out.near.push_back({c, std::move(kappa)});
    }
    probes_[p].side[side_index(s)] = std::move(out);
    return probes_[p].side[side_index(s)];
  }

  // (1/pi) E(z) sum_l h_l(z) sum_{q in l} kernel_q(z) payload_q.
  CVec integrate(std::size_t p, Side s, double log_b, const Eigen::MatrixXcd& payload) {
    const SideData& sd = side_data(p, s);
    const cplx z = probes_[p].z;
    const Eigen::Index P = payload.cols();
    const std::size_t per = mesh_.per_cell();
    std::vector<const std::vector<cplx>*> override_of(mesh_.cells.size(), nullptr);
    for (const auto& [c, k] : sd.near) override_of[c] = &k;
    CVec total = CVec::Zero(P);
    CVec acc(P);
    for (std::size_t c = 0; c < mesh_.cells.size(); ++c) {
      acc.setZero();
      const std::size_t first = mesh_.cells[c].first;
      if (override_of[c]) {
        const auto& k = *override_of[c];
        for (std::size_t i = 0; i < per; ++i) acc += k[i] * payload.row(Eigen::Index(first + i)).transpose();
      } else {
        for (std::size_t i = 0; i < per; ++i) {
          const std::size_t q = first + i;
          const cplx zeta = s == Side::upper ? mesh_.zeta[q] : std::conj(mesh_.zeta[q]);
          acc += (mesh_.weight[q] / (z - zeta)) * payload.row(Eigen::Index(q)).transpose();
        }
      }
      total += sd.h[c] * acc;
    }
    return total * (std::exp(log_b * sd.W) / pi);
  }

  // sum_k (a_jk - a_kj) f_k for generation m at a probe.
  CVec correction(std::size_t p, int m) {
    const Generation& gen = generation(m);
    const std::size_t n = data_.data.n();
    CVec out = CVec::Zero(Eigen::Index(n));
    if (gen.zero) return out;
    const CVec A = integrate(p, generation_side(m), gen.log_b, gen.payload);
    const CVec f = f_at(p);
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k, ++col) {
        out(Eigen::Index(j)) += A(col) * f(Eigen::Index(k));
        out(Eigen::Index(k)) -= A(col) * f(Eigen::Index(j));
      }
    return out;
  }

  // sup over calibration samples of |g^m - G^m| / (b^(omega - beta2) x y).
  double observed_K(int m, double b, double xy) {
    double k = 0.0;
    const Side s = generation_side(m);
    for (std::size_t p : calibration_samples()) {
      const cplx z = probes_[p].z;
      if (!in_domain(s, z)) continue;
      const double om = phi_[side_index(s)].omega(z);
      k = std::max(k, sup_norm(g(p, m) - G(p, m)) / (std::pow(b, om - betas_.beta2) * xy));
    }
    return k;
  }
};

}  // namespace corona
