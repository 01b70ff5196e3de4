#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "corona/common.hpp"
#include "corona/graph_geometry.hpp"
#include "corona/quadrature.hpp"

namespace corona {

// Schwarz-Christoffel map of the upper half plane onto the region to the left of an unbounded
// polyline: the boundary arrives from infinity along dir_in, visits the finite vertices in order and
// leaves along dir_out. Infinity is fixed. With prevertices w_k,
//   f'(w) = A prod (w - w_k)^(beta_k),   beta_k = -(turning angle at z_k)/pi,
// normalized by w_1 = 0, |A| = 1 and arg A = arg dir_out.
class PolylineMap {
 public:
  struct Diagnostics {
    std::vector<double> prevertices;
    std::vector<double> residuals;  // relative side-length errors
    int iterations = 0;
    double max_residual = 0.0;
  };

  // Plans a z-plane path from the reference point to z that stays inside the region.
  using PathPlanner = std::function<std::vector<cplx>(const PolylineMap&, cplx z)>;

  PolylineMap(std::vector<cplx> vertices, cplx dir_in, cplx dir_out, PathPlanner planner = {})
      : z_(std::move(vertices)), planner_(std::move(planner)) {
    if (z_.empty()) throw DomainError("PolylineMap: need at least one finite vertex");
    const std::size_t n = z_.size();
    std::vector<cplx> dirs{dir_in / std::abs(dir_in)};
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const cplx d = z_[k + 1] - z_[k];
      if (std::abs(d) == 0.0) throw DomainError("PolylineMap: repeated vertex");
      dirs.push_back(d / std::abs(d));
    }
    dirs.push_back(dir_out / std::abs(dir_out));
    beta_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double turn = std::arg(dirs[k + 1] / dirs[k]);
      if (std::abs(turn) >= pi - 1e-9) throw DomainError("PolylineMap: degenerate vertex angle");
      beta_[k] = -turn / pi;
    }
    A_ = dirs.back();
    for (std::size_t k = 0; k < n; ++k) jacobi_.push_back(gauss_jacobi(jacobi_nodes, 0.0, beta_[k]));
    legendre_ = gauss_legendre(legendre_nodes);
    solve_prevertices();
    scale_ = std::max(1.0, w_.back() - w_.front());
    w_ref_ = cplx(0.5 * (w_.front() + w_.back()), scale_);
    z_ref_ = (*this)(w_ref_);
  }

  std::size_t size() const { return z_.size(); }
  const std::vector<cplx>& vertices() const { return z_; }
  const std::vector<double>& prevertices() const { return w_; }
  const std::vector<double>& exponents() const { return beta_; }
  const Diagnostics& diagnostics() const { return diag_; }
  cplx reference_point() const { return z_ref_; }
  cplx reference_preimage() const { return w_ref_; }

  cplx derivative(cplx w) const { return A_ * std::exp(log_product(w, -1)); }

  // Forward map on the closed upper half plane: integrate from the nearest prevertex.
  cplx operator()(cplx w) const {
    std::size_t k = 0;
    for (std::size_t j = 1; j < w_.size(); ++j)
      if (std::abs(w - w_[j]) < std::abs(w - w_[k])) k = j;
    return z_[k] + integrate_from(k, w);
  }

  // Inverse by ODE continuation dw/ds = dz/f'(w) along a planned path, then Newton.
  cplx inverse(cplx z) const {
    std::vector<cplx> path = planner_ ? planner_(*this, z) : default_path(z);
    cplx w = w_ref_, zc = z_ref_;
    for (cplx target : path) {
      w = continue_along(w, zc, target);
      zc = target;
    }
    w = continue_along(w, zc, z);
    return polish(w, z);
  }

  // Inverse from a nearby known pair (the straight segment z_hint -> z must lie in the region).
  cplx inverse_from(cplx z, cplx z_hint, cplx w_hint) const { return polish(continue_along(w_hint, z_hint, z), z); }

  // Path through a point high above everything: valid for regions containing every upward vertical ray
  // from their points.
  std::vector<cplx> default_path(cplx z) const {
    double top = std::max(z_ref_.imag(), z.imag());
    for (cplx v : z_) top = std::max(top, v.imag());
    top += 1.0 + 0.5 * std::abs(z - z_ref_);
    return {cplx(z_ref_.real(), top), cplx(z.real(), top)};
  }

  cplx polish(cplx w, cplx z) const {
    for (int it = 0; it < 30; ++it) {
      const cplx dz = (*this)(w) - z;
      if (std::abs(dz) <= 1e-13 * (1.0 + std::abs(z))) return w;
      cplx step = dz / derivative(w);
      cplx next = w - step;
      while (next.imag() < 0.0 && std::abs(step) > 1e-300) step *= 0.5, next = w - step;
      w = next;
    }
    const cplx dz = (*this)(w) - z;
    if (std::abs(dz) > 1e-9 * (1.0 + std::abs(z)))
      throw ConvergenceError("PolylineMap::inverse: Newton polish did not converge");
    return w;
  }

  // Preimage on the real axis of a boundary point on edge e (0: incoming ray, n: outgoing ray,
  // otherwise the segment z_{e-1} -> z_e).
  double boundary_preimage(std::size_t e, cplx z) const {
    const std::size_t n = z_.size();
    if (e > n) throw DomainError("boundary_preimage: no such edge");
    std::size_t anchor = e == 0 ? 0 : e - 1;
    double lo, hi;
    const double target = std::abs(z - z_[anchor]);
    auto dist = [&](double w) { return std::abs((*this)(cplx(w, 0.0)) - z_[anchor]); };
    if (e == 0) {
      lo = 0.0, hi = 1.0;
      while (dist(w_[0] - hi) < target) hi *= 2;
      auto g = [&](double t) { return dist(w_[0] - t); };
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double m = 0.5 * (lo + hi);
        (g(m) < target ? lo : hi) = m;
      }
      return w_[0] - 0.5 * (lo + hi);
    }
    lo = w_[anchor];
    if (e == n) {
      hi = lo + 1.0;
      while (dist(hi) < target) hi = lo + 2 * (hi - lo);
    } else {
      hi = w_[e];
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1 + std::abs(hi)); ++it) {
      const double m = 0.5 * (lo + hi);
      (dist(m) < target ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
  }

 private:
  static constexpr int jacobi_nodes = 16;
  static constexpr int legendre_nodes = 10;

  std::vector<cplx> z_;
  std::vector<double> beta_;
  std::vector<double> w_;
  std::vector<Rule> jacobi_;
  Rule legendre_;
  cplx A_;
  double scale_ = 1.0;
  cplx w_ref_, z_ref_;
  Diagnostics diag_;
  PathPlanner planner_;

  // sum_j beta_j Log(w - w_j) over j != skip, branches from the closed upper half plane.
  cplx log_product(cplx w, long skip) const {
    cplx s = 0.0;
    for (std::size_t j = 0; j < w_.size(); ++j)
      if (long(j) != skip && beta_[j] != 0.0) s += beta_[j] * std::log(upper_closed(w - w_[j]));
    return s;
  }

  double nearest_distance(cplx p, long skip) const {
    double d = inf;
    for (std::size_t j = 0; j < w_.size(); ++j)
      if (long(j) != skip) d = std::min(d, std::abs(p - w_[j]));
    return d;
  }

  // Integral of f' along the segment w_k -> target.
  cplx integrate_from(std::size_t k, cplx target) const {
    const cplx span = target - w_[k];
    const double L = std::abs(span);
    if (L == 0.0) return 0.0;
    const cplx u = span / L;
    const double dk = nearest_distance(w_[k], long(k));
    const double h0 = std::min(L, 0.5 * dk);
    // Singular first piece: t^beta_k absorbed by the Jacobi weight.
    const double b = beta_[k];
    const cplx uphase = std::exp((1.0 + b) * std::log(upper_closed(u)));
    cplx s = 0.0;
    const Rule& J = jacobi_[k];
    for (std::size_t i = 0; i < J.nodes.size(); ++i) {
      const double t = 0.5 * h0 * (1.0 + J.nodes[i]);
      s += J.weights[i] * std::exp(log_product(w_[k] + t * u, long(k)));
    }
    cplx total = A_ * uphase * std::pow(0.5 * h0, 1.0 + b) * s;
    // Regular remainder in steps sized by the distance to the nearest prevertex.
    double t = h0;
    while (t < L * (1 - 1e-15)) {
      const cplx p = w_[k] + t * u;
      const double h = std::min(L - t, 0.5 * nearest_distance(p, -1));
      cplx acc = 0.0;
      for (std::size_t i = 0; i < legendre_.nodes.size(); ++i) {
        const double tt = t + 0.5 * h * (1.0 + legendre_.nodes[i]);
        acc += legendre_.weights[i] * derivative(w_[k] + tt * u);
      }
      total += 0.5 * h * u * acc;
      t += h;
    }
    return total;
  }

  Eigen::VectorXd side_residuals() const {
    const std::size_t n = z_.size();
    Eigen::VectorXd r(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const cplx mid(0.5 * (w_[k] + w_[k + 1]), 0.0);
      const cplx side = integrate_from(k, mid) - integrate_from(k + 1, mid);
      r(k) = std::log(std::abs(side) / std::abs(z_[k + 1] - z_[k]));
    }
    return r;
  }

  void set_prevertices(const Eigen::VectorXd& sigma) {
    w_.assign(z_.size(), 0.0);
    for (std::size_t k = 0; k + 1 < z_.size(); ++k) w_[k + 1] = w_[k] + std::exp(sigma(k));
  }

  void solve_prevertices() {
    const std::size_t n = z_.size();
    const int m = int(n) - 1;
    Eigen::VectorXd sigma(std::max(m, 0));
    for (int k = 0; k < m; ++k) sigma(k) = std::log(std::abs(z_[k + 1] - z_[k]));
    set_prevertices(sigma);
    if (m == 0) {
      diag_.prevertices = w_;
      return;
    }
    // Newton with a finite-difference Jacobian, kept current by Broyden updates between refreshes.
    Eigen::VectorXd F = side_residuals();
    Eigen::MatrixXd J(m, m);
    auto refresh = [&] {
      const double h = 1e-7;
      for (int j = 0; j < m; ++j) {
        Eigen::VectorXd s2 = sigma;
        s2(j) += h;
        set_prevertices(s2);
        J.col(j) = (side_residuals() - F) / h;
      }
      set_prevertices(sigma);
    };
    refresh();
    int it = 0, since_refresh = 0;
    for (; it < 200 && F.cwiseAbs().maxCoeff() > 1e-12; ++it) {
      const Eigen::VectorXd step = J.partialPivLu().solve(-F);
      double lambda = 1.0;
      const double f0 = F.norm();
      Eigen::VectorXd trial, Ft;
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
        trial = sigma + lambda * step;
        set_prevertices(trial);
        Ft = side_residuals();
        if (Ft.allFinite() && Ft.norm() < (1.0 - 0.25 * lambda) * f0) {
          accepted = true;
          break;
        }
      }
      if (!accepted && since_refresh == 0) break;
      const Eigen::VectorXd ds = trial - sigma;
      if (accepted) {
      J += (Ft - F - J * ds) * ds.transpose() / ds.squaredNorm();
        sigma = trial;
        F = Ft;
      }
      set_prevertices(sigma);
      if (!accepted || lambda < 0.25 || ++since_refresh >= 20) {
        refresh();
        since_refresh = 0;
      }
    }
    diag_.iterations = it;
    diag_.prevertices = w_;
    diag_.residuals.clear();
    for (int k = 0; k < m; ++k) diag_.residuals.push_back(std::expm1(F(k)));
    diag_.max_residual = F.cwiseAbs().maxCoeff();
    if (!(diag_.max_residual <= 1e-6)) {
      std::ostringstream msg;
      msg << "PolylineMap: prevertex solve stalled, max relative side error " << diag_.max_residual;
      throw ConvergenceError(msg.str());
    }
  }

  // Adaptive RK4 (step doubling) for dw/ds = (z1 - z0)/f'(w), s in [0,1].
  cplx continue_along(cplx w, cplx z0, cplx z1) const {
    const cplx dz = z1 - z0;
    if (std::abs(dz) == 0.0) return w;
    auto rhs = [&](cplx v) { return dz / derivative(v); };
    auto rk4 = [&](cplx v, double h) {
      const cplx k1 = rhs(v), k2 = rhs(v + 0.5 * h * k1), k3 = rhs(v + 0.5 * h * k2), k4 = rhs(v + h * k3);
      return v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };
    double s = 0.0, h = 0.125;
    int steps = 0;
    while (s < 1.0) {
      h = std::min(h, 1.0 - s);
      const cplx full = rk4(w, h);
      const cplx half = rk4(rk4(w, 0.5 * h), 0.5 * h);
      const double err = std::abs(full - half);
      const double tol = 1e-9 * (1.0 + std::abs(half));
      if (err <= tol || h < 1e-12) {
        w = half + (half - full) / 15.0;
        s += h;
        if (err < 0.1 * tol) h *= 2;
      } else {
        h *= 0.5;
      }
      if (++steps > 100000) throw ConvergenceError("PolylineMap::inverse: continuation stalled");
    }
    return w;
  }
};

enum class MapKind { identity, schwarz_christoffel };

// Conformal map from the upper (lower) half plane onto the region above (below) a Lipschitz graph,
// fixing infinity with order-preserving boundary correspondence.
class DomainMap {
 public:
  static constexpr std::size_t max_breakpoints = 8;

  DomainMap(const LipschitzGraph& g, Side side) : graph_(g), side_(side) {
    const auto& br = g.breakpoints();
    if (br.size() > max_breakpoints) throw ConfigError("build_map: more than 8 breakpoints");
    if (br.empty()) {
      kind_ = g.flat() ? MapKind::identity : MapKind::schwarz_christoffel;
      rotation_ = std::polar(1.0, std::atan(g.slopes()[0]));
      return;
    }
    kind_ = MapKind::schwarz_christoffel;
    std::vector<cplx> v;
    for (double x : br) v.push_back(reflect(g.point(x)));
    const cplx din = reflect(std::polar(1.0, std::atan(g.slopes().front())));
    const cplx dout = reflect(std::polar(1.0, std::atan(g.slopes().back())));
    sc_.emplace(std::move(v), din, dout);
  }

  MapKind kind() const { return kind_; }
  Side side() const { return side_; }
  const LipschitzGraph& graph() const { return graph_; }
  const PolylineMap* polyline() const { return sc_ ? &*sc_ : nullptr; }

  // Phi: half plane -> region.
  cplx forward(cplx w) const {
    check_half_plane(w, "DomainMap::forward");
    if (!sc_) return kind_ == MapKind::identity ? w : rotation_ * w;
    return reflect((*sc_)(reflect(w)));
  }
  cplx derivative(cplx w) const {
    check_half_plane(w, "DomainMap::derivative");
    if (!sc_) return kind_ == MapKind::identity ? cplx(1.0) : rotation_;
    return reflect(sc_->derivative(reflect(w)));
  }
  // Psi = Phi^-1.
  cplx inverse(cplx z) const {
    if (!in_region(z)) throw DomainError("DomainMap::inverse: point outside the region");
    if (!sc_) return kind_ == MapKind::identity ? z : z / rotation_;
    return reflect(sc_->inverse(reflect(z)));
  }

  bool in_region(cplx z) const {
    const double a = graph_.height(z.real());
    return side_ == Side::upper ? z.imag() >= a : z.imag() <= a;
  }

  // Real preimage of the graph point over x.
  double boundary_preimage(double x) const {
    if (!sc_) return kind_ == MapKind::identity ? x : (graph_.point(x) / rotation_).real();
    const auto& br = graph_.breakpoints();
    const std::size_t e = static_cast<std::size_t>(std::lower_bound(br.begin(), br.end(), x) - br.begin());
    if (e < br.size() && br[e] == x) return sc_->prevertices()[e];
    return sc_->boundary_preimage(e, reflect(graph_.point(x)));
  }

 private:
  LipschitzGraph graph_;
  Side side_;
  MapKind kind_ = MapKind::identity;
  cplx rotation_{1.0, 0.0};
  std::optional<PolylineMap> sc_;

  // The lower map is the conjugate of the upper map for the conjugate graph.
  cplx reflect(cplx z) const { return side_ == Side::upper ? z : std::conj(z); }
  void check_half_plane(cplx w, const char* who) const {
    if (side_ == Side::upper ? w.imag() < 0.0 : w.imag() > 0.0)
      throw DomainError(std::string(who) + ": point outside the closed half plane");
  }
};

inline DomainMap build_map(const LipschitzGraph& g, Side side) { return DomainMap(g, side); }

// Upper map continued across each gap by Schwarz reflection in the line of the gap. Reflected values
// are produced only inside the lower diamond of the gap.
class ExtendedMap {
 public:
  ExtendedMap(DomainMap base, const BoundaryConfig& cfg) : base_(std::move(base)) {
    if (base_.side() != Side::upper) throw DomainError("extend_by_reflection: base must be the upper map");
    const auto ds = build_diamonds(cfg);
    for (std::size_t j = 0; j < cfg.gaps.size(); ++j) {
      Gap g;
      g.z_lo = cfg.graph.point(cfg.gaps[j].lo);
      g.z_hi = cfg.graph.point(cfg.gaps[j].hi);
      g.rotation = std::polar(1.0, 2.0 * cfg.gap_angles[j]);
      g.w_lo = base_.boundary_preimage(cfg.gaps[j].lo);
      g.w_hi = base_.boundary_preimage(cfg.gaps[j].hi);
      g.lower_tent = ds.diamonds[j].lower;
      gaps_.push_back(g);
    }
  }

  const DomainMap& base() const { return base_; }

  cplx reflect_across(std::size_t j, cplx z) const {
    const auto& g = gaps_.at(j);
    return g.z_lo + g.rotation * std::conj(z - g.z_lo);
  }

  // Phi-tilde on the closed upper half plane plus the preimages of the lower diamonds.
  cplx forward(cplx w) const {
    if (w.imag() >= 0.0) return base_.forward(w);
    for (std::size_t j = 0; j < gaps_.size(); ++j) {
      if (w.real() <= gaps_[j].w_lo || w.real() >= gaps_[j].w_hi) continue;
      const cplx v = reflect_across(j, base_.forward(std::conj(w)));
      if (gaps_[j].lower_tent.contains(v)) return v;
    }
    throw DomainError("ExtendedMap::forward: point outside the extended half plane");
  }

  // Psi-tilde on the closed upper region plus the lower diamonds.
  cplx inverse(cplx z) const {
    if (base_.in_region(z)) return base_.inverse(z);
    for (std::size_t j = 0; j < gaps_.size(); ++j)
      if (gaps_[j].lower_tent.contains(z)) return std::conj(base_.inverse(reflect_across(j, z)));
    throw DomainError("ExtendedMap::inverse: point outside the extended region");
  }

  std::size_t gap_count() const { return gaps_.size(); }
  XInterval preimage_gap(std::size_t j) const { return {gaps_.at(j).w_lo, gaps_.at(j).w_hi}; }

 private:
  struct Gap {
    cplx z_lo, z_hi;
    cplx rotation;  // e^{2 i c}
    double w_lo, w_hi;
    Tent lower_tent{};
  };
  DomainMap base_;
  std::vector<Gap> gaps_;
};

inline ExtendedMap extend_by_reflection(const DomainMap& map, const BoundaryConfig& cfg) { return ExtendedMap(map, cfg); }

// Image of E0 under Psi, as a flat-graph configuration.
inline BoundaryConfig image_config(const DomainMap& map, const BoundaryConfig& cfg) {
  std::vector<XInterval> e;
  for (const auto& iv : cfg.e0) {
    const double lo = std::isfinite(iv.lo) ? map.boundary_preimage(iv.lo) : -inf;
    const double hi = std::isfinite(iv.hi) ? map.boundary_preimage(iv.hi) : inf;
    e.push_back({lo, hi});
  }
  return BoundaryConfig::make(LipschitzGraph{}, e, cfg.eps0);
}

struct DensityPreservationReport {
  BoundaryConfig image;
  double eps = 0.0;  // sampled projection density of the image
  bool positive = false;
};

inline DensityPreservationReport check_density_preservation(const DomainMap& map, const BoundaryConfig& cfg,
                                                            std::optional<std::vector<DensitySample>> plan = {}) {
  DensityPreservationReport rep{image_config(map, cfg)};
  const auto samples = plan ? *plan : default_density_plan(rep.image);
  rep.eps = certify_homogeneity(rep.image, DensityMode::projection, samples).inf_ratio;
  rep.positive = rep.eps > 0.0;
  return rep;
}

struct TentMappingReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  cplx worst{};
};

// Samples T(Psi(F_j), gamma) (interior and inset boundary), maps forward, tests membership in T(F_j, 3 gamma).
inline TentMappingReport check_tent_mapping(const DomainMap& map, const BoundaryConfig& cfg, double gamma,
                                            int interior_per_tent, std::uint64_t seed = 1) {
  if (!(gamma > 0.0 && gamma < pi / 12)) throw DomainError("check_tent_mapping: need 0 < gamma < pi/12");
  if (map.side() != Side::upper) throw DomainError("check_tent_mapping: upper map expected");
  TentMappingReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (std::size_t j = 0; j < cfg.gaps.size(); ++j) {
    const double a = map.boundary_preimage(cfg.gaps[j].lo), b = map.boundary_preimage(cfg.gaps[j].hi);
    const Tent src{cplx(a), cplx(b), gamma};
    const Tent dst{cfg.graph.point(cfg.gaps[j].lo), cfg.graph.point(cfg.gaps[j].hi), 3 * gamma};
    const auto tri = src.triangle();
    std::vector<cplx> pts;
    for (int k = 0; k < interior_per_tent; ++k) {
      double u = U(rng), v = U(rng);
      if (u + v > 1) u = 1 - u, v = 1 - v;
      pts.push_back(tri[0] + u * (tri[1] - tri[0]) + v * (tri[2] - tri[0]));
    }
    const int side_pts = std::max(8, interior_per_tent / 20);
    for (int k = 1; k < side_pts; ++k) {
      const double t = double(k) / side_pts;
      const cplx inset = 1e-9 * (tri[1] - 0.5 * (tri[0] + tri[2]));
      pts.push_back(tri[0] + t * (tri[1] - tri[0]) - inset * t);
      pts.push_back(tri[2] + t * (tri[1] - tri[2]) - inset * t);
    }
    for (cplx w : pts) {
      if (!(w.imag() > 0.0)) continue;
      ++rep.samples;
      const cplx z = map.forward(w);
      if (!dst.contains(z)) {
        ++rep.violations;
        rep.worst = w;
      }
    }
  }
  return rep;
}

// Sampled max |arg Phi'| over a grid in the half plane.
inline double max_derivative_argument(const DomainMap& map, const std::vector<cplx>& samples) {
  double m = 0.0;
  for (cplx w : samples) m = std::max(m, std::abs(std::arg(map.derivative(w))));
  return m;
}

}  // namespace corona
