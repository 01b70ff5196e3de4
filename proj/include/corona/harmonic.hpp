#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "corona/common.hpp"
#include "corona/graph_geometry.hpp"
#include "corona/quadrature.hpp"

namespace corona {

// Finite ascending union of disjoint closed intervals of the real line.
class IntervalUnion {
 public:
  IntervalUnion() = default;
  explicit IntervalUnion(std::vector<XInterval> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw ConfigError("interval union: need at least one component");
    for (std::size_t k = 0; k < parts_.size(); ++k) {
      if (!(parts_[k].hi > parts_[k].lo)) throw ConfigError("interval union: empty or reversed component");
      if (k > 0 && !(parts_[k].lo > parts_[k - 1].hi)) throw ConfigError("interval union: components overlap");
    }
  }

  const std::vector<XInterval>& parts() const { return parts_; }
  std::size_t size() const { return parts_.size(); }
  const XInterval& operator[](std::size_t k) const { return parts_[k]; }

  bool contains(double x) const {
    return std::any_of(parts_.begin(), parts_.end(), [x](const XInterval& p) { return x >= p.lo && x <= p.hi; });
  }
  bool interior(double x) const {
    return std::any_of(parts_.begin(), parts_.end(), [x](const XInterval& p) { return x > p.lo && x < p.hi; });
  }

  // Open complement components, returned as (closure) intervals.
  std::vector<XInterval> complement() const {
    std::vector<XInterval> out;
    if (std::isfinite(parts_.front().lo)) out.push_back({-inf, parts_.front().lo});
    for (std::size_t k = 1; k < parts_.size(); ++k) out.push_back({parts_[k - 1].hi, parts_[k].lo});
    if (std::isfinite(parts_.back().hi)) out.push_back({parts_.back().hi, inf});
    return out;
  }

 private:
  std::vector<XInterval> parts_;
};

enum class Which { gaps, e_set };

// Harmonic measure of E (a finite interval union) and of its complementary gaps in a half plane.
//
// Each component of E contributes a logarithm L whose cut lies on that component:
//   [a, b]      L = Log((z - b)/(z - a))
//   (-inf, b]   L = Log(z - b)
//   [a, inf)    L = -Log(a - z)
// so Im L is the angle the component subtends at z in the upper half plane, and
//   W(z) = 1 + (i/pi) sum L
// is analytic off E with Re W = omega(z, gaps). On the reflected side Re W(conj z) = 2 - omega(z).
class HarmonicField {
 public:
  HarmonicField(IntervalUnion e_set, Side side = Side::upper)
      : e_(std::move(e_set)), gaps_(e_.complement()), side_(side) {}

  static HarmonicField from_config(const BoundaryConfig& cfg, Side side = Side::upper) {
    return HarmonicField(IntervalUnion(cfg.e0), side);
  }

  const IntervalUnion& e_set() const { return e_; }
  const std::vector<XInterval>& gaps() const { return gaps_; }
  Side side() const { return side_; }

  bool in_open_half_plane(cplx z) const { return side_ == Side::upper ? z.imag() > 0.0 : z.imag() < 0.0; }

  // Sum of the component logarithms, evaluated in the upper-half-plane chart.
  cplx log_sum(cplx z) const {
    cplx s = 0.0;
    for (const auto& p : e_.parts()) {
      const bool lo_inf = !std::isfinite(p.lo), hi_inf = !std::isfinite(p.hi);
      if (lo_inf && hi_inf) s += cplx(0.0, pi);
      else if (lo_inf) s += std::log(z - p.hi);
      else if (hi_inf) s -= std::log(p.lo - z);
      else s += std::log((z - p.hi) / (z - p.lo));
    }
    return s;
  }

  cplx log_sum_derivative(cplx z) const {
    cplx s = 0.0;
    for (const auto& p : e_.parts()) {
      if (std::isfinite(p.hi)) s += 1.0 / (z - p.hi);
      if (std::isfinite(p.lo)) s -= 1.0 / (z - p.lo);
    }
    return s;
  }

  // Analytic completion of omega(., gaps); valid on the whole plane minus E.
  cplx W(cplx z) const {
    if (side_ == Side::upper) return 1.0 + I * log_sum(z) / pi;
    return std::conj(1.0 + I * log_sum(std::conj(z)) / pi);
  }
  cplx dW(cplx z) const {
    if (side_ == Side::upper) return I * log_sum_derivative(z) / pi;
    return std::conj(I * log_sum_derivative(std::conj(z)) / pi);
  }

  double omega(Which which, cplx z) const {
    if (!in_open_half_plane(z)) throw DomainError("harmonic_measure: z is not inside the open half plane");
    const cplx u = side_ == Side::upper ? z : std::conj(z);
    const double e = log_sum(u).imag() / pi;
    return which == Which::e_set ? e : 1.0 - e;
  }

  // (omega_x, omega_y) of the e_set measure, from omega_y + i omega_x = (1/pi) sum L'.
  std::pair<double, double> grad_e(cplx z) const {
    const cplx u = side_ == Side::upper ? z : std::conj(z);
    const cplx s = log_sum_derivative(u) / pi;
    const double wx = s.imag(), wy = s.real();
    return side_ == Side::upper ? std::pair{wx, wy} : std::pair{wx, -wy};
  }

  // Boundary values: 1 inside the set, 0 inside its complement, 1/2 at endpoints.
  double boundary_limit(Which which, double x) const {
    double e = e_.interior(x) ? 1.0 : (e_.contains(x) ? 0.5 : 0.0);
    return which == Which::e_set ? e : 1.0 - e;
  }

  bool in_gap(double x) const {
    return std::any_of(gaps_.begin(), gaps_.end(), [x](const XInterval& g) { return x > g.lo && x < g.hi; });
  }

 private:
  IntervalUnion e_;
  std::vector<XInterval> gaps_;
  Side side_;
};

inline double harmonic_measure(const HarmonicField& f, Which which, cplx z) { return f.omega(which, z); }

// Half-plane Poisson integral of the chosen set, by adaptive Gauss-Kronrod on panels
// clustered around Re z.
inline double poisson_oracle(const HarmonicField& f, Which which, cplx z, int min_nodes = 1000,
                             double tol = 1e-10) {
  if (!f.in_open_half_plane(z)) throw DomainError("poisson_oracle: z is not inside the open half plane");
  const double x = z.real(), y = std::abs(z.imag());
  const auto parts = which == Which::e_set ? f.e_set().parts() : f.gaps();
  std::vector<double> cuts{x};
  for (int k = 1; k <= 24; ++k)
    for (double sgn : {-1.0, 1.0}) cuts.push_back(x + sgn * y * std::ldexp(1.0, k - 5));
  std::sort(cuts.begin(), cuts.end());
  int per_panel = std::max(1, min_nodes / (15 * int(cuts.size() + 1)) + 1);
  auto kernel = [x, y](double t) { return y / (pi * ((t - x) * (t - x) + y * y)); };
  double total = 0.0, err = 0.0;
  for (const auto& p : parts) {
    std::vector<double> b{p.lo};
    for (double c : cuts)
      if (c > p.lo && c < p.hi) b.push_back(c);
    b.push_back(p.hi);
    for (std::size_t k = 0; k + 1 < b.size(); ++k) {
      const double lo = b[k], hi = b[k + 1];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        for (int s = 0; s < per_panel; ++s) {
          const double a = lo + (hi - lo) * s / per_panel, c = lo + (hi - lo) * (s + 1) / per_panel;
          const auto r = adaptive_integrate(kernel, a, c, tol);
          total += r.value, err += r.error;
        }
      } else {
        // Semi-infinite tail: t = x + d/(1-s) with d = c - x, which keeps the integrand bounded and smooth.
        const double d = (std::isfinite(lo) ? lo : hi) - x, ad = std::abs(d);
        auto mapped = [=](double s) { return y * ad / (pi * (d * d + y * y * (1.0 - s) * (1.0 - s))); };
        const auto r = adaptive_integrate(mapped, 0.0, 1.0, tol);
        total += r.value, err += r.error;
      }
    }
  }
  if (err > 1e-9)
  {
    std::ostringstream msg;
    msg << "poisson_oracle: adaptive quadrature error estimate " << err << " for value " << total;
    throw ConvergenceError(msg.str());
  }
  return total;
}

inline cplx analytic_completion(const HarmonicField& f, cplx z) {
  if (!f.in_open_half_plane(z)) throw DomainError("analytic_completion: z is not inside the open half plane");
  return f.W(z);
}

inline double omega_gradient_ratio(const HarmonicField& f, cplx z) {
  if (!f.in_open_half_plane(z)) throw DomainError("omega_gradient_ratio: z is not inside the open half plane");
  const auto [wx, wy] = f.grad_e(z);
  if (std::abs(wy) < 1e-300) throw DomainError("omega_gradient_ratio: omega_y vanishes");
  return wx / wy;
}

// Critical points of omega in the open half plane of f (saddles where level curves of
// neighbouring gaps merge): zeros of sum_e s_e/(z - e) over the finite endpoints e of E.
inline std::vector<cplx> critical_points(const HarmonicField& f) {
  std::vector<std::pair<double, double>> ends;  // (endpoint, sign)
  for (const auto& p : f.e_set().parts()) {
    if (std::isfinite(p.hi)) ends.push_back({p.hi, 1.0});
    if (std::isfinite(p.lo)) ends.push_back({p.lo, -1.0});
  }
  // numerator polynomial, ascending coefficients
  std::vector<double> num(ends.size(), 0.0);
  for (std::size_t e = 0; e < ends.size(); ++e) {
    std::vector<double> term{ends[e].second};
    for (std::size_t k = 0; k < ends.size(); ++k) {
      if (k == e) continue;
      std::vector<double> next(term.size() + 1, 0.0);
      for (std::size_t i = 0; i < term.size(); ++i) {
        next[i + 1] += term[i];
        next[i] -= ends[k].first * term[i];
      }
      term = std::move(next);
    }
    for (std::size_t i = 0; i < term.size(); ++i) num[i] += term[i];
  }
  while (!num.empty() && num.back() == 0.0) num.pop_back();  // leading sums of signs are exact
  std::vector<cplx> out;
  if (num.size() < 2) return out;
  const Eigen::Index n = Eigen::Index(num.size()) - 1;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) companion(i, n - 1) = -num[std::size_t(i)] / num.back();
  const Eigen::VectorXcd roots = Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues();
  const double sgn = f.side() == Side::upper ? 1.0 : -1.0;
  for (cplx z : roots) {
    if (z.imag() < 0.0) continue;  // conjugate pairs: keep one
    for (int it = 0; it < 8; ++it) {
      cplx d = 0.0;
      for (const auto& [e, s] : ends) d -= s / ((z - e) * (z - e));
      const cplx step = f.log_sum_derivative(z) / d;
      z -= step;
      if (std::abs(step) < 1e-15 * (1.0 + std::abs(z))) break;
    }
    if (z.imag() > 1e-9 * (1.0 + std::abs(z))) out.push_back(cplx(z.real(), sgn * z.imag()));
  }
  return out;
}

// Largest value of omega(., gaps) at a critical point; 0 when there is none.
inline double saddle_level(const HarmonicField& f) {
  double s = 0.0;
  for (cplx z : critical_points(f)) s = std::max(s, f.omega(Which::gaps, z));
  return s;
}

// omega(., gaps) continued to the reflected side: 2 - omega(conj z) there, 1 on gap points.
inline double extended_measure(const HarmonicField& f, cplx z) {
  if (f.in_open_half_plane(z)) return f.omega(Which::gaps, z);
  if (!f.in_gap(z.real())) throw DomainError("extended_measure: point outside the extended half plane");
  if (z.imag() == 0.0) return 1.0;
  return 2.0 - f.omega(Which::gaps, std::conj(z));
}

struct MarginReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double min_margin = inf;
  cplx worst{};
  bool ok() const { return violations == 0; }
};

inline void record_margin(MarginReport& r, double margin, cplx z) {
  ++r.samples;
  if (!(margin > 0.0)) ++r.violations;
  if (margin < r.min_margin) r.min_margin = margin, r.worst = z;
}

// omega(z, E) > eps at sampled z with Re z in E.
inline MarginReport homogeneous_lower_bound_check(const HarmonicField& f, double eps, const std::vector<cplx>& samples) {
  MarginReport r;
  for (cplx z : samples) {
    if (!f.e_set().contains(z.real())) continue;
    record_margin(r, f.omega(Which::e_set, z) - eps, z);
  }
  return r;
}

// Points on the two slanted sides of the tent over every gap, endpoints excluded.
inline std::vector<cplx> tent_boundary_samples(const HarmonicField& f, double gamma, int per_side) {
  std::vector<cplx> out;
  const double sgn = f.side() == Side::upper ? 1.0 : -1.0;
  for (const auto& g : f.gaps()) {
    if (!std::isfinite(g.lo) || !std::isfinite(g.hi)) continue;
    const cplx apex{0.5 * (g.lo + g.hi), sgn * 0.5 * (g.hi - g.lo) * std::tan(gamma)};
    for (int k = 1; k <= per_side; ++k) {
      const double t = double(k) / per_side;
      out.push_back(cplx(g.lo) + t * (apex - cplx(g.lo)));
      if (k < per_side) out.push_back(cplx(g.hi) + t * (apex - cplx(g.hi)));
    }
  }
  return out;
}

// omega(z, gaps) < 1 - eps gamma / pi on tent boundaries.
inline MarginReport tent_boundary_bound(const HarmonicField& f, double gamma, double eps,
                                        const std::vector<cplx>& samples) {
  if (!(gamma > 0.0 && gamma < pi / 4)) throw DomainError("tent_boundary_bound: need 0 < gamma < pi/4");
  const double bound = 1.0 - eps * gamma / pi;
  MarginReport r;
  for (cplx z : samples) record_margin(r, bound - f.omega(Which::gaps, z), z);
  return r;
}

}  // namespace corona
