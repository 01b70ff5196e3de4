#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "corona/common.hpp"

namespace corona {

struct ScheduleInputs {
  double N;
  double K;
  double beta1;
  double beta2;
};

// Sequences are 1-based in the maths; index 0 here is m = 1.
struct Schedule {
  ScheduleInputs in{};
  double r = 0.0;
  double r0 = 0.0;
  int horizon = 0;
  std::vector<double> b;
  std::vector<double> xbar;
  std::vector<double> ybar;
  double C1 = 0.0;
  double C2 = 0.0;
  double b_inf = 0.0;
  bool clamped = false;    // ybar_1, ybar_2 raised to 1
  bool diverging = false;  // y_{m+2}/y_m > 2 for some m >= 6
  bool admissible = false;
  std::vector<std::string> notes;

  double b_at(int m) const { return b.at(m - 1); }
  double xbar_at(int m) const { return xbar.at(m - 1); }
  double ybar_at(int m) const { return ybar.at(m - 1); }
};

inline void check_schedule_inputs(const ScheduleInputs& in) {
  if (!(in.N > 0 && in.K > 0)) throw DomainError("schedule: N and K must be positive");
  if (!(in.beta1 > 0 && in.beta1 < in.beta2 && in.beta2 < 1)) throw DomainError("schedule: need 0 < beta1 < beta2 < 1");
  if (std::abs((1 - in.beta1) / (1 - in.beta2) - 2.0) > 1e-12) throw DomainError("schedule: deficit ratio must be 2");
}

namespace detail {

// Telescoped reciprocal lower bounds for even (from y_4) and odd (from y_5) indices, tails summed to infinity.
inline bool telescoping_positive(const Schedule& s) {
  const double r = s.r, K2 = s.in.K * s.in.K, q = 1.0 - r * r;
  const double even = 1.0 / s.ybar_at(4) - (K2 * r * r / q + std::pow(r, 5) / q);
  const double odd = 1.0 / s.ybar_at(5) - (K2 * std::pow(r, 3) / q + std::pow(r, 6) / q);
  return even > 0.0 && odd > 0.0;
}

}  // namespace detail

inline Schedule simulate(const ScheduleInputs& in, double r, int horizon = 40) {
  check_schedule_inputs(in);
  if (!(r > 0 && r < 1)) throw DomainError("simulate: need 0 < r < 1");
  if (horizon < 6) throw DomainError("simulate: horizon must be at least 6");
  Schedule s;
  s.in = in;
  s.r = r;
  s.horizon = horizon;
  const double K = in.K, N = in.N, ex = 2.0 / (1.0 - in.beta1);
  std::vector<double>& y = s.ybar;
  y.assign(horizon + 1, 0.0);  // one extra so the last b is defined
  y[0] = N;
  y[1] = N + r;
  if (y[0] < 1.0 || y[1] < 1.0) {
    s.clamped = true;
    y[0] = std::max(1.0, y[0]);
    y[1] = std::max(1.0, y[1]);
    s.notes.push_back("ybar_1, ybar_2 clamped up to 1 (N < 1)");
  }
  y[2] = y[0] + K * K * y[0] * y[0] * (2 * N) * (2 * N) / r + r * r;
  for (int m = 2; m + 2 <= horizon + 1; ++m) {
    const double ym = y[m - 1];
    y[m + 1] = ym + K * K * ym * ym * std::pow(r, m - 2) + std::pow(r, m + 1);
  }
  for (int m = 6; m + 2 <= horizon; ++m)
    if (y[m + 1] / y[m - 1] > 2.0) s.diverging = true;
  y.resize(horizon);
  s.b.resize(horizon);
  s.xbar.resize(horizon);
  s.b[0] = std::pow(r / (K * y[0] * 2 * N), ex);
  s.xbar[0] = 2 * N;
  for (int m = 2; m <= horizon; ++m) {
    s.b[m - 1] = std::pow(r / (K * y[m - 1]), ex);
    s.xbar[m - 1] = std::pow(r, m - 1);
  }
  s.C1 = 2 * N + r / (1 - r);
  s.C2 = *std::max_element(y.begin(), y.end());
  const bool b_ok = std::all_of(s.b.begin(), s.b.end(), [](double b) { return b > 0 && b < 1; });
  s.admissible = b_ok && !s.diverging && std::isfinite(s.C2) && detail::telescoping_positive(s);
  s.r0 = r / 2;
  s.b_inf = std::pow(s.r0 / (K * s.C2), ex);
  return s;
}

// K b_m^(1 - beta2) xbar_m ybar_m; equals r^m by construction.
inline double product_identity(const Schedule& s, int m) {
  return s.in.K * std::pow(s.b_at(m), 1.0 - s.in.beta2) * s.xbar_at(m) * s.ybar_at(m);
}

struct FindRResult {
  double r;
  double r0;
  Schedule schedule;
  bool b_inf_ok;
};

inline FindRResult find_r(const ScheduleInputs& in, int horizon = 40) {
  check_schedule_inputs(in);
  auto ok = [&](double r) { return simulate(in, r, horizon).admissible; };
  double lo = 0.5;
  if (!ok(lo)) {
    double hi = lo;
    while (!ok(lo)) {
      hi = lo;
      lo /= 2;
      if (lo < 1e-8) throw ConfigError("find_r: no admissible r down to 1e-8 (K*N too large)");
    }
    while (hi - lo > 1e-4 * lo) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
  }
  Schedule s = simulate(in, lo, horizon);
  const double bmin = *std::min_element(s.b.begin(), s.b.end());
  return {lo, s.r0, s, s.b_inf <= bmin};
}

struct DominationReport {
  std::vector<double> x_margin;
  std::vector<double> y_margin;
  double worst_x = inf;
  double worst_y = inf;
  bool ok() const { return worst_x >= 0 && worst_y >= 0; }
};

// Observed trackers, 1-based m in position m-1.
inline DominationReport dominate_check(const Schedule& s, const std::vector<double>& x, const std::vector<double>& y) {
  DominationReport rep;
  for (std::size_t k = 0; k < x.size() && k < s.xbar.size(); ++k) {
    rep.x_margin.push_back(s.xbar[k] - x[k]);
    rep.worst_x = std::min(rep.worst_x, rep.x_margin.back());
  }
  for (std::size_t k = 0; k < y.size() && k < s.ybar.size(); ++k) {
    rep.y_margin.push_back(s.ybar[k] - y[k]);
    rep.worst_y = std::min(rep.worst_y, rep.y_margin.back());
  }
  return rep;
}

// Factor chosen from the observed y_m so that K b^(1-beta2) x_m y_m = r x_m (m >= 2),
// and K b^(1-beta2) x_1 y_1 = r for m = 1.
inline double feedback_factor(int m, double r, double K, double x1, double ym, double beta2) {
  const double ex = 1.0 / (1.0 - beta2);
  const double q = m == 1 ? r / (K * x1 * ym) : r / (K * ym);
  return std::min(std::pow(q, ex), 0.5);
}

}  // namespace corona
