// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "corona/crosscuts.hpp"
#include "corona/scheduler.hpp"
#include "corona/stitching.hpp"
#include "support.hpp"

using namespace corona;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

IntervalUnion two_gap_set() { return IntervalUnion({{-inf, -2.0}, {-1.0, 1.0}, {2.0, inf}}); }

BoundaryConfig two_gap_config() {
  return BoundaryConfig::make(LipschitzGraph{}, {{-inf, -2.0}, {-1.0, 1.0}, {2.0, inf}}, 0.25);
}

// Ten random Denjoy configurations shared by the tent, crosscut and interpolation checks.
const std::vector<BoundaryConfig>& denjoy_configs() {
  static const std::vector<BoundaryConfig> cfgs = [] {
    std::mt19937_64 rng(77);
    std::vector<BoundaryConfig> v;
    for (int k = 0; k < 10; ++k) v.push_back(fixtures::random_denjoy(rng, 4));
    return v;
  }();
  return cfgs;
}

Outcome harmonic_oracle() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> X(-4.0, 4.0), LY(-3.0, 3.0);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const HarmonicField f(fixtures::random_union(rng));
    for (int k = 0; k < 20; ++k) {
      const cplx z{X(rng), std::pow(10.0, LY(rng))};
      worst = std::max(worst, std::abs(f.omega(Which::e_set, z) - poisson_oracle(f, Which::e_set, z)));
    }
  }
  return {worst <= 1e-8, "max |closed form - Poisson| = " + num(worst) + " over 2000 points"};
}

Outcome tent_boundary() {
  std::size_t samples = 0, violations = 0, fewest = SIZE_MAX;
  double margin = inf;
  for (const auto& cfg : denjoy_configs()) {
    const auto f = HarmonicField::from_config(cfg);
    const double gamma = build_diamonds(cfg).alpha_m / 3;
    // every bounded gap gives 2 per_side - 1 points; at least 1000 per configuration
    const double gaps = double(cfg.gaps.size());
    const int per_side = int(std::ceil(0.5 * (1000.0 / gaps + 1.0)));
    const auto rep = tent_boundary_bound(f, gamma, cfg.eps0, tent_boundary_samples(f, gamma, per_side));
    samples += rep.samples;
    fewest = std::min(fewest, rep.samples);
    violations += rep.violations;
    margin = std::min(margin, rep.min_margin);
  }
  return {violations == 0 && fewest >= 1000,
          std::to_string(samples) + " samples, " + std::to_string(violations) + " violations, min margin " + num(margin)};
}

Outcome crosscut_geometry() {
  double worst_arg = 0.0, worst_box = 0.0;
  std::size_t arg_violations = 0;
  bool box_ok = true;
  for (const auto& cfg : denjoy_configs()) {
    const double am = build_diamonds(cfg).alpha_m;
    const auto betas = compute_betas(cfg.eps0, am);
    const auto f = HarmonicField::from_config(cfg);
    std::vector<LevelCurve> curves;
    for (std::size_t g = 0; g < cfg.gaps.size(); ++g) {
      const auto d1 = trace_level_curve(f, g, betas.beta1, 1e-3 * cfg.gaps[g].length());
      const auto rep = tangent_argument_bound(d1, 2 * am / 3, 1e-3);
      arg_violations += rep.violations;
      worst_arg = std::max(worst_arg, rep.max_abs_arg / (2 * am / 3));
      curves.push_back(d1);
    }
    const auto [lo, hi] = cfg.finite_extent();
    const double cap = 1.0 / std::cos(2 * am / 3) * (1 + 1e-2);
    const double c = carleson_constant(curves, dyadic_boxes(lo, hi, hi - lo)).constant;
    box_ok &= c <= cap;
    worst_box = std::max(worst_box, c / cap);
  }
  return {arg_violations == 0 && box_ok, "max arg / (2 alpha_M/3) = " + num(worst_arg) +
                                             ", max Carleson ratio / cap = " + num(worst_box)};
}

Outcome interpolation_suite() {
  std::vector<BoundaryConfig> cfgs = denjoy_configs();
  cfgs.push_back(two_gap_config());
  double node = 0.0, sup = -inf, sum = -inf, cell = inf;
  std::size_t cell_violations = 0, failed = 0;
  std::string error;
  for (const auto& cfg : cfgs) {
    try {
      const auto f = HarmonicField::from_config(cfg);
      const StitchOptions opt = lift_beta1(StitchOptions{}, f.e_set());
      const auto seq = extract_sequence(f, BetaPair::from_beta1(opt.beta1), separation_A(opt.beta1));
      const ExtendedChart chart(f, opt.beta1 - opt.chart_margin);
      const InterpFamily fam(seq.points, generation_split(seq.points, opt.separation), chart.as_function());
      std::mt19937_64 rng(5);
      const auto [lo, hi] = cfg.finite_extent();
      std::uniform_real_distribution<double> ux(lo - (hi - lo), hi + (hi - lo)), ly(-4.0, 0.5);
      std::vector<cplx> samples;
      for (int k = 0; k < 300; ++k) samples.push_back(cplx(ux(rng), (hi - lo) * std::pow(10.0, ly(rng))));
      for (cplx z : seq.points) samples.push_back(z + cplx(0.0, 0.1 * z.imag()));
      const auto rep = verify_family(fam, samples);
      const auto cells = schwarz_cell_bound(fam, f, seq);
      node = std::max(node, rep.node_error);
      sup = std::max(sup, rep.sup_excess);
      sum = std::max(sum, rep.sum_excess);
      cell = std::min(cell, cells.min_modulus);
      cell_violations += cells.violations;
    } catch (const std::exception& e) {
      ++failed;
      error = e.what();
    }
  }
  const bool ok = failed == 0 && node <= 1e-8 && sup <= 1e-6 && sum <= 0.0 && cell_violations == 0;
  std::string d = std::to_string(cfgs.size()) + " configs: |h_m(z_m)-1| " + num(node) + ", sup - N^2 " + num(sup) +
                  ", sum - N^2 2^p " + num(sum) + ", min cell |h_n| " + num(cell);
  if (failed) d += ", " + std::to_string(failed) + " configs failed (" + error + ")";
  return {ok, d};
}

Outcome schedule_arithmetic() {
  const ScheduleInputs unit{1.0, 1.0, 0.5, 0.75};
  const Schedule s = simulate(unit, 0.1);
  bool ok = std::abs(s.ybar_at(3) - 41.01) <= 1e-12;
  double product = 0.0;
  for (int m = 1; m <= s.horizon; ++m) {
    if (s.b_at(m) < std::numeric_limits<double>::min()) break;
    product = std::max(product, std::abs(product_identity(s, m) / std::pow(0.1, m) - 1.0));
  }
  ok &= product <= 1e-12;
  const auto f = find_r(unit);
  ok &= f.schedule.admissible && std::abs(f.schedule.C1 - (2.0 * unit.N + f.r / (1 - f.r))) <= 1e-12;
  const int upto = std::min<int>(40, int(f.schedule.b.size()));
  const double bmin = *std::min_element(f.schedule.b.begin(), f.schedule.b.begin() + upto);
  ok &= f.schedule.b_inf <= bmin;
  return {ok, "ybar_3 = " + num(s.ybar_at(3)) + ", product rel. error " + num(product) + ", r = " + num(f.r) +
                  ", b_inf / min b = " + num(f.schedule.b_inf / bmin)};
}

Outcome end_to_end() {
  Stitcher st(two_gap_set());
  const auto res = st.run();
  const auto& c = res.certificate;
  const double r = st.options().r;
  double worst_ratio = 0.0;
  for (const auto& g : res.trace)
    if (g.m >= 3 && !g.zero) worst_ratio = std::max(worst_ratio, g.ratio / r);
  const bool ok = c.passed && c.grid_points >= 10000 && c.generations <= 12 && worst_ratio <= 1.5 &&
                  c.residual <= 1e-3 && c.disagreement <= 1e-3;
  std::string d = std::to_string(c.generations) + " generations, disagreement " + num(c.disagreement) + ", residual " +
                  num(c.residual) + " on " + std::to_string(c.grid_points) + " points, max ratio / r " + num(worst_ratio) +
                  ", restarts " + std::to_string(res.restarts);
  if (!c.passed) d += ", " + c.failure;
  return {ok, d};
}

double dbar_worst_relative(int order) {
  StitchOptions o;
  o.order = order;
  Stitcher st(two_gap_set(), o);
  st.build_generation(2, 0.01);
  const auto& seq = st.sequence();
  double worst = 0.0;
  for (std::size_t c = 0; c < seq.cells.size(); c += 5) {
    const auto& cell = seq.cells[c];
    for (double fu : {0.3, 0.5, 0.7}) {
      const cplx z = level_point(st.phi(Side::upper).field(), cplx(cell.u_lo + fu * (cell.u_hi - cell.u_lo), cell.t), cell.node);
      const double h = 1e-3 * z.imag();
      auto a = [&](cplx p) { return st.dbar_coefficient(2, 0, 1, p); };
      const cplx fd = 0.5 * ((a(z + h) - a(z - h)) / (2 * h) + I * (a(z + I * h) - a(z - I * h)) / (2 * h));
      const cplx exact = st.dbar_density(2, 0, 1, z);
      worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
    }
  }
  return worst;
}

Outcome dbar_solve() {
  const double coarse = dbar_worst_relative(8), fine = dbar_worst_relative(16);
  return {coarse <= 0.03 && fine <= 0.01, "worst relative error " + num(coarse) + " (order 8), " + num(fine) + " (order 16)"};
}

Outcome identical_seeds() {
  StitchOptions opt;
  opt.preset = "trivial";
  Stitcher st(two_gap_set(), opt);
  const auto res = st.run();
  bool zero = true;
  for (const auto& g : res.trace) zero &= g.x == 0.0 && (g.m < 2 || g.zero);
  for (cplx z : {cplx(1.5, 0.2), cplx(-1.5, 0.05), cplx(0.0, 1.0)})
    zero &= st.dbar_coefficient(2, 0, 1, z) == cplx(0.0) && st.dbar_coefficient(2, 1, 0, z) == cplx(0.0);
  const auto& c = res.certificate;
  const bool ok = zero && c.passed && c.generations == 2 && c.disagreement == 0.0;
  return {ok, "a and x vanish: " + std::string(zero ? "yes" : "no") + ", certified at generation " +
                  std::to_string(c.generations) + " with disagreement " + num(c.disagreement)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_s;  // wall-clock limit; infinite when none applies
  };
  const std::vector<Criterion> criteria{
      {"harmonic measure closed form vs Poisson oracle", harmonic_oracle, 30.0},
      {"tent-boundary bound on gap measure", tent_boundary, inf},
      {"delta_1 tangent arguments and Carleson ratios", crosscut_geometry, inf},
      {"interpolating families", interpolation_suite, inf},
      {"schedule arithmetic", schedule_arithmetic, 1.0},
      {"end-to-end stitching on the two-gap set", end_to_end, 600.0},
      {"dbar of the correction coefficients", dbar_solve, inf},
      {"identical seeds are a fixed point", identical_seeds, inf},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= criteria[k].budget_s;
    const bool ok = o.ok && in_time;
    failures += !ok;
    std::printf("%s [%zu] %s: %s; %.1f s%s\n", ok ? "PASS" : "FAIL", k + 1, criteria[k].name, o.detail.c_str(), secs,
                in_time ? "" : " (over time budget)");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
