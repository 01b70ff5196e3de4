// corona: command-line driver. Exit codes: 0 certified, 1 a check failed, 2 bad input.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <random>

#include "corona/conformal.hpp"
#include "corona/io.hpp"

using namespace corona;
namespace fs = std::filesystem;
using io::json;

namespace {

struct CommonFlags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::optional<int> mesh;
};

io::RunConfig load(const CommonFlags& f) {
  io::RunConfig c = io::load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.tolerance) c.tolerance = *f.tolerance;
  if (f.mesh) c.mesh = *f.mesh;
  c.validate();
  return c;
}

// The flat-graph model of the configuration: itself when the graph is flat, else the image of E0
// under the conformal map of the upper domain.
BoundaryConfig flat_model(const BoundaryConfig& cfg) {
  const auto& s = cfg.graph.slopes();
  if (std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; })) return cfg;
  return image_config(build_map(cfg.graph, Side::upper), cfg);
}

int report(bool ok, const std::string& what) {
  std::cout << (ok ? "PASS " : "FAIL ") << what << '\n';
  return ok ? 0 : 1;
}

int cmd_density(const io::RunConfig& c, const fs::path& out) {
  const auto& cfg = c.boundary;
  const auto plan = default_density_plan(cfg);
  json j;
  io::CsvWriter csv(out / "density_witnesses.csv", {"mode", "x", "r", "ratio"});
  DensityReport ball;
  for (DensityMode mode : {DensityMode::ball, DensityMode::projection, DensityMode::interval}) {
    const auto rep = certify_homogeneity(cfg, mode, plan);
    const json r = io::to_json(rep);
    j["modes"].push_back(r);
    for (const auto& w : rep.samples) csv.row_strings({r["mode"], io::fmt(w.x), io::fmt(w.r), io::fmt(w.ratio)});
    if (mode == DensityMode::ball) ball = rep;
  }
  const bool bound_ok = cfg.gaps.empty() || cfg.eps0 <= 0.5;
  const bool claim_ok = ball.inf_ratio > cfg.eps0;
  j["eps0"] = cfg.eps0;
  j["eps0_bound_ok"] = bound_ok;
  j["claim_holds"] = claim_ok;
  io::write_json(out / "density.json", j);
  if (!bound_ok) return report(false, "density: eps0 = " + io::fmt(cfg.eps0) + " exceeds 1/2 for a set with gaps");
  return report(claim_ok, "density: sampled inf ratio " + io::fmt(ball.inf_ratio) + " vs eps0 " + io::fmt(cfg.eps0) +
                              " (worst at x=" + io::fmt(ball.worst.x) + ", r=" + io::fmt(ball.worst.r) + ")");
}

struct TraceOutcome {
  bool ok = true;
  json summary;
};

TraceOutcome run_trace(const io::RunConfig& c, const fs::path& out, std::optional<double> gamma_flag) {
  const double am = build_diamonds(c.boundary).alpha_m;
  const double gamma = gamma_flag.value_or(am / 3);
  if (!(gamma > 0.0 && gamma < pi / 4)) throw ConfigError("trace: tent angle must lie in (0, pi/4)");
  const BoundaryConfig flat = flat_model(c.boundary);
  const auto betas = compute_betas(flat.eps0, am);
  const auto f = HarmonicField::from_config(flat);
  const auto fl = HarmonicField::from_config(flat, Side::lower);
  TraceOutcome res;
  io::CsvWriter csv(out / "curves.csv", {"gap", "side", "level", "re", "im", "omega"});
  const auto [lo, hi] = flat.finite_extent();
  const double pad = 0.25 * (hi - lo);
  io::Svg svg(lo - pad, hi + pad, -(hi - lo) * 0.6, (hi - lo) * 0.6);
  for (const auto& iv : flat.e0) svg.segment(cplx(std::max(iv.lo, lo - pad)), cplx(std::min(iv.hi, hi + pad)), "black", 3);
  std::vector<LevelCurve> upper;
  json gaps = json::array();
  for (std::size_t g = 0; g < flat.gaps.size(); ++g) {
    const auto& gap = flat.gaps[g];
    const double step = 1e-3 * gap.length();
    json gj = {{"tent_violations", 0}, {"max_tangent_arg", 0.0}};
    for (Side s : {Side::upper, Side::lower}) {
      const auto& field = s == Side::upper ? f : fl;
      for (double level : {betas.beta1, betas.beta2}) {
        const auto curve = trace_level_curve(field, g, level, step);
        for (cplx z : curve.points)
          csv.row_strings({std::to_string(g), s == Side::upper ? "upper" : "lower", io::fmt(level), io::fmt(z.real()),
                           io::fmt(z.imag()), io::fmt(level)});
        svg.polyline(curve.points, level == betas.beta1 ? "#1f77b4" : "#ff7f0e");
        const auto tv = tent_violations(curve, gap, gamma);
        res.ok &= tv == 0;
        gj["tent_violations"] = gj["tent_violations"].get<int>() + int(tv);
        if (level == betas.beta1) {
          const auto arg = tangent_argument_bound(curve, 2 * am / 3, 1e-3);
          res.ok &= arg.ok();
          gj["max_tangent_arg"] = std::max(gj["max_tangent_arg"].get<double>(), arg.max_abs_arg);
          if (s == Side::upper) upper.push_back(curve);
        }
      }
    }
    const Tent up{cplx(gap.lo), cplx(gap.hi), gamma}, down{cplx(gap.hi), cplx(gap.lo), gamma};
    const auto tu = up.triangle(), td = down.triangle();
    svg.polygon({tu.begin(), tu.end()}, "#2ca02c", "#2ca02c");
    svg.polygon({td.begin(), td.end()}, "#2ca02c", "#2ca02c");
    gaps.push_back(gj);
  }
  const auto ds = build_diamonds(flat);
  for (const auto& d : ds.diamonds) {
    const auto a = d.upper.triangle(), b = d.lower.triangle();
    svg.polygon({a.begin(), a.end()}, "#9467bd", "none");
    svg.polygon({b.begin(), b.end()}, "#9467bd", "none");
  }
  double carleson = 0.0;
  if (!upper.empty()) {
    const auto rep = carleson_constant(upper, dyadic_boxes(lo, hi, hi - lo));
    carleson = rep.constant;
    res.ok &= rep.constant <= 1.0 / std::cos(2 * am / 3) * 1.01;
  }
  svg.save(out / "trace.svg");
  res.summary = {{"alpha_M", am},   {"gamma", gamma},      {"beta1", betas.beta1},
                 {"beta2", betas.beta2}, {"gaps", gaps}, {"carleson_constant", carleson},
                 {"carleson_bound", 1.0 / std::cos(2 * am / 3) * 1.01}, {"passed", res.ok}};
  io::write_json(out / "trace.json", res.summary);
  return res;
}

int cmd_trace(const io::RunConfig& c, const fs::path& out, std::optional<double> gamma) {
  const auto t = run_trace(c, out, gamma);
  return report(t.ok, "trace: tent containment, tangent arguments and Carleson ratios");
}

struct ScheduleOutcome {
  bool ok = false;
  std::optional<Schedule> schedule;
  std::string error;
};

// Pipeline betas by default; literal ones come from the density constants.
ScheduleOutcome run_schedule(const io::RunConfig& c, std::optional<double> r, bool literal) {
  const BetaPair betas = literal ? compute_betas(c.boundary.eps0, build_diamonds(c.boundary).alpha_m)
                                 : BetaPair::from_beta1(StitchOptions{}.beta1);
  const ScheduleInputs in{c.schedule_N, c.schedule_K, betas.beta1, betas.beta2};
  ScheduleOutcome out;
  if (r) {
    auto s = simulate(in, *r);
    const double bmin = *std::min_element(s.b.begin(), s.b.end());
    out.ok = s.admissible && s.b_inf <= bmin;
    out.schedule = s;
    return out;
  }
  try {
    auto f = find_r(in);
    out.ok = f.schedule.admissible && f.b_inf_ok;
    out.schedule = f.schedule;
  } catch (const ConfigError& e) {
    out.error = e.what();
  }
  return out;
}

int cmd_schedule(const io::RunConfig& c, const fs::path& out, std::optional<double> r, bool literal) {
  const auto s = run_schedule(c, r, literal);
  if (!s.schedule) {
    io::write_json(out / "schedule.json", {{"error", s.error}});
    return report(false, "schedule: " + s.error);
  }
  io::write_json(out / "schedule.json", io::to_json(*s.schedule));
  return report(s.ok, "schedule: r = " + io::fmt(s.schedule->r) + (s.schedule->admissible ? " admissible" : " not admissible"));
}

struct InterpOutcome {
  bool ok;
  json summary;
};

InterpOutcome run_interp(const io::RunConfig& c) {
  const BoundaryConfig flat = flat_model(c.boundary);
  const HarmonicField f = HarmonicField::from_config(flat);
  const StitchOptions defaults = lift_beta1(StitchOptions{}, f.e_set());
  const auto betas = BetaPair::from_beta1(defaults.beta1);
  const double B = separation_A(defaults.beta1);
  const auto seq = extract_sequence(f, betas, B);
  const ExtendedChart chart(f, defaults.beta1 - defaults.chart_margin);
  const InterpFamily fam(seq.points, generation_split(seq.points, defaults.separation), chart.as_function());
  std::mt19937_64 rng(c.seed);
  const auto [lo, hi] = flat.finite_extent();
  std::uniform_real_distribution<double> ux(lo - (hi - lo), hi + (hi - lo)), ly(-4.0, 0.5);
  std::vector<cplx> samples;
  for (int k = 0; k < 400; ++k) samples.push_back(cplx(ux(rng), (hi - lo) * std::pow(10.0, ly(rng))));
  const auto rep = verify_family(fam, samples);
  const auto cells = schwarz_cell_bound(fam, f, seq);
  const bool ok = rep.node_error <= 1e-8 && rep.sup_excess <= 1e-6 && rep.sum_excess <= 0.0 && cells.violations == 0;
  json j = io::to_json(rep);
  j["nodes"] = seq.size();
  j["classes"] = fam.split().classes.size();
  j["p"] = fam.split().p;
  j["interpolation_constant"] = fam.interpolation_constant();
  j["kappa"] = fam.kappa();
  j["min_cell_modulus"] = cells.min_modulus;
  j["cell_violations"] = cells.violations;
  j["passed"] = ok;
  return {ok, j};
}

int cmd_interp(const io::RunConfig& c, const fs::path& out) {
  const auto r = run_interp(c);
  io::write_json(out / "interp.json", r.summary);
  return report(r.ok, "interp: node values, sup and sum bounds, cell moduli");
}

int cmd_stitch(const io::RunConfig& c, const fs::path& out) {
  const BoundaryConfig flat = flat_model(c.boundary);
  StitchOptions opt;
  opt.preset = c.preset;
  opt.tolerance = c.tolerance;
  opt.order = c.mesh;
  opt.window = c.window;
  opt.seed = unsigned(c.seed);
  Stitcher st(IntervalUnion(flat.e0), opt);
  const StitchResult res = st.run();
  io::write_json(out / "manifest.json", {{"config", io::to_json(c)},
                                          {"seed", c.seed},
                                          {"model", io::to_json(flat)},
                                          {"options",
                                           {{"beta1", opt.beta1},
                                            {"beta2", st.betas().beta2},
                                            {"B", st.B()},
                                            {"r", opt.r},
                                            {"K0", opt.K0},
                                            {"order", opt.order},
                                            {"y_floor", opt.y_floor},
                                            {"max_generations", opt.max_generations}}}});
  io::write_trace_csv(out / "generations.csv", res.trace);
  io::write_json(out / "certificate.json", io::to_json(res));
  // decay chart: log10 x_m against m
  io::Svg svg(0.0, double(opt.max_generations + 1), -12.0, 2.0, 600);
  std::vector<cplx> pts;
  for (const auto& g : res.trace)
    if (g.x > 0.0) pts.push_back(cplx(g.m, std::log10(g.x)));
  svg.polyline(pts, "#1f77b4", 2.0);
  for (cplx p : pts) svg.dot(p, "#1f77b4", 3.0);
  svg.segment(cplx(0, std::log10(opt.tolerance)), cplx(opt.max_generations + 1, std::log10(opt.tolerance)), "red");
  svg.save(out / "decay.svg");

  const auto& cert = res.certificate;
  if (!res.schedule_ok) {
    std::string ks;
    for (double k : res.K_history) ks += " " + io::fmt(k);
    std::cerr << "calibration retries exhausted; K history:" << ks << '\n';
    for (const auto& v : res.variations)
      for (const auto& r : v.regions)
        if (r.violations)
          std::cerr << "  generation " << v.m + 1 << " check " << r.name << " worst margin " << io::fmt(r.worst)
                    << " at (" << io::fmt(r.worst_at.real()) << ", " << io::fmt(r.worst_at.imag()) << ")\n";
    return report(false, "stitch: schedule checks failed");
  }
  if (!cert.passed) {
    const cplx w = cert.failure.find("disagreement") != std::string::npos ? cert.disagreement_at : cert.residual_at;
    return report(false, "stitch: " + cert.failure + " (worst at " + io::fmt(w.real()) + ", " + io::fmt(w.imag()) + ")");
  }
  return report(true, "stitch: certified at generation " + std::to_string(cert.generations) + ", disagreement " +
                          io::fmt(cert.disagreement) + ", residual " + io::fmt(cert.residual));
}

int cmd_verify(const io::RunConfig& c, const fs::path& out) {
  json j;
  bool ok = true;
  const auto plan = default_density_plan(c.boundary);
  const auto ball = certify_homogeneity(c.boundary, DensityMode::ball, plan);
  const bool dens = ball.inf_ratio > c.boundary.eps0 && (c.boundary.gaps.empty() || c.boundary.eps0 <= 0.5);
  j["density"] = {{"inf_ratio", io::number(ball.inf_ratio)}, {"passed", dens}};
  ok &= dens;
  if (!c.boundary.gaps.empty()) {
    const auto t = run_trace(c, out, std::nullopt);
    j["trace"] = t.summary;
    ok &= t.ok;
    const auto i = run_interp(c);
    j["interp"] = i.summary;
    ok &= i.ok;
  }
  const auto s = run_schedule(c, std::nullopt, false);
  j["schedule"] = {{"r", s.schedule ? io::number(s.schedule->r) : json(nullptr)}, {"passed", s.ok}};
  ok &= s.ok;
  j["passed"] = ok;
  io::write_json(out / "verify.json", j);
  return report(ok, "verify: density, crosscuts, interpolation and schedule certificates");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corona: numerical corona solutions on domains above Lipschitz graphs"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "config JSON")->required();
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "RNG seed");
    sub->add_option("--tolerance", flags.tolerance, "merge tolerance");
    sub->add_option("--mesh", flags.mesh, "quadrature nodes per cell side");
  };
  std::optional<double> gamma, r;
  bool literal = false;
  auto* density = app.add_subcommand("density", "certify the lower density of E0");
  auto* trace = app.add_subcommand("trace", "trace the level crosscuts and check their geometry");
  trace->add_option("--gamma", gamma, "tent angle for the containment check");
  auto* schedule = app.add_subcommand("schedule", "simulate the convergence-factor schedule");
  schedule->add_option("--r", r, "use this r instead of searching");
  schedule->add_flag("--literal", literal, "use the betas implied by eps0 and alpha_M");
  auto* interp = app.add_subcommand("interp", "build and check the interpolating families");
  auto* stitch = app.add_subcommand("stitch", "run the stitching iteration and certify the merge");
  auto* verify = app.add_subcommand("verify", "run every certificate short of stitching");
  for (auto* s : {density, trace, schedule, interp, stitch, verify}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const io::RunConfig cfg = load(flags);
    const fs::path out(flags.out);
    io::OutDirLock lock(out);
    if (density->parsed()) return cmd_density(cfg, out);
    if (trace->parsed()) return cmd_trace(cfg, out, gamma);
    if (schedule->parsed()) return cmd_schedule(cfg, out, r, literal);
    if (interp->parsed()) return cmd_interp(cfg, out);
    if (stitch->parsed()) return cmd_stitch(cfg, out);
    if (verify->parsed()) return cmd_verify(cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
