#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "corona/crosscuts.hpp"
#include "corona/graph_geometry.hpp"
#include "corona/interpolation.hpp"
#include "corona/scheduler.hpp"
#include "corona/stitching.hpp"

namespace corona::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Infinite endpoints travel as the strings "-inf" / "inf".
inline json number(double v) {
  if (v == inf) return "inf";
  if (v == -inf) return "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

inline double number(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return inf;
    if (s == "-inf") return -inf;
  }
  throw ConfigError("config: " + where + " must be a number or \"inf\"/\"-inf\"");
}

inline json point(cplx z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const BoundaryConfig& c) {
  json e0 = json::array();
  for (const auto& iv : c.e0) e0.push_back({number(iv.lo), number(iv.hi)});
  return {{"breakpoints", c.graph.breakpoints()}, {"slopes", c.graph.slopes()}, {"e0", e0}, {"eps0", c.eps0}};
}

inline BoundaryConfig boundary_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: boundary must be an object");
  std::vector<double> breaks, slopes{0.0};
  if (j.contains("breakpoints")) breaks = j.at("breakpoints").get<std::vector<double>>();
  if (j.contains("slopes")) slopes = j.at("slopes").get<std::vector<double>>();
  if (!j.contains("e0") || !j.at("e0").is_array()) throw ConfigError("config: boundary.e0 must be an array");
  std::vector<XInterval> e0;
  for (const auto& iv : j.at("e0")) {
    if (!iv.is_array() || iv.size() != 2) throw ConfigError("config: every e0 entry is a pair [lo, hi]");
    e0.push_back({number(iv[0], "e0 endpoint"), number(iv[1], "e0 endpoint")});
  }
  if (!j.contains("eps0")) throw ConfigError("config: boundary.eps0 is required");
  return BoundaryConfig::make(LipschitzGraph(breaks, slopes), e0, number(j.at("eps0"), "eps0"));
}

struct RunConfig {
  BoundaryConfig boundary;
  std::string preset = "cutpole";
  double tolerance = 1e-3;
  int mesh = 8;
  double window = 3.0;  // in gap lengths
  std::uint64_t seed = 1;
  double schedule_N = 1.0, schedule_K = 1.0;

  void validate() const {
    if (!(tolerance > 1e-6 && tolerance <= 1e-1)) throw ConfigError("config: tolerance must lie in (1e-6, 1e-1]");
    if (mesh < 8) throw ConfigError("config: mesh must be at least 8");
    if (!(window >= 2.0)) throw ConfigError("config: window must be at least 2 gap lengths");
    if (!(schedule_N > 0.0 && schedule_K > 0.0)) throw ConfigError("config: schedule N and K must be positive");
  }
};

inline json to_json(const RunConfig& c) {
  return {{"boundary", to_json(c.boundary)}, {"preset", c.preset},     {"tolerance", c.tolerance},
          {"mesh", c.mesh},                  {"window", c.window},     {"seed", c.seed},
          {"schedule", {{"N", c.schedule_N}, {"K", c.schedule_K}}}};
}

inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig c;
  try {
    c.boundary = boundary_from_json(j.contains("boundary") ? j.at("boundary") : j);
    if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
    if (j.contains("tolerance")) c.tolerance = number(j.at("tolerance"), "tolerance");
    if (j.contains("mesh")) c.mesh = j.at("mesh").get<int>();
    if (j.contains("window")) c.window = number(j.at("window"), "window");
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      if (s.contains("N")) c.schedule_N = number(s.at("N"), "schedule.N");
      if (s.contains("K")) c.schedule_K = number(s.at("K"), "schedule.K");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

// Shortest round-trip decimal form, so reruns write identical bytes.
inline std::string fmt(double v) {
  if (v == inf) return "inf";
  if (v == -inf) return "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Comma-separated, header row, LF line ends.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    for (double v : values) s.push_back(fmt(v));
    row_strings(s);
  }
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

// Minimal SVG canvas over a world-coordinate window (y up).
class Svg {
 public:
  Svg(double x0, double x1, double y0, double y1, int width = 800)
      : x0_(x0), x1_(x1), y0_(y0), y1_(y1), w_(width), h_(int(width * (y1 - y0) / (x1 - x0))) {}

  void polyline(const std::vector<cplx>& pts, const std::string& stroke, double width = 1.0) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\" points=\"";
    for (cplx p : pts) body_ << sx(p.real()) << ',' << sy(p.imag()) << ' ';
    body_ << "\"/>\n";
  }
  void polygon(const std::vector<cplx>& pts, const std::string& stroke, const std::string& fill) {
    body_ << "<polygon stroke=\"" << stroke << "\" fill=\"" << fill << "\" fill-opacity=\"0.2\" points=\"";
    for (cplx p : pts) body_ << sx(p.real()) << ',' << sy(p.imag()) << ' ';
    body_ << "\"/>\n";
  }
  void segment(cplx a, cplx b, const std::string& stroke, double width = 1.0) { polyline({a, b}, stroke, width); }
  void dot(cplx p, const std::string& fill, double r = 2.0) {
    body_ << "<circle cx=\"" << sx(p.real()) << "\" cy=\"" << sy(p.imag()) << "\" r=\"" << r << "\" fill=\"" << fill
          << "\"/>\n";
  }
  void text(cplx p, const std::string& s) {
    body_ << "<text x=\"" << sx(p.real()) << "\" y=\"" << sy(p.imag()) << "\" font-size=\"12\">" << s << "</text>\n";
  }
  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_ << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
  }

 private:
  double x0_, x1_, y0_, y1_;
  int w_, h_;
  std::ostringstream body_;
  std::string sx(double x) const { return fmt(std::round(100.0 * w_ * (x - x0_) / (x1_ - x0_)) / 100.0); }
  std::string sy(double y) const { return fmt(std::round(100.0 * h_ * (y1_ - y) / (y1_ - y0_)) / 100.0); }
};

// One run per out directory: exclusive lock file, released on destruction.
class OutDirLock {
 public:
  explicit OutDirLock(const fs::path& dir) : path_(dir / ".corona.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw ConfigError("out dir " + dir.string() + " is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  OutDirLock(const OutDirLock&) = delete;
  OutDirLock& operator=(const OutDirLock&) = delete;
  ~OutDirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

inline json to_json(const DensityReport& r) {
  static const char* names[] = {"ball", "projection", "interval"};
  return {{"mode", names[int(r.mode)]},
          {"inf_ratio", number(r.inf_ratio)},
          {"worst", {{"x", r.worst.x}, {"r", r.worst.r}, {"ratio", r.worst.ratio}}},
          {"samples", r.samples.size()}};
}

inline json to_json(const Schedule& s) {
  return {{"inputs", {{"N", s.in.N}, {"K", s.in.K}, {"beta1", s.in.beta1}, {"beta2", s.in.beta2}}},
          {"r", s.r},
          {"r0", s.r0},
          {"horizon", s.horizon},
          {"b", s.b},
          {"xbar", s.xbar},
          {"ybar", s.ybar},
          {"C1", s.C1},
          {"C2", s.C2},
          {"b_inf", s.b_inf},
          {"admissible", s.admissible},
          {"clamped", s.clamped},
          {"notes", s.notes}};
}

inline json to_json(const FamilyReport& r) {
  return {{"node_error", r.node_error},
          {"orthogonality", r.orthogonality},
          {"sup_excess", number(r.sup_excess)},
          {"sum_excess", number(r.sum_excess)},
          {"class_sum_excess", number(r.class_sum_excess)},
          {"samples", r.samples}};
}

inline json to_json(const Certificate& c) {
  return {{"passed", c.passed},
          {"generations", c.generations},
          {"disagreement", c.disagreement},
          {"disagreement_at", point(c.disagreement_at)},
          {"residual", c.residual},
          {"residual_at", point(c.residual_at)},
          {"grid_points", c.grid_points},
          {"sup_norm", c.sup_norm},
          {"case_i", {{"value", c.case_i_value}, {"bound", c.case_i_bound}}},
          {"tail_bound", c.tail_bound},
          {"failure", c.failure}};
}

inline json to_json(const VariationReport& v) {
  json regions = json::array();
  for (const auto& r : v.regions)
    regions.push_back({{"name", r.name},
                       {"samples", r.samples},
                       {"violations", r.violations},
                       {"worst_margin", number(r.worst)},
                       {"worst_at", point(r.worst_at)}});
  return {{"m", v.m}, {"regions", regions}};
}

inline json to_json(const StitchResult& r) {
  json variations = json::array();
  for (const auto& v : r.variations) variations.push_back(to_json(v));
  return {{"constants",
           {{"N", r.N},
            {"mu", r.mu},
            {"interpolation_constant", r.interpolation_constant},
            {"kappa", r.kappa},
            {"p", r.p},
            {"beta_phi", r.beta_phi},
            {"min_cell_modulus", r.min_cell_modulus},
            {"cells", r.cells},
            {"mesh_nodes", r.mesh_nodes}}},
          {"K_history", r.K_history},
          {"restart_reasons", r.restart_reasons},
          {"restarts", r.restarts},
          {"schedule_ok", r.schedule_ok},
          {"variations", variations},
          {"certificate", to_json(r.certificate)}};
}

inline void write_trace_csv(const fs::path& path, const std::vector<GenerationRecord>& trace) {
  CsvWriter csv(path, {"m", "b", "x", "y", "K", "residual", "ratio", "zero"});
  for (const auto& g : trace) csv.row({double(g.m), g.b, g.x, g.y, g.K, g.residual, g.ratio, g.zero ? 1.0 : 0.0});
}

}  // namespace corona::io
