#pragma once

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "clm/api.hpp"

namespace clm::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_domain = 2;
inline constexpr int exit_convergence = 3;

// Bad flag, config key or value; `flag` names the offending option.
class usage_error : public std::runtime_error {
 public:
  usage_error(std::string flag, const std::string& message) : std::runtime_error(message), flag_(std::move(flag)) {}
  const std::string& flag() const { return flag_; }

 private:
  std::string flag_;
};

enum class opt_kind { real, integer, text, point, window, flag };

struct opt_spec {
  std::string key;  // snake_case; the flag is --key with '_' -> '-'
  opt_kind kind;
  json fallback;  // null = unset unless required
  std::string help;
  bool required = false;
};

struct command_spec {
  std::string name;
  std::string help;
  std::vector<opt_spec> opts;
};

inline std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  for (auto& c : f)
    if (c == '_') c = '-';
  return f;
}

// Locale-independent decimal parsing; rejects trailing text, hex and non-finite values.
inline double parse_real(std::string_view s, const std::string& flag) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v, std::chars_format::general);
  if (s.empty() || ec != std::errc() || ptr != e || !std::isfinite(v))
    throw usage_error(flag, "invalid decimal value for " + flag + ": '" + std::string(s) + "'");
  return v;
}

inline long long parse_integer(std::string_view s, const std::string& flag) {
  long long v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (s.empty() || ec != std::errc() || ptr != e)
    throw usage_error(flag, "invalid integer value for " + flag + ": '" + std::string(s) + "'");
  return v;
}

inline std::vector<double> parse_reals(std::string_view s, std::size_t n, const std::string& flag) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(parse_real(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start), flag));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() != n)
    throw usage_error(flag, flag + " expects " + std::to_string(n) + " comma-separated numbers, got '" + std::string(s) + "'");
  return out;
}

inline json window_json(double x0, double x1, double y0, double y1, const std::string& flag) {
  if (!(x1 > x0 && y1 > y0)) throw usage_error(flag, flag + " must satisfy x0 < x1 and y0 < y1");
  return {{"x0", x0}, {"x1", x1}, {"y0", y0}, {"y1", y1}};
}

// Flag text -> canonical JSON value.
inline json parse_flag_value(const opt_spec& o, const std::string& text) {
  const auto flag = flag_name(o.key);
  switch (o.kind) {
    case opt_kind::real: return parse_real(text, flag);
    case opt_kind::integer: return parse_integer(text, flag);
    case opt_kind::text: return text;
    case opt_kind::point: {
      auto v = parse_reals(text, 2, flag);
      return json::array({v[0], v[1]});
    }
    case opt_kind::window: {
      auto v = parse_reals(text, 4, flag);
      return window_json(v[0], v[1], v[2], v[3], flag);
    }
    case opt_kind::flag: return text == "true" || text == "1";
  }
  return nullptr;
}

// Config-file JSON -> canonical JSON value.
inline json normalize_config_value(const opt_spec& o, const json& v) {
  const auto where = "config key '" + o.key + "'";
  const auto flag = flag_name(o.key);
  auto finite = [&](const json& x) {
    if (!x.is_number() || !std::isfinite(x.get<double>())) throw usage_error(flag, where + " must be a finite number");
    return x.get<double>();
  };
  switch (o.kind) {
    case opt_kind::real: return finite(v);
    case opt_kind::integer:
      if (!v.is_number_integer()) throw usage_error(flag, where + " must be an integer");
      return v.get<long long>();
    case opt_kind::text:
      if (!v.is_string()) throw usage_error(flag, where + " must be a string");
      return v;
    case opt_kind::point:
      if (!v.is_array() || v.size() != 2) throw usage_error(flag, where + " must be [x, y]");
      return json::array({finite(v[0]), finite(v[1])});
    case opt_kind::window:
      if (v.is_array() && v.size() == 4) return window_json(finite(v[0]), finite(v[1]), finite(v[2]), finite(v[3]), flag);
      if (v.is_object() && v.size() == 4 && v.contains("x0") && v.contains("x1") && v.contains("y0") && v.contains("y1"))
        return window_json(finite(v["x0"]), finite(v["x1"]), finite(v["y0"]), finite(v["y1"]), flag);
      throw usage_error(flag, where + " must be {x0, x1, y0, y1} or [x0, x1, y0, y1]");
    case opt_kind::flag:
      if (!v.is_boolean()) throw usage_error(flag, where + " must be true or false");
      return v;
  }
  return nullptr;
}

struct run_config {
  std::string command;
  json values = json::object();  // canonical values keyed by snake_case name; unset keys absent

  bool has(const std::string& k) const { return values.contains(k) && !values[k].is_null(); }
  double real(const std::string& k) const { return values.at(k).get<double>(); }
  long long integer(const std::string& k) const { return values.at(k).get<long long>(); }
  std::string text(const std::string& k) const { return values.at(k).get<std::string>(); }
  bool flag(const std::string& k) const { return has(k) && values.at(k).get<bool>(); }
  plane_point point(const std::string& k) const { return {values.at(k)[0].get<double>(), values.at(k)[1].get<double>()}; }
  rect window(const std::string& k) const {
    const auto& w = values.at(k);
    return {w["x0"].get<double>(), w["x1"].get<double>(), w["y0"].get<double>(), w["y1"].get<double>()};
  }

  friend bool operator==(const run_config&, const run_config&) = default;
};

// Options shared by every command except serve.
inline std::vector<opt_spec> common_opts() {
  return {
      {"out", opt_kind::text, "out", "output directory"},
      {"name", opt_kind::text, nullptr, "output file stem (default: command name)"},
      {"seed", opt_kind::integer, 0, "seed for stochastic sampling (all current engines are deterministic)"},
      {"threads", opt_kind::integer, 0, "worker threads (0 = COUPLED_MAP_THREADS or all cores)"},
  };
}

inline std::vector<opt_spec> raster_opts(json window, long long res) {
  return {
      {"window", opt_kind::window, std::move(window), "plane window x0,x1,y0,y1"},
      {"width", opt_kind::integer, res, "image width in cells"},
      {"height", opt_kind::integer, res, "image height in cells"},
  };
}

inline const json unit_window = {{"x0", -0.1}, {"x1", 1.1}, {"y0", -0.1}, {"y1", 1.1}};

inline std::vector<command_spec> command_table() {
  const opt_spec mu{"mu", opt_kind::real, nullptr, "logistic parameter mu", true};
  const opt_spec eps{"eps", opt_kind::real, nullptr, "coupling strength epsilon", true};
  auto with = [](std::vector<opt_spec> a, const std::vector<opt_spec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const auto raster = raster_opts(unit_window, 512);
  const auto attractor_budget = std::vector<opt_spec>{
      {"n_total", opt_kind::integer, 10000000, "total iterates"},
      {"n_transient", opt_kind::integer, 10000, "discarded transient iterates"},
  };
  return {
      {"fixed-points", "fixed points with eigenvalues and classification", {mu, eps}},
      {"loci",
       "bifurcation loci at one eps and a loci diagram over a parameter box",
       with({{"eps", opt_kind::real, nullptr, "evaluate the loci at this eps"},
             {"eps_range", opt_kind::point, json::array({-1.0, 0.5}), "diagram eps range lo,hi"},
             {"mu_range", opt_kind::point, json::array({0.0, 8.0}), "diagram mu range lo,hi"}},
            {{"width", opt_kind::integer, 512, "diagram width"}, {"height", opt_kind::integer, 512, "diagram height"}})},
      {"orbit",
       "forward orbit of one point",
       with({mu, eps, {"z0", opt_kind::point, nullptr, "initial point x,y", true},
             {"n_steps", opt_kind::integer, 1000, "iterations"},
             {"max_samples", opt_kind::integer, 1000000, "stored samples (evenly strided)"}},
            raster)},
      {"preimages",
       "iterated preimage tree of a point",
       with({mu, eps, {"root", opt_kind::point, json::array({0.0, 0.0}), "root point x,y"},
             {"depth", opt_kind::integer, 8, "preimage depth"},
             {"budget", opt_kind::integer, 10000000, "point budget"}},
            raster)},
      {"cloud",
       "preimage trees of every point of a forward orbit",
       with({mu, eps, {"z0", opt_kind::point, nullptr, "orbit seed x,y", true},
             {"n_forward", opt_kind::integer, 100, "forward steps"},
             {"depth_back", opt_kind::integer, 6, "preimage depth per orbit point"},
             {"budget", opt_kind::integer, 10000000, "point budget"}},
            raster)},
      {"curve-preimage",
       "iterated preimages of the circle C or the boundary of Q",
       with({mu, eps, {"curve", opt_kind::text, "C", "seed curve: C or Q"},
             {"n", opt_kind::integer, 4, "number of preimage steps"},
             {"resample", opt_kind::integer, 4096, "vertices per output branch"}},
            raster)},
      {"gamma",
       "invariant Jordan curve by fixed-point iteration",
       with({mu, eps, {"grid", opt_kind::integer, 4096, "graph grid intervals (even)"},
             {"max_iters", opt_kind::integer, 100000, "iteration cap"},
             {"tol", opt_kind::real, 1e-10, "sup-norm convergence tolerance"},
             {"samples", opt_kind::integer, 4096, "vertices in the exported curve"}},
            raster)},
      {"gamma-seq",
       "curve sequence built from preimages of O, with optional exterior bounded witnesses",
       with({mu, eps, {"n", opt_kind::integer, 6, "number of stages"},
             {"resample", opt_kind::integer, 4096, "vertices per stage"},
             {"witness_budget", opt_kind::integer, 0, "preimages of O examined for exterior witnesses (0 = skip)"}},
            raster)},
      {"basin",
       "escape-time raster, or the basin of an attractor when --attractor-seed is given",
       with(with({mu, eps, {"n_max", opt_kind::integer, 200, "escape steps (transient before probing for basins)"},
                  {"supersample", opt_kind::integer, 1, "samples per cell axis (escape mode)"},
                  {"attractor_seed", opt_kind::point, nullptr, "seed whose attractor defines the basin"},
                  {"probe_steps", opt_kind::integer, 64, "probe steps per cell (basin mode)"}},
                 raster),
            attractor_budget)},
      {"attractor",
       "attractor estimate: occupied cells, area and period",
       with(with({mu, eps, {"z0", opt_kind::point, nullptr, "initial point x,y", true},
                  {"max_period", opt_kind::integer, 64, "largest period tested"}},
                 raster_opts({{"x0", 0.0}, {"x1", 1.0}, {"y0", 0.0}, {"y1", 1.0}}, 512)),
            attractor_budget)},
      {"components",
       "connected components of a raster class with topology and annulus class",
       with(with({mu, eps, {"n_max", opt_kind::integer, 2, "escape steps"},
                  {"target", opt_kind::text, "escaped", "escaped or bounded (escape mode); this or other (basin mode)"},
                  {"attractor_seed", opt_kind::point, nullptr, "label a basin instead of an escape raster"},
                  {"probe_steps", opt_kind::integer, 64, "probe steps per cell (basin mode)"}},
                 raster),
            attractor_budget)},
      {"hopf",
       "bracket the Hopf crossing of a periodic orbit by continuation in mu",
       {eps,
        {"mu_start", opt_kind::real, nullptr, "continuation start", true},
        {"mu_end", opt_kind::real, nullptr, "continuation end", true},
        {"period", opt_kind::integer, 2, "orbit period"},
        {"bracket_width", opt_kind::real, 1e-5, "target bracket width"},
        {"steps", opt_kind::integer, 200, "continuation samples"},
        {"seed", opt_kind::point, json::array({0.3, 0.2}), "orbit seed for closest-return guessing"},
        {"guess", opt_kind::point, nullptr, "direct Newton guess (skips seeding)"}}},
      {"pitchfork",
       "checks of the symmetry-breaking pitchfork at mu0 and mu0'",
       {eps, {"samples", opt_kind::integer, 12, "parameter samples past the locus"}}},
      {"serve",
       "local HTTP JSON service",
       {{"host", opt_kind::text, "127.0.0.1", "bind address"},
        {"port", opt_kind::integer, 8080, "TCP port"},
        {"threads", opt_kind::integer, 0, "engine worker threads"}}},
  };
}

inline const command_spec& find_command(const std::vector<command_spec>& table, const std::string& name) {
  for (const auto& c : table)
    if (c.name == name) return c;
  throw usage_error("command", "unknown command '" + name + "'");
}

inline std::vector<opt_spec> all_opts(const command_spec& c) {
  auto opts = c.opts;
  if (c.name != "serve") {
    for (auto& o : common_opts()) {
      bool dup = false;
      for (const auto& x : opts) dup = dup || x.key == o.key;
      if (!dup) opts.push_back(o);
    }
  }
  return opts;
}

// Precedence: flags > config file > defaults.
inline run_config resolve(const command_spec& cmd, const std::map<std::string, std::string>& flags,
                          const json& config = json::object()) {
  const auto opts = all_opts(cmd);
  run_config rc;
  rc.command = cmd.name;
  if (!config.is_object()) throw usage_error("--config", "config must be a JSON object");
  for (const auto& [k, v] : config.items()) {
    if (k == "command") {
      if (!v.is_string() || v.get<std::string>() != cmd.name)
        throw usage_error("--config", "config is for command '" + v.dump() + "', not '" + cmd.name + "'");
      continue;
    }
    if (k == "schema") continue;
    auto it = std::find_if(opts.begin(), opts.end(), [&](const opt_spec& o) { return o.key == k; });
    if (it == opts.end()) throw usage_error("--config", "unknown config key '" + k + "' for " + cmd.name);
  }
  for (const auto& o : opts) {
    json v = o.fallback;
    if (config.contains(o.key) && !config[o.key].is_null()) v = normalize_config_value(o, config[o.key]);
    if (auto f = flags.find(o.key); f != flags.end()) v = parse_flag_value(o, f->second);
    if (v.is_null()) {
      if (o.required) throw usage_error(flag_name(o.key), "missing required option " + flag_name(o.key));
      continue;
    }
    rc.values[o.key] = v;
  }
  return rc;
}

// Config text with every resolved value; parse_config(emit_config(c)) == c.
inline std::string emit_config(const run_config& c) {
  json j = c.values;
  j["command"] = c.command;
  return j.dump(2);
}

inline run_config parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw usage_error("--config", std::string("malformed config: ") + e.what());
  }
  if (!j.is_object() || !j.contains("command") || !j["command"].is_string())
    throw usage_error("--config", "config needs a string 'command' field");
  const auto table = command_table();
  return resolve(find_command(table, j["command"].get<std::string>()), {}, j);
}

inline json read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw usage_error("--config", "cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw usage_error("--config", "malformed config " + path + ": " + e.what());
  }
}

// Output sink for one run: files land in <out>/<stem>.<ext>.
struct run_context {
  std::filesystem::path dir;
  std::string stem;
  exec_options exec;
  std::ostream& log;
  json outputs = json::object();

  std::string path_for(const std::string& kind, const std::string& ext) {
    auto p = (dir / (stem + ext)).string();
    outputs[kind] = p;
    return p;
  }
  void write_text(const std::string& kind, const std::string& ext, const std::string& content) {
    const auto p = path_for(kind, ext);
    std::ofstream f(p, std::ios::binary);
    f << content;
    if (!f) throw error(error_code::io_error, "write failed: " + p);
  }
  void write_png(const std::string& kind, const rgb_image& img) { write_image(img, path_for(kind, ".png")); }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt(plane_point z) { return "(" + fmt(z.x) + ", " + fmt(z.y) + ")"; }

inline param_point params(const run_config& c) {
  try {
    return param_point(c.real("mu"), c.real("eps"));
  } catch (const error& e) {
    const std::string msg = e.what();
    throw usage_error(msg.find("epsilon") != std::string::npos ? "--eps" : "--mu",
                      msg + " (--mu " + fmt(c.real("mu")) + ", --eps " + fmt(c.real("eps")) + ")");
  }
}

inline grid_spec grid(const run_config& c) {
  const auto w = c.integer("width"), h = c.integer("height");
  if (w < 2 || h < 2 || w > 1 << 15 || h > 1 << 15) throw usage_error("--width", "width and height must lie in [2, 32768]");
  return grid_spec(c.window("window"), static_cast<int>(w), static_cast<int>(h));
}

inline int positive_int(const run_config& c, const std::string& k, long long lo = 1, long long hi = 1LL << 31) {
  const auto v = c.integer(k);
  if (v < lo || v >= hi)
    throw usage_error(flag_name(k), flag_name(k) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi - 1) + "]");
  return static_cast<int>(v);
}

inline long long ranged(const run_config& c, const std::string& k, long long lo, long long hi) {
  const auto v = c.integer(k);
  if (v < lo || v > hi)
    throw usage_error(flag_name(k), flag_name(k) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

inline attractor_options attractor_opts(const run_config& c) {
  attractor_options o;
  o.n_total = ranged(c, "n_total", 2, 1LL << 40);
  o.n_transient = ranged(c, "n_transient", 0, o.n_total - 1);
  o.period_window = static_cast<std::size_t>(std::min<long long>(o.n_total - o.n_transient, 1000000));
  if (c.has("max_period")) o.max_period = positive_int(c, "max_period", 1, 100000);
  return o;
}

}  // namespace detail

inline json cmd_fixed_points(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  json list = json::array();
  for (const auto& f : fixed_points(p)) {
    list.push_back(to_json(f));
    ctx.log << to_string(f.label) << " " << detail::fmt(f.location) << " " << to_string(f.classification) << " eigenvalues";
    for (const auto& l : f.eigenvalues) ctx.log << " " << detail::fmt(l.real()) << (l.imag() >= 0 ? "+" : "") << detail::fmt(l.imag()) << "i";
    ctx.log << "\n";
  }
  return {{"fixed_points", list}, {"strength", to_string(p.strength_class())}};
}

inline json cmd_loci(const run_config& c, run_context& ctx) {
  json out = json::object();
  if (c.has("eps")) {
    const auto v = loci(c.real("eps"));
    out["loci"] = to_json(v);
    for (auto curve : all_loci)
      if (auto x = locus_value(v, curve)) ctx.log << to_string(curve) << " = " << detail::fmt(*x) << "\n";
  }
  const auto er = c.point("eps_range"), mr = c.point("mu_range");
  auto d = loci_diagram(er.x, er.y, mr.x, mr.y, detail::positive_int(c, "width", 2, 1 << 15),
                        detail::positive_int(c, "height", 2, 1 << 15));
  if (!d.empty()) ctx.write_png("image", paint_loci(d));
  json counts = json::object();
  for (auto curve : all_loci) counts[to_string(curve)] = d.count(curve);
  out["diagram_cells"] = counts;
  return out;
}

inline json cmd_orbit(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  auto r = iterate_forward(p, c.point("z0"), detail::ranged(c, "n_steps", 0, 1LL << 40),
                           static_cast<std::size_t>(detail::ranged(c, "max_samples", 1, 1LL << 32)));
  std::string csv = "step,x,y\n";
  char buf[96];
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g\n", r.sample_steps[i], r.samples[i].x, r.samples[i].y);
    csv += buf;
  }
  ctx.write_text("csv", ".csv", csv);
  ctx.write_png("image", plot_points(g, r.samples));
  ctx.log << "verdict " << (r.verdict.escaped ? "escaped at step " + std::to_string(r.verdict.step) : "bounded") << "\n";
  json j = to_json(r);
  j.erase("samples");
  j["sample_count"] = r.samples.size();
  return j;
}

inline json cmd_preimages(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  auto t = preimage_tree(p, c.point("root"), detail::positive_int(c, "depth", 0, 64),
                         static_cast<std::size_t>(detail::ranged(c, "budget", 1, 1LL << 36)), std::nullopt, ctx.exec);
  ctx.write_text("csv", ".csv", points_csv(t.levels, "level"));
  std::vector<plane_point> all;
  for (const auto& l : t.levels) all.insert(all.end(), l.begin(), l.end());
  ctx.write_png("image", plot_points(g, all));
  ctx.log << t.total_points() << " points over " << t.levels.size() - 1 << " levels"
          << (t.budget_exhausted ? " (budget exhausted)" : "") << "\n";
  json level_sizes = json::array();
  for (const auto& l : t.levels) level_sizes.push_back(l.size());
  return {{"level_sizes", level_sizes}, {"total_points", t.total_points()}, {"budget_exhausted", t.budget_exhausted}};
}

inline json cmd_cloud(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  auto pts = mixed_cloud(p, c.point("z0"), detail::positive_int(c, "n_forward", 0), detail::positive_int(c, "depth_back", 0, 64),
                         static_cast<std::size_t>(detail::ranged(c, "budget", 1, 1LL << 36)), ctx.exec);
  ctx.write_text("csv", ".csv", points_csv({pts}, "group"));
  ctx.write_png("image", plot_points(g, pts));
  ctx.log << pts.size() << " points\n";
  return {{"points", pts.size()}};
}

inline json cmd_curve_preimage(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  const auto which = c.text("curve");
  if (which != "C" && which != "Q") throw usage_error("--curve", "--curve must be C or Q");
  std::vector<double> hd;
  auto curves = iterated_curve_preimage(p, which == "C" ? curve_seed::circle_C : curve_seed::boundary_Q,
                                        detail::positive_int(c, "n", 0, 64),
                                        static_cast<std::size_t>(detail::positive_int(c, "resample", 16)), &hd);
  ctx.write_text("csv", ".csv", curves_csv(curves));
  ctx.write_png("image", plot_curves(g, curves));
  ctx.log << curves.size() << " curves\n";
  std::size_t closed = 0;
  for (const auto& cv : curves) closed += cv.closed ? 1 : 0;
  return {{"curves", curves.size()}, {"closed_curves", closed}, {"stage_hausdorff", hd}};
}

inline json cmd_gamma(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  gamma_options o;
  o.grid = detail::positive_int(c, "grid", 2, 1 << 24);
  if (o.grid % 2) throw usage_error("--grid", "--grid must be even");
  o.max_iters = detail::positive_int(c, "max_iters");
  o.tol = c.real("tol");
  if (!(o.tol > 0)) throw usage_error("--tol", "--tol must be positive");
  auto r = build_gamma(p, o, ctx.exec.stop);
  const auto curve = resample(r.curve.assembled, static_cast<std::size_t>(detail::positive_int(c, "samples", 4)));
  ctx.write_text("csv", ".csv", curves_csv({curve}));
  ctx.write_png("image", plot_curves(g, {curve}));
  ctx.log << "regime " << to_string(r.regime) << ", converged after " << r.iterations << " iterations\n";
  return to_json(r);
}

inline json cmd_gamma_seq(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  auto stages = build_gamma_sequence(p, detail::positive_int(c, "n", 1, 64),
                                     static_cast<std::size_t>(detail::positive_int(c, "resample", 16)));
  std::vector<polyline> curves;
  json st = json::array();
  for (const auto& s : stages) {
    curves.push_back(s.assembled);
    st.push_back(to_json(s));
  }
  ctx.write_text("csv", ".csv", curves_csv(curves));
  ctx.write_png("image", plot_curves(g, curves));
  json out = {{"stages", st}};
  const auto budget = detail::ranged(c, "witness_budget", 0, 1LL << 36);
  if (budget > 0) {
    auto w = exterior_bounded_witnesses(p, stages.back().assembled, static_cast<std::size_t>(budget));
    json wj = json::array();
    for (const auto& x : w) wj.push_back(to_json(x));
    out["witnesses"] = wj;
    ctx.log << w.size() << " exterior bounded witnesses\n";
  }
  ctx.log << stages.size() << " stages\n";
  return out;
}

inline json cmd_basin(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  json out;
  if (c.has("attractor_seed")) {
    basin_options o;
    o.n_max = detail::positive_int(c, "n_max", 0);
    o.probe_steps = detail::positive_int(c, "probe_steps");
    o.attractor = detail::attractor_opts(c);
    auto b = render_basin_of_attractor(p, c.point("attractor_seed"), g, o, ctx.exec);
    ctx.write_png("image", paint_basin(b));
    out = sidecar(b);
    ctx.log << "ThisAttractor " << b.count(basin_cell::this_attractor) << ", OtherBounded "
            << b.count(basin_cell::other_bounded) << ", Escaped " << b.count(basin_cell::escaped) << ", Unclassified "
            << b.count(basin_cell::unclassified) << "\n";
  } else {
    auto r = render_escape(p, g, detail::positive_int(c, "n_max", 0), ctx.exec, detail::positive_int(c, "supersample", 1, 65));
    ctx.write_png("image", paint_escape(r));
    out = sidecar(r);
    ctx.log << r.bounded_count() << " of " << g.cell_count() << " cells bounded\n";
  }
  return out;
}

inline json cmd_attractor(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  auto a = estimate_attractor(p, c.point("z0"), g, detail::attractor_opts(c));
  ctx.write_png("image", paint_attractor(a));
  ctx.log << a.occupied_count << " occupied cells, area " << detail::fmt(a.area_estimate) << ", period "
          << (a.period ? std::to_string(*a.period) : std::string("none")) << "\n";
  return to_json(a);
}

inline json cmd_components(const run_config& c, run_context& ctx) {
  const auto p = detail::params(c);
  const auto g = detail::grid(c);
  const auto target = c.text("target");
  component_labeling lab;
  if (c.has("attractor_seed")) {
    if (target != "this" && target != "other") throw usage_error("--target", "basin mode --target must be this or other");
    basin_options o;
    o.n_max = detail::positive_int(c, "n_max", 0);
    o.probe_steps = detail::positive_int(c, "probe_steps");
    o.attractor = detail::attractor_opts(c);
    auto b = render_basin_of_attractor(p, c.point("attractor_seed"), g, o, ctx.exec);
    lab = label_basin(b, target == "this" ? basin_cell::this_attractor : basin_cell::other_bounded);
  } else {
    if (target != "escaped" && target != "bounded") throw usage_error("--target", "--target must be escaped or bounded");
    auto r = render_escape(p, g, detail::positive_int(c, "n_max", 0), ctx.exec);
    lab = label_components(r, target == "escaped" ? component_target::escaped : component_target::bounded);
  }
  ctx.write_png("image", paint_labels(lab));
  json comps = json::array();
  std::map<std::string, int> by_topology, by_class;
  int interior = 0;
  for (const auto& r : lab.components) {
    comps.push_back(to_json(r));
    ++by_topology[to_string(r.topo)];
    if (r.annulus) ++by_class[to_string(*r.annulus)];
    if (!r.touches_border) ++interior;
  }
  ctx.log << lab.components.size() << " components, " << interior << " not touching the window border\n";
  for (const auto& [k, v] : by_topology) ctx.log << "  " << k << ": " << v << "\n";
  for (const auto& [k, v] : by_class) ctx.log << "  annulus " << k << ": " << v << "\n";
  return {{"components", comps}, {"interior_components", interior}, {"by_topology", by_topology}, {"by_annulus_class", by_class}};
}

inline json cmd_hopf(const run_config& c, run_context& ctx) {
  const double eps = c.real("eps");
  const double mu0 = c.real("mu_start"), mu1 = c.real("mu_end");
  const int period = detail::positive_int(c, "period", 1, 1025);
  try {
    param_point(mu0, eps);
  } catch (const error& e) {
    throw usage_error("--mu-start", e.what());
  }
  const plane_point guess = c.has("guess") ? c.point("guess") : seed_periodic_guess(param_point(mu0, eps), period, c.point("seed"));
  hopf_options o;
  o.steps = detail::positive_int(c, "steps", 2);
  auto h = hopf_bracket(eps, period, mu0, mu1, c.real("bracket_width"), guess, o, ctx.exec);
  ctx.write_text("csv", ".csv", continuation_csv(h.continuation));
  ctx.log << "Hopf crossing in [" << detail::fmt(h.mu_lo) << ", " << detail::fmt(h.mu_hi) << "]"
          << (h.orbit_lost_at_hi ? " (orbit lost at the right end)" : "") << "\n";
  return to_json(h);
}

inline json cmd_pitchfork(const run_config& c, run_context& ctx) {
  auto r = pitchfork_check(c.real("eps"), detail::positive_int(c, "samples", 3, 10000));
  ctx.log << "pitchfork at mu = " << detail::fmt(r.locus) << " from " << (r.from_origin ? "O" : "P_mu") << ": "
          << (r.passed() ? "passed" : "failed") << "\n";
  return to_json(r);
}

// Maps library errors to process exit codes.
inline int exit_code_for(error_code c) {
  switch (c) {
    case error_code::invalid_argument:
    case error_code::io_error: return exit_usage;
    case error_code::not_converged:
    case error_code::no_convergence:
    case error_code::orbit_lost:
    case error_code::order_ambiguity:
    case error_code::converged_to_lower_period: return exit_convergence;
    default: return exit_domain;
  }
}

// Runs one resolved config, writing outputs and the manifest.
inline int execute(const run_config& c, std::ostream& out, std::ostream& err) {
  using handler = json (*)(const run_config&, run_context&);
  static const std::map<std::string, handler> handlers{
      {"fixed-points", cmd_fixed_points}, {"loci", cmd_loci},         {"orbit", cmd_orbit},
      {"preimages", cmd_preimages},       {"cloud", cmd_cloud},       {"curve-preimage", cmd_curve_preimage},
      {"gamma", cmd_gamma},               {"gamma-seq", cmd_gamma_seq}, {"basin", cmd_basin},
      {"attractor", cmd_attractor},       {"components", cmd_components}, {"hopf", cmd_hopf},
      {"pitchfork", cmd_pitchfork},
  };
  try {
    if (c.command == "serve") {
      api_service::config sc;
      sc.threads = static_cast<unsigned>(detail::ranged(c, "threads", 0, 4096));
      api_service svc(sc);
      api_server server(svc);
      const auto host = c.text("host");
      const int port = static_cast<int>(detail::ranged(c, "port", 1, 65535));
      out << "serving on http://" << host << ":" << port << "\n" << std::flush;
      server.run(host, port);
      return exit_ok;
    }
    auto h = handlers.find(c.command);
    if (h == handlers.end()) throw usage_error("command", "unknown command '" + c.command + "'");
    std::filesystem::path dir = c.text("out");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw error(error_code::io_error, "cannot create " + dir.string() + ": " + ec.message());
    run_context ctx{dir, c.has("name") ? c.text("name") : c.command,
                    {static_cast<unsigned>(detail::ranged(c, "threads", 0, 4096)), nullptr}, out};
    const auto t0 = std::chrono::steady_clock::now();
    json result = h->second(c, ctx);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto manifest_path = (dir / (ctx.stem + ".json")).string();
    json manifest = {{"schema", 1},
                     {"command", c.command},
                     {"config", c.values},
                     {"threads", resolve_threads(ctx.exec.threads)},
                     {"elapsed_seconds", secs},
                     {"outputs", ctx.outputs},
                     {"result", result}};
    std::ofstream f(manifest_path);
    f << manifest.dump(2) << "\n";
    if (!f) throw error(error_code::io_error, "write failed: " + manifest_path);
    out << "manifest " << manifest_path << "\n";
    return exit_ok;
  } catch (const usage_error& e) {
    err << "usage error (" << e.flag() << "): " << e.what() << "\n";
    return exit_usage;
  } catch (const error& e) {
    err << e.what() << "\n";
    return exit_code_for(e.code());
  }
}

// Full command line: parse, merge config, run.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const auto table = command_table();
  CLI::App app{"Numerical lab for the symmetric coupled logistic map"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, bool> print_config;
  std::vector<std::pair<CLI::App*, std::string>> subs;
  for (const auto& cmd : table) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    subs.emplace_back(sub, cmd.name);
    sub->add_option("--config", config_paths[cmd.name], "JSON config file; flags override its values");
    sub->add_flag("--print-config", print_config[cmd.name], "print the resolved config and exit");
    for (const auto& o : all_opts(cmd)) {
      const auto key = o.key;
      const auto name = cmd.name;
      if (o.kind == opt_kind::flag) {
        sub->add_flag_callback(flag_name(o.key), [&flags, name, key] { flags[name][key] = "true"; }, o.help);
      } else {
        auto* opt = sub->add_option_function<std::string>(
            flag_name(o.key), [&flags, name, key](const std::string& v) { flags[name][key] = v; }, o.help);
        if (!o.fallback.is_null()) opt->default_str(o.fallback.is_string() ? o.fallback.get<std::string>() : o.fallback.dump());
        if (o.required) opt->description(o.help + " (required)");
      }
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
  }
  for (const auto& [sub, name] : subs) {
    if (!sub->parsed()) continue;
    try {
      json cfg = json::object();
      if (!config_paths[name].empty()) cfg = read_config_file(config_paths[name]);
      auto rc = resolve(find_command(table, name), flags[name], cfg);
      if (print_config[name]) {
        out << emit_config(rc) << "\n";
        return exit_ok;
      }
      return execute(rc, out, err);
    } catch (const usage_error& e) {
      err << "usage error (" << e.flag() << "): " << e.what() << "\n";
      return exit_usage;
    }
  }
  return exit_usage;
}

}  // namespace clm::cli
