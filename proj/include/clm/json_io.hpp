#pragma once

#include <string>
#include <vector>

#include "clm/bifurcation.hpp"
#include "clm/invariant_curve.hpp"
#include "clm/orbit.hpp"
#include "clm/preimage.hpp"
#include "clm/raster.hpp"
#include "json.hpp"

namespace clm {

using json = nlohmann::json;

inline json to_json(plane_point z) { return json::array({z.x, z.y}); }

inline json to_json(const std::vector<plane_point>& pts) {
  json a = json::array();
  for (auto z : pts) a.push_back(to_json(z));
  return a;
}

inline json to_json(const rect& r) { return {{"x0", r.x0}, {"x1", r.x1}, {"y0", r.y0}, {"y1", r.y1}}; }

inline json to_json(const grid_spec& g) {
  return {{"window", to_json(g.window)}, {"resolution", {g.width, g.height}}};
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const eigen_pair& ev) {
  json a = json::array();
  for (const auto& l : ev) a.push_back({{"re", l.real()}, {"im", l.imag()}, {"modulus", std::abs(l)}});
  return a;
}

inline json to_json(const loci_values& v) {
  return {{"mu0", opt_json(v.mu0)},
          {"mu1", opt_json(v.mu1)},
          {"muPrime", opt_json(v.mu_prime)},
          {"mu0Prime", opt_json(v.mu0_prime)},
          {"mu2", opt_json(v.mu2)}};
}

inline json to_json(const fixed_point_info& f) {
  return {{"label", to_string(f.label)},
          {"location", to_json(f.location)},
          {"eigenvalues", to_json(f.eigenvalues)},
          {"classification", to_string(f.classification)}};
}

inline json to_json(const orbit_result& r) {
  return {{"verdict", r.verdict.escaped ? "escaped" : "bounded"},
          {"step", r.verdict.step},
          {"stride", r.stride},
          {"last", to_json(r.last)},
          {"samples", to_json(r.samples)},
          {"sync_gap", r.sync_gap}};
}

inline json to_json(const preimage_tree_result& t) {
  json levels = json::array();
  for (const auto& l : t.levels) levels.push_back(to_json(l));
  return {{"root", to_json(t.root)},
          {"levels", levels},
          {"points", to_json(t.levels.back())},
          {"total_points", t.total_points()},
          {"budget_exhausted", t.budget_exhausted}};
}

inline json to_json(const attractor_estimate& a) {
  return {{"occupied_cells", a.occupied_count},
          {"area_estimate", a.area_estimate},
          {"period", a.period ? json(*a.period) : json(nullptr)},
          {"fat", a.fat},
          {"transient_discarded", a.transient_discarded},
          {"last", to_json(a.last)},
          {"grid", to_json(a.grid)}};
}

inline json to_json(const gamma_result& g) {
  return {{"regime", to_string(g.regime)},
          {"iterations", g.iterations},
          {"last_change", g.last_change},
          {"grid", g.graph.intervals()},
          {"first_non_increase", g.first_non_increase ? json(*g.first_non_increase) : json(nullptr)},
          {"invariant_violations", g.invariant_violations}};
}

inline json to_json(const gamma_stage& s) {
  return {{"q", to_json(s.q)},
          {"hausdorff_to_previous", s.hausdorff_to_previous},
          {"bottom_is_graph", s.bottom_is_graph},
          {"vertices", s.assembled.size()}};
}

inline json to_json(const witness& w) {
  return {{"point", to_json(w.point)}, {"depth", w.depth}, {"distance_to_curve", w.distance_to_curve}};
}

inline json to_json(const periodic_orbit& o) {
  return {{"period", o.period},
          {"points", to_json(o.points)},
          {"cycle_eigenvalues", to_json(o.cycle_eigenvalues)},
          {"residual", o.residual},
          {"iterations", o.iterations}};
}

inline json to_json(const hopf_bracket_result& h) {
  return {{"epsilon", h.epsilon},
          {"period", h.period},
          {"mu_lo", h.mu_lo},
          {"mu_hi", h.mu_hi},
          {"orbit_at_lo", to_json(h.orbit_at_lo)},
          {"modulus_lo", h.modulus_lo},
          {"modulus_hi", opt_json(h.modulus_hi)},
          {"orbit_lost_at_hi", h.orbit_lost_at_hi},
          {"refined", h.refined},
          {"bisection_steps", h.bisection_steps},
          {"continuation_steps", h.continuation.size()}};
}

inline json to_json(const pitchfork_report& r) {
  json samples = json::array();
  for (const auto& s : r.samples)
    samples.push_back({{"mu", s.mu}, {"offset", s.offset}, {"exists", s.exists}, {"distance", opt_json(s.distance)}});
  return {{"epsilon", r.epsilon},
          {"locus", r.locus},
          {"bifurcates_from", r.from_origin ? "O" : "Pmu"},
          {"discriminant_at_locus", r.discriminant_at_locus},
          {"flip", r.flip},
          {"existing_side", r.existing_side},
          {"scaling_exponent", r.scaling_exponent},
          {"exponent_ok", r.exponent_ok},
          {"distances_shrink", r.distances_shrink},
          {"passed", r.passed()},
          {"samples", samples}};
}

inline json to_json(const component_report& c) {
  json j = {{"label", c.label},
            {"cell_count", c.cell_count},
            {"touches_L1", c.touches_L1},
            {"touches_L2", c.touches_L2},
            {"touches_border", c.touches_border},
            {"holes", c.holes},
            {"topology", to_string(c.topo)},
            {"min_step", c.min_step},
            {"max_step", c.max_step},
            {"bbox", {c.i0, c.i1, c.j0, c.j1}}};
  if (c.topo == topology::annulus) {
    j["outer"] = {{"L1", c.outer.L1}, {"L2", c.outer.L2}};
    j["inner"] = {{"L1", c.inner.L1}, {"L2", c.inner.L2}};
  }
  j["annulus_class"] = c.annulus ? json(to_string(*c.annulus)) : json(nullptr);
  return j;
}

inline json sidecar(const escape_raster& r) {
  json j = to_json(r.grid);
  j["mu"] = r.params.mu();
  j["epsilon"] = r.params.epsilon();
  j["n_max"] = r.n_max;
  j["supersample"] = r.supersample;
  j["bounded_cells"] = r.bounded_count();
  j["partial"] = r.partial;
  return j;
}

inline json sidecar(const basin_raster& b) {
  json j = to_json(b.grid);
  j["mu"] = b.params.mu();
  j["epsilon"] = b.params.epsilon();
  j["n_max"] = b.n_max;
  j["probe_steps"] = b.probe_steps;
  j["counts"] = {{"ThisAttractor", b.count(basin_cell::this_attractor)},
                 {"OtherBounded", b.count(basin_cell::other_bounded)},
                 {"Escaped", b.count(basin_cell::escaped)},
                 {"Unclassified", b.count(basin_cell::unclassified)}};
  j["attractor"] = to_json(b.attractor);
  j["partial"] = b.partial;
  return j;
}

// Curve export: one row per vertex with its curve index and arc-length
// parameter t in [0, 1].
inline std::string curves_csv(const std::vector<polyline>& curves) {
  std::string out = "curve,t,x,y\n";
  char buf[128];
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& pl = curves[c];
    const double total = pl.length();
    double acc = 0.0;
    for (std::size_t i = 0; i < pl.vertices.size(); ++i) {
      if (i > 0) acc += dist(pl.vertices[i - 1], pl.vertices[i]);
      const double t = total > 0 ? acc / total : 0.0;
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", c, t, pl.vertices[i].x, pl.vertices[i].y);
      out += buf;
    }
  }
  return out;
}

inline std::string points_csv(const std::vector<std::vector<plane_point>>& groups, const char* group_name) {
  std::string out = std::string(group_name) + ",x,y\n";
  char buf[96];
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (auto z : groups[g]) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", g, z.x, z.y);
      out += buf;
    }
  return out;
}

}  // namespace clm
