#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "clm/core_map.hpp"
#include "clm/orbit.hpp"
#include "clm/parallel.hpp"
#include "clm/polyline.hpp"

namespace clm {

struct preimage_tree_result {
  plane_point root;
  std::vector<std::vector<plane_point>> levels;
  bool budget_exhausted = false;

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l.size();
    return n;
  }
};

inline constexpr std::size_t default_point_budget = 10000000;

inline preimage_tree_result preimage_tree(const param_point& p, plane_point root, int depth,
                                          std::size_t point_budget = default_point_budget,
                                          std::optional<rect> clip = std::nullopt, const exec_options& ex = {}) {
  if (depth < 0) throw error(error_code::invalid_argument, "depth must be non-negative");
  preimage_tree_result t;
  t.root = root;
  t.levels.push_back({root});
  std::size_t total = 1;
  if (total >= point_budget && depth > 0) {
    t.budget_exhausted = true;
    return t;
  }
  for (int level = 1; level <= depth; ++level) {
    const auto& prev = t.levels.back();
    std::vector<preimage_set> expanded(prev.size());
    parallel_for(prev.size(), ex.threads, [&](std::size_t i, unsigned) { expanded[i] = preimages(p, prev[i]); });
    std::vector<plane_point> next;
    bool stop = false;
    for (const auto& set : expanded) {
      for (auto w : set) {
        if (clip && !clip->contains(w)) continue;
        next.push_back(w);
        ++total;
      }
      if (total >= point_budget) {
        stop = true;
        break;
      }
      if (ex.stop_requested()) {
        stop = true;
        break;
      }
    }
    t.levels.push_back(std::move(next));
    if (stop) {
      t.budget_exhausted = total >= point_budget;
      break;
    }
    if (t.levels.back().empty()) {
      // Nothing left to expand; remaining levels are legitimately empty.
      for (int rest = level + 1; rest <= depth; ++rest) t.levels.emplace_back();
      break;
    }
  }
  return t;
}

inline std::vector<plane_point> mixed_cloud(const param_point& p, plane_point seed, int n_forward, int depth_back,
                                            std::size_t budget = default_point_budget, const exec_options& ex = {}) {
  if (n_forward < 0 || depth_back < 0 || n_forward + depth_back <= 0)
    throw error(error_code::invalid_argument, "n_forward + depth_back must be positive");
  escape_region region(p);
  std::vector<plane_point> cloud;
  plane_point z = seed;
  for (int j = 0; j <= n_forward; ++j) {
    if (region.outside(z)) throw error(error_code::escaped, "forward orbit escaped at step " + std::to_string(j));
    if (cloud.size() >= budget) break;
    auto tree = preimage_tree(p, z, depth_back, budget - cloud.size(), std::nullopt, ex);
    for (const auto& level : tree.levels) cloud.insert(cloud.end(), level.begin(), level.end());
    if (j < n_forward) z = map_eval(p, z);
  }
  return cloud;
}

namespace detail {

enum class run_end { free_end, on_L1, on_L2, at_vertex };

struct cone_run {
  std::vector<plane_point> points;
  std::vector<radicand_pair> rad;
  run_end start = run_end::free_end;
  run_end end = run_end::free_end;
  bool closed = false;
};

inline run_end classify_end(const param_point& p, plane_point z) {
  switch (cone_membership(p, z)) {
    case cone_position::on_L1: return run_end::on_L1;
    case cone_position::on_L2: return run_end::on_L2;
    case cone_position::vertex: return run_end::at_vertex;
    default: return run_end::free_end;
  }
}

// Radicands with the ray selected by `kind` forced to zero.
inline radicand_pair boundary_radicands(const param_point& p, plane_point z, run_end kind) {
  auto r = radicands(p, z);
  if (kind == run_end::on_L1 || kind == run_end::at_vertex) r.rx = 0.0;
  if (kind == run_end::on_L2 || kind == run_end::at_vertex) r.ry = 0.0;
  r.rx = std::max(r.rx, 0.0);
  r.ry = std::max(r.ry, 0.0);
  return r;
}

inline bool in_cone(const param_point& p, plane_point z) { return cone_membership(p, z) != cone_position::outside; }

// Point on [a, b] where the curve leaves the cone; a inside, b outside.
inline std::pair<plane_point, run_end> cone_crossing(const param_point& p, plane_point a, plane_point b) {
  double lo = 0.0, hi = 1.0;
  const double len = dist(a, b);
  while ((hi - lo) * len > 1e-10 * 0.5 && hi - lo > 1e-17) {
    const double mid = 0.5 * (lo + hi);
    if (in_cone(p, lerp(a, b, mid)))
      lo = mid;
    else
      hi = mid;
  }
  plane_point c = lerp(a, b, lo);
  auto r = radicands(p, c);
  const double k = radicand_to_distance(p);
  const bool near1 = std::abs(r.rx) * k <= 2e-10;
  const bool near2 = std::abs(r.ry) * k <= 2e-10;
  run_end kind;
  if (near1 && near2)
    kind = run_end::at_vertex;
  else if (dist(c, geometry(p).cone_vertex) <= 2e-10)
    kind = run_end::at_vertex;
  else
    kind = std::abs(r.rx) <= std::abs(r.ry) ? run_end::on_L1 : run_end::on_L2;
  return {c, kind};
}

inline std::vector<cone_run> split_into_runs(const param_point& p, const polyline& c) {
  std::vector<cone_run> runs;
  const std::size_t n = c.vertices.size();
  std::vector<char> inside(n);
  for (std::size_t i = 0; i < n; ++i) inside[i] = in_cone(p, c.vertices[i]) ? 1 : 0;

  auto point_radicands = [&](plane_point z) {
    auto r = clamped_radicands(p, z);
    return r ? *r : radicand_pair{0.0, 0.0};
  };

  if (c.closed && std::all_of(inside.begin(), inside.end(), [](char v) { return v != 0; })) {
    cone_run r;
    r.closed = true;
    for (auto z : c.vertices) {
      r.points.push_back(z);
      r.rad.push_back(point_radicands(z));
    }
    runs.push_back(std::move(r));
    return runs;
  }

  // Closed curves are walked from an outside vertex so no run wraps around.
  std::size_t start = 0;
  std::size_t count = n;
  if (c.closed) {
    std::size_t out_idx = 0;
    while (inside[out_idx]) ++out_idx;
    start = out_idx;
    count = n + 1;  // come back to the starting outside vertex to close the loop
  }
  auto vertex_at = [&](std::size_t k) { return c.vertices[(start + k) % n]; };
  auto inside_at = [&](std::size_t k) { return inside[(start + k) % n] != 0; };

  std::optional<cone_run> cur;
  for (std::size_t k = 0; k < count; ++k) {
    const plane_point z = vertex_at(k);
    const bool in = inside_at(k);
    if (in) {
      if (!cur) {
        cur.emplace();
        if (k == 0) {
          // Open curve starting inside: endpoint may sit on a ray.
          cur->start = classify_end(p, z);
          cur->points.push_back(z);
          cur->rad.push_back(cur->start == run_end::free_end ? point_radicands(z) : boundary_radicands(p, z, cur->start));
          continue;
        }
        auto [cz, kind] = cone_crossing(p, z, vertex_at(k - 1));
        cur->start = kind;
        cur->points.push_back(cz);
        cur->rad.push_back(boundary_radicands(p, cz, kind));
      }
      cur->points.push_back(z);
      cur->rad.push_back(point_radicands(z));
    } else if (cur) {
      auto [cz, kind] = cone_crossing(p, vertex_at(k - 1), z);
      cur->end = kind;
      cur->points.push_back(cz);
      cur->rad.push_back(boundary_radicands(p, cz, kind));
      runs.push_back(std::move(*cur));
      cur.reset();
    }
  }
  if (cur) {
    // Open curve ending inside the cone.
    auto last = cur->points.back();
    cur->end = classify_end(p, last);
    if (cur->end != run_end::free_end) cur->rad.back() = boundary_radicands(p, last, cur->end);
    runs.push_back(std::move(*cur));
  }
  // Drop runs that collapsed to a single point.
  std::vector<cone_run> kept;
  for (auto& r : runs) {
    std::vector<plane_point> pts;
    std::vector<radicand_pair> rad;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      if (!pts.empty() && dist(pts.back(), r.points[i]) == 0.0) {
        rad.back() = r.rad[i].rx == 0.0 || r.rad[i].ry == 0.0 ? r.rad[i] : rad.back();
        continue;
      }
      pts.push_back(r.points[i]);
      rad.push_back(r.rad[i]);
    }
    r.points = std::move(pts);
    r.rad = std::move(rad);
    if (r.points.size() >= 2) kept.push_back(std::move(r));
  }
  return kept;
}

// Inserts points inside a run until no inverse-branch image step exceeds
// `target`. Radicands are affine along each segment, so new points are
// interpolated in radicand space; bisection concentrates them where a
// radicand approaches 0 and the square root stretches the curve.
inline void refine_run(cone_run& run, double target, int max_depth = 40) {
  if (run.rad.size() < 2) return;
  auto image_step = [](radicand_pair a, radicand_pair b) {
    return 0.5 * std::max(std::abs(std::sqrt(a.rx) - std::sqrt(b.rx)), std::abs(std::sqrt(a.ry) - std::sqrt(b.ry)));
  };
  std::vector<plane_point> pts{run.points.front()};
  std::vector<radicand_pair> rad{run.rad.front()};
  const std::size_t segs = run.closed ? run.rad.size() : run.rad.size() - 1;
  struct item {
    plane_point za, zb;
    radicand_pair ra, rb;
    int depth;
  };
  std::vector<item> stack;
  for (std::size_t i = 0; i < segs; ++i) {
    const std::size_t j = (i + 1) % run.rad.size();
    stack.push_back({run.points[i], run.points[j], run.rad[i], run.rad[j], 0});
    while (!stack.empty()) {
      item it = stack.back();
      stack.pop_back();
      if (it.depth < max_depth && image_step(it.ra, it.rb) > target) {
        const plane_point zm = lerp(it.za, it.zb, 0.5);
        const radicand_pair rm{std::max(0.5 * (it.ra.rx + it.rb.rx), 0.0), std::max(0.5 * (it.ra.ry + it.rb.ry), 0.0)};
        stack.push_back({zm, it.zb, rm, it.rb, it.depth + 1});
        stack.push_back({it.za, zm, it.ra, rm, it.depth + 1});
        continue;
      }
      if (run.closed && j == 0 && stack.empty()) break;  // back at the first vertex
      pts.push_back(it.zb);
      rad.push_back(it.rb);
    }
  }
  run.points = std::move(pts);
  run.rad = std::move(rad);
}

inline constexpr double refine_target = 5e-4;

struct branch_piece {
  std::vector<plane_point> pts;
  bool closed = false;
};

// Splits a branch image where one output step dwarfs both neighbours.
inline std::vector<std::vector<plane_point>> continuity_split(const std::vector<plane_point>& pts, double floor_jump) {
  std::vector<std::vector<plane_point>> out(1);
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double step = dist(pts[i - 1], pts[i]);
      const double before = i >= 2 ? dist(pts[i - 2], pts[i - 1]) : 0.0;
      const double after = i + 1 < n ? dist(pts[i], pts[i + 1]) : 0.0;
      if (step > floor_jump && step > 10.0 * before && step > 10.0 * after && (i >= 2 || i + 1 < n)) out.emplace_back();
    }
    out.back().push_back(pts[i]);
  }
  return out;
}

}  // namespace detail

// Preimage of a curve: vertices pulled back along each inverse branch, with
// branches glued where the curve meets a ray (the two branches that differ in
// the sign belonging to that ray coincide there).
inline std::vector<polyline> polyline_preimage(const param_point& p, const polyline& curve, std::size_t resample_to = 0) {
  if (curve.vertices.size() < 2) throw error(error_code::degenerate_input, "curve needs at least 2 vertices");
  const polyline c = normalized(curve);
  if (c.vertices.size() < 2) throw error(error_code::degenerate_input, "curve needs at least 2 distinct vertices");

  auto runs = detail::split_into_runs(p, c);
  std::vector<polyline> out;

  // Open pieces with glue table; closed pieces go straight to the output.
  struct piece {
    std::vector<plane_point> pts;
    std::array<std::optional<std::pair<std::size_t, int>>, 2> glue;  // per end: (piece, end)
  };
  std::vector<piece> pieces;

  for (auto& run : runs) {
    detail::refine_run(run, detail::refine_target);
    if (run.closed) {
      for (branch b : all_branches) {
        polyline pl;
        pl.closed = true;
        for (const auto& r : run.rad) pl.vertices.push_back(branch_point(r, b));
        out.push_back(normalized(std::move(pl)));
      }
      continue;
    }
    // index of the first and last sub-piece of each branch, for gluing
    std::array<std::size_t, 4> first{}, last{};
    for (branch b : all_branches) {
      std::vector<plane_point> img;
      img.reserve(run.rad.size());
      for (const auto& r : run.rad) img.push_back(branch_point(r, b));
      auto parts = detail::continuity_split(img, 1e-3);
      const int bi = branch_index(b);
      first[bi] = pieces.size();
      for (auto& part : parts) pieces.push_back({std::move(part), {}});
      last[bi] = pieces.size() - 1;
    }
    auto glue = [&](std::size_t a, int ea, std::size_t b, int eb) {
      pieces[a].glue[ea] = std::pair{b, eb};
      pieces[b].glue[eb] = std::pair{a, ea};
    };
    auto glue_end = [&](detail::run_end kind, bool at_start) {
      auto node = [&](int bi) { return at_start ? first[bi] : last[bi]; };
      const int e = at_start ? 0 : 1;
      if (kind == detail::run_end::on_L1) {
        glue(node(0), e, node(2), e);  // (--) with (+-)
        glue(node(1), e, node(3), e);  // (-+) with (++)
      } else if (kind == detail::run_end::on_L2) {
        glue(node(0), e, node(1), e);  // (--) with (-+)
        glue(node(2), e, node(3), e);  // (+-) with (++)
      }
    };
    glue_end(run.start, true);
    glue_end(run.end, false);
  }

  std::vector<char> used(pieces.size(), 0);
  auto walk = [&](std::size_t start_piece, int entry_end) {
    // Traverse from start_piece entering at entry_end; returns the chain and
    // whether it closed on itself.
    std::vector<plane_point> chain;
    std::size_t cur = start_piece;
    int entry = entry_end;
    bool closed = false;
    for (;;) {
      used[cur] = 1;
      const auto& pts = pieces[cur].pts;
      if (entry == 0)
        chain.insert(chain.end(), pts.begin(), pts.end());
      else
        chain.insert(chain.end(), pts.rbegin(), pts.rend());
      const int exit_end = 1 - entry;
      auto next = pieces[cur].glue[exit_end];
      if (!next) break;
      if (next->first == start_piece && next->second == entry_end) {
        closed = true;
        break;
      }
      if (used[next->first]) break;
      cur = next->first;
      entry = next->second;
    }
    return std::pair{chain, closed};
  };

  // Open chains first (start at an unglued end), then the remaining loops.
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (used[i]) continue;
    for (int e = 0; e < 2; ++e) {
      if (used[i] || pieces[i].glue[e]) continue;
      auto [chain, closed] = walk(i, e);
      polyline pl;
      pl.vertices = std::move(chain);
      pl.closed = closed;
      out.push_back(normalized(std::move(pl)));
    }
  }
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (used[i]) continue;
    auto [chain, closed] = walk(i, 0);
    polyline pl;
    pl.vertices = std::move(chain);
    pl.closed = closed;
    out.push_back(normalized(std::move(pl)));
  }

  std::vector<polyline> result;
  for (auto& pl : out) {
    if (pl.vertices.size() < 2) continue;
    if (pl.closed && pl.vertices.size() < 3) pl.closed = false;
    result.push_back(resample_to >= 2 ? resample(pl, resample_to) : std::move(pl));
  }
  return result;
}

enum class curve_seed { circle_C, boundary_Q };

inline polyline seed_curve(curve_seed seed, std::size_t n) {
  return seed == curve_seed::circle_C ? circle_C(n) : boundary_Q(n);
}

inline std::vector<polyline> iterated_curve_preimage(const param_point& p, curve_seed seed, int n, std::size_t resample_to,
                                                     std::vector<double>* stage_hausdorff = nullptr) {
  if (n < 0) throw error(error_code::invalid_argument, "n must be non-negative");
  std::vector<polyline> stage{seed_curve(seed, std::max<std::size_t>(resample_to, 16))};
  for (int k = 0; k < n; ++k) {
    std::vector<polyline> next;
    for (const auto& c : stage) {
      auto parts = polyline_preimage(p, c, resample_to);
      next.insert(next.end(), std::make_move_iterator(parts.begin()), std::make_move_iterator(parts.end()));
    }
    if (stage_hausdorff) stage_hausdorff->push_back(next.empty() || stage.empty() ? 0.0 : hausdorff(stage, next));
    stage = std::move(next);
    if (stage.empty()) break;
  }
  return stage;
}

}  // namespace clm
