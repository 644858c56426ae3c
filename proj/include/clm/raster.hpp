#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "clm/core_map.hpp"
#include "clm/grid.hpp"
#include "clm/orbit.hpp"
#include "clm/parallel.hpp"

namespace clm {

inline constexpr int bounded_cell = -1;

// Per-cell escape step, or bounded_cell when the orbit survives n_max steps.
struct escape_raster {
  grid_spec grid;
  std::vector<int> cells;
  param_point params{1.0, 0.25};
  int n_max = 0;
  int supersample = 1;
  bool partial = false;  // cancelled before every row was rendered

  int at(int i, int j) const { return cells[grid.index(i, j)]; }
  bool bounded(int i, int j) const { return at(i, j) == bounded_cell; }
  std::size_t bounded_count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), bounded_cell)); }
};

// Escape step of the cell centre; with supersample s > 1, the cell is sampled
// on an s x s sub-grid and reported bounded if any sample is bounded,
// otherwise with the largest escape step.
inline int classify_cell(const param_point& p, const escape_region& region, const grid_spec& g, int i, int j, int n_max,
                         int supersample) {
  if (supersample <= 1) return escape_time(p, region, g.cell_center(i, j), n_max);
  int worst = 0;
  for (int b = 0; b < supersample; ++b)
    for (int a = 0; a < supersample; ++a) {
      const plane_point z{g.window.x0 + (i + (a + 0.5) / supersample) * g.cell_width(),
                          g.window.y0 + (j + (b + 0.5) / supersample) * g.cell_height()};
      const int k = escape_time(p, region, z, n_max);
      if (k == bounded_cell) return bounded_cell;
      worst = std::max(worst, k);
    }
  return worst;
}

inline escape_raster render_escape(const param_point& p, const grid_spec& g, int n_max, const exec_options& ex = {},
                                   int supersample = 1) {
  if (g.width < 2 || g.height < 2) throw error(error_code::invalid_argument, "resolution must be at least 2x2");
  if (n_max < 0) throw error(error_code::invalid_argument, "n_max must be non-negative");
  if (supersample < 1) throw error(error_code::invalid_argument, "supersample must be positive");
  escape_raster r;
  r.grid = g;
  r.params = p;
  r.n_max = n_max;
  r.supersample = supersample;
  r.cells.assign(g.cell_count(), bounded_cell);
  const escape_region region(p);
  std::vector<char> done(static_cast<std::size_t>(g.height), 0);
  parallel_for(static_cast<std::size_t>(g.height), ex.threads, [&](std::size_t row, unsigned) {
    if (ex.stop_requested()) return;
    const int j = static_cast<int>(row);
    for (int i = 0; i < g.width; ++i) r.cells[g.index(i, j)] = classify_cell(p, region, g, i, j, n_max, supersample);
    done[row] = 1;
  });
  r.partial = std::find(done.begin(), done.end(), 0) != done.end();
  return r;
}

// ---------------------------------------------------------------------------
// Connected components.

enum class component_target { bounded, escaped };
enum class topology { disk, annulus, other };
enum class annulus_class { large, small, singular };

inline const char* to_string(topology t) {
  switch (t) {
    case topology::disk: return "Disk";
    case topology::annulus: return "Annulus";
    case topology::other: return "Other";
  }
  return "?";
}

inline const char* to_string(annulus_class a) {
  switch (a) {
    case annulus_class::large: return "Large";
    case annulus_class::small: return "Small";
    case annulus_class::singular: return "Singular";
  }
  return "?";
}

struct ray_touch {
  bool L1 = false;
  bool L2 = false;
  bool both() const { return L1 && L2; }
  bool any() const { return L1 || L2; }
};

struct component_report {
  int label = 0;
  std::size_t cell_count = 0;
  bool touches_L1 = false;
  bool touches_L2 = false;
  bool touches_border = false;  // reaches the edge of the raster
  int holes = 0;
  topology topo = topology::disk;
  std::optional<annulus_class> annulus;
  // Boundary circles, filled for annuli: outer and inner.
  ray_touch outer, inner;
  int i0 = 0, i1 = 0, j0 = 0, j1 = 0;  // bounding box in cells
  int min_step = 0, max_step = 0;      // escape-step range (escaped target)
};

struct component_labeling {
  grid_spec grid;
  std::vector<int> labels;  // -1 for cells not in the target class
  std::vector<component_report> components;
};

namespace detail {

class union_find {
 public:
  explicit union_find(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }
  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::uint32_t> parent_;
};

// Ray rasterization test: cell centre within half_width of the ray.
inline bool near_ray(const ray& r, plane_point z, double half_width) {
  if (!std::isfinite(r.vertex_x)) return false;
  // L1 is vertical when the coupling vanishes; it then points down.
  const bool vertical = !std::isfinite(r.slope) || !std::isfinite(r.intercept);
  const plane_point v = vertical ? plane_point{r.vertex_x, r.vertex_x} : plane_point{r.vertex_x, r.y_at(r.vertex_x)};
  const plane_point d = vertical ? plane_point{0.0, -1.0} : plane_point{static_cast<double>(r.direction), r.direction * r.slope};
  const double s = std::max(0.0, dot(z - v, d) / dot(d, d));
  return dist(z, v + s * d) <= half_width;
}

}  // namespace detail

// Labels 4-connected components of the masked cells. Holes are the
// 8-connected regions of other cells enclosed by a component (not reaching
// the border of its padded bounding box). For annuli, each boundary circle is
// checked against 3-cell-thick rasterizations of L1 and L2: Large when both
// circles meet both rays, Singular when only the outer circle does (its
// preimage is one annulus minus four disks), Small when neither does.
// steps, when given, supplies the per-cell escape step for the step range.
inline component_labeling label_mask(const grid_spec& g, const param_point& params, const std::vector<char>& mask,
                                     const std::vector<int>* steps = nullptr) {
  const int w = g.width, h = g.height;
  auto in_target = [&](int i, int j) { return mask[g.index(i, j)] != 0; };
  auto step_at = [&](int i, int j) { return steps ? (*steps)[g.index(i, j)] : 0; };
  detail::union_find uf(g.cell_count());
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      if (!in_target(i, j)) continue;
      const auto c = static_cast<std::uint32_t>(g.index(i, j));
      if (i + 1 < w && in_target(i + 1, j)) uf.unite(c, static_cast<std::uint32_t>(g.index(i + 1, j)));
      if (j + 1 < h && in_target(i, j + 1)) uf.unite(c, static_cast<std::uint32_t>(g.index(i, j + 1)));
    }

  component_labeling out;
  out.grid = g;
  out.labels.assign(g.cell_count(), -1);
  std::vector<int> root_label(g.cell_count(), -1);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      if (!in_target(i, j)) continue;
      const std::size_t c = g.index(i, j);
      const std::uint32_t root = uf.find(static_cast<std::uint32_t>(c));
      int& lab = root_label[root];
      if (lab < 0) {
        lab = static_cast<int>(out.components.size());
        component_report rep;
        rep.label = lab;
        rep.i0 = rep.i1 = i;
        rep.j0 = rep.j1 = j;
        rep.min_step = rep.max_step = step_at(i, j);
        out.components.push_back(rep);
      }
      out.labels[c] = lab;
      auto& rep = out.components[static_cast<std::size_t>(lab)];
      ++rep.cell_count;
      rep.i0 = std::min(rep.i0, i);
      rep.i1 = std::max(rep.i1, i);
      rep.j0 = std::min(rep.j0, j);
      rep.j1 = std::max(rep.j1, j);
      rep.min_step = std::min(rep.min_step, step_at(i, j));
      rep.max_step = std::max(rep.max_step, step_at(i, j));
      if (i == 0 || j == 0 || i == w - 1 || j == h - 1) rep.touches_border = true;
    }

  const auto geo = geometry(params);
  const double half_width = 1.5 * std::max(g.cell_width(), g.cell_height());
  std::vector<char> on_L1(g.cell_count()), on_L2(g.cell_count());
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      const auto z = g.cell_center(i, j);
      on_L1[g.index(i, j)] = detail::near_ray(geo.L1, z, half_width);
      on_L2[g.index(i, j)] = detail::near_ray(geo.L2, z, half_width);
    }

  // Hole analysis per component inside its padded bounding box.
  std::vector<int> region;
  std::vector<std::pair<int, int>> stack;
  for (auto& rep : out.components) {
    const int bi0 = rep.i0 - 1, bj0 = rep.j0 - 1;
    const int bw = rep.i1 - rep.i0 + 3, bh = rep.j1 - rep.j0 + 3;
    auto member = [&](int li, int lj) {
      const int i = bi0 + li, j = bj0 + lj;
      if (i < 0 || j < 0 || i >= w || j >= h) return false;
      return out.labels[g.index(i, j)] == rep.label;
    };
    region.assign(static_cast<std::size_t>(bw) * bh, -1);
    int regions = 0;
    for (int lj = 0; lj < bh; ++lj)
      for (int li = 0; li < bw; ++li) {
        if (member(li, lj) || region[static_cast<std::size_t>(lj) * bw + li] >= 0) continue;
        const int id = regions++;
        stack.assign(1, {li, lj});
        region[static_cast<std::size_t>(lj) * bw + li] = id;
        while (!stack.empty()) {
          auto [ci, cj] = stack.back();
          stack.pop_back();
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              const int ni = ci + di, nj = cj + dj;
              if (ni < 0 || nj < 0 || ni >= bw || nj >= bh) continue;
              auto& slot = region[static_cast<std::size_t>(nj) * bw + ni];
              if (slot >= 0 || member(ni, nj)) continue;
              slot = id;
              stack.push_back({ni, nj});
            }
        }
      }
    // Region 0 contains the padding corner, so it is the outside.
    rep.holes = regions - 1;
    rep.topo = rep.holes == 0 ? topology::disk : rep.holes == 1 ? topology::annulus : topology::other;

    // Boundary cells: members 4-adjacent to a non-member region.
    for (int lj = 0; lj < bh; ++lj)
      for (int li = 0; li < bw; ++li) {
        if (!member(li, lj)) continue;
        const std::size_t c = g.index(bi0 + li, bj0 + lj);
        const bool l1 = on_L1[c] != 0, l2 = on_L2[c] != 0;
        rep.touches_L1 = rep.touches_L1 || l1;
        rep.touches_L2 = rep.touches_L2 || l2;
        if (rep.topo != topology::annulus || !(l1 || l2)) continue;
        const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (auto& d : nb) {
          const int id = region[static_cast<std::size_t>(lj + d[1]) * bw + li + d[0]];
          if (id < 0) continue;
          auto& t = id == 0 ? rep.outer : rep.inner;
          t.L1 = t.L1 || l1;
          t.L2 = t.L2 || l2;
        }
      }
    if (rep.topo == topology::annulus) {
      if (rep.outer.both() && rep.inner.both())
        rep.annulus = annulus_class::large;
      else if (rep.outer.both() && !rep.inner.any())
        rep.annulus = annulus_class::singular;
      else if (!rep.outer.any() && !rep.inner.any())
        rep.annulus = annulus_class::small;
    }
  }
  return out;
}

inline component_labeling label_components(const escape_raster& r, component_target target) {
  std::vector<char> mask(r.cells.size());
  for (std::size_t c = 0; c < mask.size(); ++c)
    mask[c] = (r.cells[c] == bounded_cell) == (target == component_target::bounded);
  return label_mask(r.grid, r.params, mask, &r.cells);
}

// ---------------------------------------------------------------------------
// Basin of a given attractor.

enum class basin_cell : std::uint8_t { this_attractor, other_bounded, escaped, unclassified };

inline const char* to_string(basin_cell c) {
  switch (c) {
    case basin_cell::this_attractor: return "ThisAttractor";
    case basin_cell::other_bounded: return "OtherBounded";
    case basin_cell::escaped: return "Escaped";
    case basin_cell::unclassified: return "Unclassified";
  }
  return "?";
}

struct basin_raster {
  grid_spec grid;
  std::vector<basin_cell> cells;
  attractor_estimate attractor;
  param_point params{1.0, 0.25};
  int n_max = 0;
  int probe_steps = 0;
  bool partial = false;

  std::size_t count(basin_cell c) const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), c)); }
};

inline component_labeling label_basin(const basin_raster& b, basin_cell target) {
  std::vector<char> mask(b.cells.size());
  for (std::size_t c = 0; c < mask.size(); ++c) mask[c] = b.cells[c] == target;
  return label_mask(b.grid, b.params, mask);
}

struct basin_options {
  int n_max = 2000;     // transient before probing
  int probe_steps = 64;
  attractor_options attractor{};
};

// After n_max steps, the orbit of each cell centre is probed for probe_steps
// more: ThisAttractor when at least half of the probes land in the
// attractor's occupied cells, OtherBounded when none do, Unclassified in
// between (reported, never assigned).
inline basin_raster render_basin_of_attractor(const param_point& p, plane_point seed, const grid_spec& g,
                                              const basin_options& opt = {}, const exec_options& ex = {}) {
  if (g.width < 2 || g.height < 2) throw error(error_code::invalid_argument, "resolution must be at least 2x2");
  basin_raster out;
  out.grid = g;
  out.params = p;
  out.n_max = opt.n_max;
  out.probe_steps = opt.probe_steps;
  out.attractor = estimate_attractor(p, seed, g, opt.attractor);
  out.cells.assign(g.cell_count(), basin_cell::unclassified);
  const escape_region region(p);
  const auto& occ = out.attractor;
  std::vector<char> done(static_cast<std::size_t>(g.height), 0);
  parallel_for(static_cast<std::size_t>(g.height), ex.threads, [&](std::size_t row, unsigned) {
    if (ex.stop_requested()) return;
    const int j = static_cast<int>(row);
    for (int i = 0; i < g.width; ++i) {
      plane_point z = g.cell_center(i, j);
      basin_cell cls = basin_cell::unclassified;
      int hits = 0;
      const int total = opt.n_max + opt.probe_steps;
      bool escaped = false;
      for (int k = 0; k <= total; ++k) {
        if (region.outside(z)) {
          escaped = true;
          break;
        }
        if (k > opt.n_max && occ.contains(z)) ++hits;
        if (k < total) z = map_eval(p, z);
      }
      if (escaped)
        cls = basin_cell::escaped;
      else if (2 * hits >= opt.probe_steps)
        cls = basin_cell::this_attractor;
      else if (hits == 0)
        cls = basin_cell::other_bounded;
      out.cells[g.index(i, j)] = cls;
    }
    done[row] = 1;
  });
  out.partial = std::find(done.begin(), done.end(), 0) != done.end();
  return out;
}

}  // namespace clm
