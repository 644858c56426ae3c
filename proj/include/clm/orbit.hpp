#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "clm/core_map.hpp"
#include "clm/grid.hpp"

namespace clm {

inline constexpr double overflow_guard = 1e8;

// Region whose exterior is known to lie in the basin of infinity: the square
// [0,1]^2 for large strength, the disk bounded by x^2+y^2 = x+y otherwise.
class escape_region {
 public:
  explicit escape_region(const param_point& p) : square_(p.strength_class() == strength::large) {}

  bool outside(plane_point z) const {
    if (!(std::abs(z.x) <= overflow_guard && std::abs(z.y) <= overflow_guard)) return true;
    if (square_) return z.x < 0.0 || z.x > 1.0 || z.y < 0.0 || z.y > 1.0;
    return z.x * z.x + z.y * z.y > z.x + z.y;
  }

  bool is_square() const { return square_; }

 private:
  bool square_;
};

// Number of steps before the orbit leaves the escape region, or -1 if it
// stays for n_max steps. Step 0 is the seed itself.
inline int escape_time(const param_point& p, const escape_region& region, plane_point z, int n_max) {
  for (int k = 0; k <= n_max; ++k) {
    if (region.outside(z)) return k;
    if (k == n_max) break;
    z = map_eval(p, z);
  }
  return -1;
}

struct orbit_verdict {
  bool escaped = false;
  long long step = 0;  // escape step, or number of steps survived
};

struct orbit_result {
  std::vector<plane_point> samples;
  std::vector<double> sync_gap;
  std::vector<long long> sample_steps;
  orbit_verdict verdict;
  long long stride = 1;
  plane_point last{};
};

inline constexpr std::size_t default_max_samples = 1000000;

inline orbit_result iterate_forward(const param_point& p, plane_point z0, long long n_max,
                                    std::size_t max_samples = default_max_samples) {
  if (n_max < 0) throw error(error_code::invalid_argument, "n_max must be non-negative");
  if (max_samples == 0) max_samples = 1;
  orbit_result out;
  const long long total = n_max + 1;
  out.stride = std::max<long long>(1, (total + static_cast<long long>(max_samples) - 1) / static_cast<long long>(max_samples));
  escape_region region(p);
  plane_point z = z0;
  for (long long k = 0;; ++k) {
    const bool out_now = region.outside(z);
    if (k % out.stride == 0 || out_now) {
      out.samples.push_back(z);
      out.sync_gap.push_back(std::abs(z.x - z.y));
      out.sample_steps.push_back(k);
    }
    out.last = z;
    if (out_now) {
      out.verdict = {true, k};
      return out;
    }
    if (k == n_max) break;
    z = map_eval(p, z);
  }
  out.verdict = {false, n_max};
  return out;
}

struct sync_result {
  bool synchronized = false;
  double final_gap = 0.0;
  plane_point limit{};
};

inline sync_result synchronization_verdict(const param_point& p, plane_point z0, long long n_max, double tol = 1e-8) {
  auto orbit = iterate_forward(p, z0, n_max);
  if (orbit.verdict.escaped)
    throw error(error_code::not_bounded, "orbit escaped at step " + std::to_string(orbit.verdict.step));
  const std::size_t n = orbit.sync_gap.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  sync_result r;
  r.synchronized = true;
  for (std::size_t i = n - tail; i < n; ++i) r.synchronized = r.synchronized && orbit.sync_gap[i] < tol;
  r.final_gap = orbit.sync_gap.back();
  r.limit = orbit.last;
  return r;
}

struct attractor_options {
  long long n_total = 10000000;
  long long n_transient = 10000;
  std::size_t period_window = 1000000;  // consecutive tail iterates used for the period test
  int max_period = 64;
  double overlap_slack = 0.02;
  double cycle_hit_fraction = 0.98;
  std::size_t fat_min_cells = 10;
};

struct attractor_estimate {
  grid_spec grid;
  cell_set occupied;
  std::size_t occupied_count = 0;
  std::vector<std::uint32_t> visits;
  std::optional<int> period;
  std::vector<cell_set> phase_cells;  // one per residue class when a period is reported
  double area_estimate = 0.0;
  long long transient_discarded = 0;
  bool fat = false;  // heuristic: at least fat_min_cells occupied cells
  plane_point last{};

  bool contains(plane_point z) const {
    auto c = grid.cell_of(z);
    return c && occupied.contains(*c);
  }
};

namespace detail {

inline constexpr std::size_t no_cell = std::numeric_limits<std::size_t>::max();

struct period_test {
  bool disjoint = false;
  bool cycles = false;
  std::vector<cell_set> sets;
};

// Cell sets of each residue class mod q over the tail, the pairwise overlap
// test, and a cycle test that maps the second half of the tail against sets
// built from the first half.
inline period_test test_period(const std::vector<std::size_t>& tail, std::size_t universe, int q, double slack,
                               double hit_fraction) {
  period_test t;
  t.sets.assign(static_cast<std::size_t>(q), cell_set(universe));
  for (std::size_t k = 0; k < tail.size(); ++k)
    if (tail[k] != no_cell) t.sets[k % q].insert(tail[k]);
  std::vector<std::size_t> sizes(q);
  for (int r = 0; r < q; ++r) sizes[r] = t.sets[r].count();
  for (int r = 0; r < q; ++r)
    if (sizes[r] == 0) return t;
  for (int a = 0; a < q; ++a)
    for (int b = a + 1; b < q; ++b) {
      const double overlap = static_cast<double>(t.sets[a].intersection_count(t.sets[b]));
      if (overlap > slack * static_cast<double>(std::min(sizes[a], sizes[b]))) return t;
    }
  t.disjoint = true;

  const std::size_t half = tail.size() / 2;
  std::vector<cell_set> first(static_cast<std::size_t>(q), cell_set(universe));
  for (std::size_t k = 0; k < half; ++k)
    if (tail[k] != no_cell) first[k % q].insert(tail[k]);
  std::size_t tried = 0, hits = 0;
  for (std::size_t k = half; k + 1 < tail.size(); ++k) {
    if (tail[k] == no_cell) continue;
    ++tried;
    const std::size_t next = tail[k + 1];
    if (next != no_cell && first[(k + 1) % q].contains(next)) ++hits;
  }
  t.cycles = tried > 0 && static_cast<double>(hits) >= hit_fraction * static_cast<double>(tried);
  return t;
}

}  // namespace detail

inline attractor_estimate estimate_attractor(const param_point& p, plane_point z0, const grid_spec& grid,
                                             const attractor_options& opt = {}) {
  if (opt.n_total <= opt.n_transient) throw error(error_code::invalid_argument, "n_total must exceed n_transient");
  if (opt.n_transient < 0) throw error(error_code::invalid_argument, "n_transient must be non-negative");
  escape_region region(p);
  attractor_estimate est;
  est.grid = grid;
  est.occupied = cell_set(grid.cell_count());
  est.visits.assign(grid.cell_count(), 0);
  est.transient_discarded = opt.n_transient;

  const std::size_t window = static_cast<std::size_t>(std::min<long long>(opt.period_window, opt.n_total - opt.n_transient));
  std::vector<std::size_t> ring(window, detail::no_cell);
  std::size_t ring_pos = 0;

  plane_point z = z0;
  for (long long k = 0; k <= opt.n_total; ++k) {
    if (region.outside(z)) throw error(error_code::not_bounded, "orbit escaped at step " + std::to_string(k));
    if (k >= opt.n_transient) {
      auto c = grid.cell_of(z);
      if (c) {
        est.occupied.insert(*c);
        if (est.visits[*c] != std::numeric_limits<std::uint32_t>::max()) ++est.visits[*c];
      }
      if (window > 0) {
        ring[ring_pos] = c ? *c : detail::no_cell;
        ring_pos = (ring_pos + 1) % window;
      }
    }
    if (k < opt.n_total) z = map_eval(p, z);
  }
  est.last = z;
  est.occupied_count = est.occupied.count();
  if (est.occupied_count == 0) throw error(error_code::empty_window, "no post-transient iterate landed in the window");
  est.area_estimate = static_cast<double>(est.occupied_count) * grid.cell_area();
  est.fat = est.occupied_count >= opt.fat_min_cells;

  // Unroll the ring so the tail is in chronological order.
  std::vector<std::size_t> tail;
  tail.reserve(window);
  for (std::size_t k = 0; k < window; ++k) tail.push_back(ring[(ring_pos + k) % window]);

  // The reported period is the largest q <= max_period whose residue classes
  // split the attractor into disjoint pieces visited cyclically.
  int best = 0;
  std::vector<cell_set> best_sets;
  for (int q = 1; q <= opt.max_period; ++q) {
    auto t = detail::test_period(tail, grid.cell_count(), q, opt.overlap_slack, opt.cycle_hit_fraction);
    if (t.disjoint && t.cycles) {
      best = q;
      best_sets = std::move(t.sets);
    }
  }
  if (best > 0) {
    // A passing 2q beyond the cap means the true period is larger still.
    bool beyond = false;
    if (2 * best > opt.max_period) {
      auto t = detail::test_period(tail, grid.cell_count(), 2 * best, opt.overlap_slack, opt.cycle_hit_fraction);
      beyond = t.disjoint && t.cycles;
    }
    if (!beyond) {
      est.period = best;
      est.phase_cells = std::move(best_sets);
    }
  }
  return est;
}

inline bool diagonal_cantor_member(const param_point& p, double x, long long n_max) {
  if (!(p.mu() > 4.0)) throw error(error_code::invalid_argument, "diagonal Cantor set requires mu > 4");
  for (long long k = 0; k <= n_max; ++k) {
    if (!(x >= 0.0 && x <= 1.0)) return false;
    if (k < n_max) x = logistic(x, p.mu());
  }
  return true;
}

struct itinerary {
  std::vector<int> symbols;
  bool escaped = false;
  int escape_step = -1;
};

// Symbol of the preimage component of Q containing z, in branch order:
// 0 = (--), 1 = (-+), 2 = (+-), 3 = (++).
inline int quadrant_symbol(plane_point z) {
  if (std::abs(z.x - 0.5) <= tol::geo || std::abs(z.y - 0.5) <= tol::geo)
    throw error(error_code::ambiguous_component, "iterate within tolerance of a critical line");
  return (z.x > 0.5 ? 2 : 0) + (z.y > 0.5 ? 1 : 0);
}

inline itinerary quadrant_itinerary(const param_point& p, plane_point z0, int n) {
  if (p.strength_class() != strength::large || !(p.mu() > 4.0))
    throw error(error_code::invalid_argument, "itineraries require large strength and mu > 4");
  if (n < 0) throw error(error_code::invalid_argument, "n must be non-negative");
  itinerary out;
  plane_point z = z0;
  for (int k = 0; k <= n; ++k) {
    if (z.x < 0.0 || z.x > 1.0 || z.y < 0.0 || z.y > 1.0 || !is_finite(z)) {
      out.escaped = true;
      out.escape_step = k;
      return out;
    }
    out.symbols.push_back(quadrant_symbol(z));
    if (k < n) z = map_eval(p, z);
  }
  return out;
}

}  // namespace clm
