#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "clm/core_map.hpp"
#include "clm/orbit.hpp"
#include "clm/polyline.hpp"
#include "clm/preimage.hpp"

namespace clm {

inline constexpr double lipschitz_slack = 1e-6;
inline constexpr double containment_slack = 1e-12;

// Samples of a symmetric function on the uniform grid t_i = i/N.
class lip_graph {
 public:
  lip_graph() = default;
  explicit lip_graph(int n) : values_(static_cast<std::size_t>(n) + 1, 0.0) {
    if (n < 2 || n % 2 != 0) throw error(error_code::invalid_argument, "grid size must be even and at least 2");
  }

  template <class Fn>
  static lip_graph from_function(int n, Fn&& h) {
    lip_graph g(n);
    for (int i = 0; i <= n; ++i) g.values_[i] = h(g.t(i));
    g.enforce_symmetry();
    return g;
  }

  int intervals() const { return static_cast<int>(values_.size()) - 1; }
  double t(int i) const { return static_cast<double>(i) / intervals(); }
  double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return values_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& values() const { return values_; }

  double value_at(double t) const {
    const int n = intervals();
    if (t <= 0.0) return values_.front();
    if (t >= 1.0) return values_.back();
    const double s = t * n;
    int i = std::min(static_cast<int>(s), n - 1);
    const double u = s - i;
    return values_[i] + u * (values_[i + 1] - values_[i]);
  }

  // Mirror the left half onto the right half and pin the endpoints to 0.
  void enforce_symmetry() {
    const int n = intervals();
    for (int i = 0; i < n / 2; ++i) values_[n - i] = values_[i];
    values_.front() = 0.0;
    values_.back() = 0.0;
  }

  double sup_distance(const lip_graph& o) const {
    double d = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) d = std::max(d, std::abs(values_[i] - o.values_[i]));
    return d;
  }

  double max_step() const {
    double m = 0.0;
    for (std::size_t i = 1; i < values_.size(); ++i) m = std::max(m, std::abs(values_[i] - values_[i - 1]));
    return m;
  }

  polyline as_polyline() const {
    polyline c;
    for (int i = 0; i <= intervals(); ++i) c.vertices.push_back({t(i), values_[i]});
    return c;
  }

 private:
  std::vector<double> values_;
};

struct graph_check {
  bool symmetric = true;
  bool endpoints_zero = true;
  bool lipschitz = true;
  bool contained = true;

  bool ok() const { return symmetric && endpoints_zero && lipschitz && contained; }
};

inline graph_check check_graph(const lip_graph& g, strength s) {
  graph_check c;
  const int n = g.intervals();
  c.endpoints_zero = g[0] == 0.0 && g[n] == 0.0;
  for (int i = 0; i <= n; ++i) c.symmetric = c.symmetric && g[i] == g[n - i];
  c.lipschitz = g.max_step() <= (1.0 + lipschitz_slack) / n;
  for (int i = 0; i <= n; ++i) {
    const double t = g.t(i), h = g[i];
    if (s == strength::small)
      c.contained = c.contained && h <= containment_slack && t * t + h * h <= t + h + containment_slack;
    else
      c.contained = c.contained && h >= -containment_slack && h <= std::min(t, 1.0 - t) + containment_slack;
  }
  return c;
}

// Lower arc of the circle x^2 + y^2 = x + y over [0,1].
inline lip_graph circle_arc_seed(int n) {
  return lip_graph::from_function(n, [](double t) {
    const double r2 = 0.5 - (t - 0.5) * (t - 0.5);
    return 0.5 - std::sqrt(std::max(r2, 0.0));
  });
}

namespace detail {

// Radicand rx along the graph; affine in t on every grid interval and
// strictly decreasing for Lipschitz-1 graphs.
inline double graph_rx(const param_point& p, double t, double h) { return radicands(p, {t, h}).rx; }

// First t with rx(t, h(t)) = 0, by bisection between bracketing grid nodes.
inline std::optional<double> graph_l1_crossing(const param_point& p, const lip_graph& h) {
  const int n = h.intervals();
  int hi = -1;
  for (int i = 0; i <= n; ++i)
    if (graph_rx(p, h.t(i), h[i]) <= 0.0) {
      hi = i;
      break;
    }
  if (hi < 0) return std::nullopt;
  if (hi == 0) return 0.0;
  double a = h.t(hi - 1), b = h.t(hi);
  while (b - a > 1e-12) {
    const double m = 0.5 * (a + b);
    if (graph_rx(p, m, h.value_at(m)) > 0.0)
      a = m;
    else
      b = m;
  }
  return 0.5 * (a + b);
}

// For each target radicand r (decreasing from 1 to 0) the graph point with
// rx = r, located on the grid interval where rx crosses r and solved exactly.
inline std::vector<plane_point> graph_points_with_rx(const param_point& p, const lip_graph& h, double t_star,
                                                     const std::vector<double>& targets) {
  const int n = h.intervals();
  std::vector<double> rx(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) rx[i] = graph_rx(p, h.t(i), h[i]);
  std::vector<plane_point> out;
  out.reserve(targets.size());
  int seg = 0;
  const int last = std::min(n - 1, static_cast<int>(std::floor(t_star * n)));
  for (double r : targets) {
    while (seg < last && rx[seg + 1] > r) ++seg;
    const double r0 = rx[seg], r1 = rx[seg + 1];
    double u = r0 != r1 ? (r0 - r) / (r0 - r1) : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const double t = (seg + u) / n;
    out.push_back({t, h[seg] + u * (h[seg + 1] - h[seg])});
  }
  return out;
}

}  // namespace detail

// Exact graph transform along the lower branches: for every output abscissa
// x_i <= 1/2 the graph point with rx = (1 - 2 x_i)^2 is pulled back by
// (x-, y-), then mirrored. This is the operator on Lipschitz graphs used for
// large strength, and a cross-check for the small-strength polyline route.
inline lip_graph graph_transform(const param_point& p, const lip_graph& h) {
  auto t_star = detail::graph_l1_crossing(p, h);
  if (!t_star) throw error(error_code::no_l1_intersection, "graph does not meet L1 on [0,1]");
  const int n = h.intervals();
  std::vector<double> targets;
  for (int i = 0; i <= n / 2; ++i) {
    const double x = h.t(i);
    targets.push_back((1.0 - 2.0 * x) * (1.0 - 2.0 * x));
  }
  auto pts = detail::graph_points_with_rx(p, h, *t_star, targets);
  lip_graph out(n);
  for (int i = 0; i <= n / 2; ++i) {
    const auto r = radicands(p, pts[i]);
    out[i] = 0.5 * (1.0 - std::sqrt(std::max(r.ry, 0.0)));
  }
  out.enforce_symmetry();
  return out;
}

inline lip_graph large_strength_operator(const param_point& p, const lip_graph& h) {
  if (p.strength_class() != strength::large) throw error(error_code::invalid_argument, "large strength required");
  return graph_transform(p, h);
}

inline lip_graph small_strength_operator(const param_point& p, const lip_graph& g) {
  if (p.strength_class() != strength::small) throw error(error_code::invalid_argument, "small strength required");
  const int n = g.intervals();
  auto t_star = detail::graph_l1_crossing(p, g);
  if (!t_star) throw error(error_code::branch_topology, "graph stays inside the cone: S has entered the cone");

  // Graph polyline plus the graph points whose preimages have abscissa x_i,
  // so the preimage carries vertices on the output grid.
  std::vector<double> targets;
  for (int i = 0; i < n / 2; ++i) targets.push_back((1.0 - 2.0 * g.t(i)) * (1.0 - 2.0 * g.t(i)));
  auto extra = detail::graph_points_with_rx(p, g, *t_star, targets);
  polyline input = g.as_polyline();
  input.vertices.insert(input.vertices.end(), extra.begin(), extra.end());
  std::sort(input.vertices.begin(), input.vertices.end(), [](plane_point a, plane_point b) { return a.x < b.x; });
  input = normalized(std::move(input));

  auto parts = polyline_preimage(p, input);
  const polyline* lower = nullptr;
  int lower_count = 0, upper_count = 0;
  for (const auto& c : parts) {
    const bool ends_low = std::abs(c.vertices.front().y) < 1e-9 && std::abs(c.vertices.back().y) < 1e-9;
    const bool ends_high = std::abs(c.vertices.front().y - 1) < 1e-9 && std::abs(c.vertices.back().y - 1) < 1e-9;
    if (!c.closed && ends_low) {
      lower = &c;
      ++lower_count;
    } else if (!c.closed && ends_high) {
      ++upper_count;
    }
  }
  if (parts.size() != 2 || lower_count != 1 || upper_count != 1)
    throw error(error_code::branch_topology, "preimage did not split into two graphs (" + std::to_string(parts.size()) + " pieces)");
  polyline curve = *lower;
  if (curve.vertices.front().x > curve.vertices.back().x) curve = reversed(std::move(curve));
  if (!is_graph_over_x(curve)) throw error(error_code::branch_topology, "lower preimage is not a graph over [0,1]");

  lip_graph out(n);
  std::size_t seg = 0;
  const auto& v = curve.vertices;
  for (int i = 0; i <= n / 2; ++i) {
    const double x = g.t(i);
    while (seg + 2 < v.size() && v[seg + 1].x < x) ++seg;
    const double dx = v[seg + 1].x - v[seg].x;
    const double u = dx > 0.0 ? std::clamp((x - v[seg].x) / dx, 0.0, 1.0) : 0.0;
    out[i] = v[seg].y + u * (v[seg + 1].y - v[seg].y);
  }
  out.enforce_symmetry();
  return out;
}

struct gamma_curve {
  polyline bottom, top, left, right;
  polyline assembled;
};

// The four-piece collage of a graph h: bottom (t, h), top (t, 1-h),
// left (h, t), right (1-h, t); assembled as O -> S -> S1 -> S2 -> O.
inline gamma_curve assemble_gamma(const lip_graph& h) {
  gamma_curve g;
  const int n = h.intervals();
  for (int i = 0; i <= n; ++i) {
    const double t = h.t(i), v = h[i];
    g.bottom.vertices.push_back({t, v});
    g.top.vertices.push_back({t, 1.0 - v});
    g.left.vertices.push_back({v, t});
    g.right.vertices.push_back({1.0 - v, t});
  }
  auto& a = g.assembled.vertices;
  a = g.bottom.vertices;
  a.insert(a.end(), g.right.vertices.begin() + 1, g.right.vertices.end());
  a.insert(a.end(), g.top.vertices.rbegin() + 1, g.top.vertices.rend());
  a.insert(a.end(), g.left.vertices.rbegin() + 1, g.left.vertices.rend() - 1);
  g.assembled.closed = true;
  g.assembled = normalized(std::move(g.assembled));
  return g;
}

enum class gamma_regime { small_contraction, small_monotone, large_monotone };

inline const char* to_string(gamma_regime r) {
  switch (r) {
    case gamma_regime::small_contraction: return "small-contraction";
    case gamma_regime::small_monotone: return "small-monotone";
    case gamma_regime::large_monotone: return "large-monotone";
  }
  return "?";
}

struct gamma_result {
  gamma_curve curve;
  lip_graph graph;
  gamma_regime regime;
  int iterations = 0;
  double last_change = 0.0;
  std::vector<double> changes;
  // First iteration at which some interior node failed to increase strictly
  // (large strength only).
  std::optional<int> first_non_increase;
  int invariant_violations = 0;
};

class gamma_not_converged : public error {
 public:
  gamma_not_converged(int iters, double change, lip_graph last)
      : error(error_code::not_converged, "no convergence after " + std::to_string(iters) + " iterations (last change " +
                                             std::to_string(change) + ")"),
        last_iterate(std::move(last)) {}
  lip_graph last_iterate;
};

struct gamma_options {
  int grid = 4096;
  int max_iters = 100000;
  double tol = 1e-10;
};

inline gamma_result build_gamma(const param_point& p, const gamma_options& opt = {}, const stop_token* stop = nullptr) {
  const auto s = p.strength_class();
  const auto l = loci(p.epsilon());
  if (s == strength::other) throw error(error_code::domain_error, "invariant curve requires small or large strength");
  if (!(p.mu() > 1.0)) throw error(error_code::domain_error, "invariant curve requires mu > 1");
  if (p.mu() > *l.mu1) throw error(error_code::domain_error, "mu exceeds mu1(eps) = " + std::to_string(*l.mu1));

  gamma_result res;
  lip_graph h;
  if (s == strength::small) {
    res.regime = p.mu() > *l.mu0 ? gamma_regime::small_contraction : gamma_regime::small_monotone;
    h = circle_arc_seed(opt.grid);
  } else {
    res.regime = gamma_regime::large_monotone;
    h = lip_graph(opt.grid);
  }
  for (int it = 1; it <= opt.max_iters; ++it) {
    lip_graph next = s == strength::small ? small_strength_operator(p, h) : large_strength_operator(p, h);
    if (!check_graph(next, s).ok()) ++res.invariant_violations;
    if (s == strength::large && !res.first_non_increase) {
      for (int i = 1; i < opt.grid; ++i)
        if (!(next[i] > h[i])) {
          res.first_non_increase = it;
          break;
        }
    }
    const double change = next.sup_distance(h);
    res.changes.push_back(change);
    h = std::move(next);
    res.iterations = it;
    res.last_change = change;
    if (change < opt.tol) {
      res.graph = h;
      res.curve = assemble_gamma(h);
      return res;
    }
    if (stop && stop->stop_requested()) break;
  }
  throw gamma_not_converged(res.iterations, res.last_change, h);
}

// ---------------------------------------------------------------------------
// Sequence of curves for large strength beyond mu1.

struct gamma_stage {
  polyline bottom, right, top, left;
  polyline assembled;
  plane_point q;                // where the right piece first meets L1, going from S to S1
  double hausdorff_to_previous = 0.0;
  bool bottom_is_graph = true;
};

namespace detail {

inline polyline densified_path(const std::vector<plane_point>& corners, std::size_t n) {
  polyline c;
  c.vertices = corners;
  return resample(c, n);
}

// First L1 crossing along a curve; returns the crossing point and the vertex
// index after it.
inline std::pair<plane_point, std::size_t> first_l1_crossing(const param_point& p, const polyline& c, int stage) {
  const double k = radicand_to_distance(p);
  const auto& v = c.vertices;
  double prev = radicands(p, v[0]).rx;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double r = radicands(p, v[i]).rx;
    if (r <= 0.0) {
      if (std::abs(prev) * k <= tol::geo && std::abs(r) * k <= tol::geo)
        throw error(error_code::order_ambiguity, "tangential L1 contact at stage " + std::to_string(stage));
      const double u = prev / (prev - r);
      return {lerp(v[i - 1], v[i], u), i};
    }
    // A local minimum grazing L1 without crossing makes "first" ill-defined.
    if (i + 1 < v.size()) {
      const double nxt = radicands(p, v[i + 1]).rx;
      if (r < prev && r < nxt && r * k <= tol::geo)
        throw error(error_code::order_ambiguity, "tangential L1 contact at stage " + std::to_string(stage));
    }
    prev = r;
  }
  throw error(error_code::order_ambiguity, "right piece never meets L1 at stage " + std::to_string(stage));
}

inline gamma_stage stage_from_arc(const param_point& p, const polyline& arc, std::size_t resample_to, int stage) {
  auto parts = polyline_preimage(p, arc, resample_to);
  const polyline* lower = nullptr;
  const polyline* upper = nullptr;
  for (const auto& c : parts) {
    if (c.closed) continue;
    const auto a = c.vertices.front(), b = c.vertices.back();
    auto near = [](plane_point z, plane_point w) { return dist(z, w) < 1e-8; };
    if ((near(a, {0, 0}) && near(b, {1, 0})) || (near(a, {1, 0}) && near(b, {0, 0}))) lower = &c;
    if ((near(a, {0, 1}) && near(b, {1, 1})) || (near(a, {1, 1}) && near(b, {0, 1}))) upper = &c;
  }
  if (!lower || !upper)
    throw error(error_code::branch_topology, "stage " + std::to_string(stage) + " preimage lost the O-S or S2-S1 arc");
  gamma_stage g;
  g.bottom = *lower;
  if (dist(g.bottom.vertices.front(), {0, 0}) > 1e-8) g.bottom = reversed(std::move(g.bottom));
  g.top = *upper;
  if (dist(g.top.vertices.front(), {0, 1}) > 1e-8) g.top = reversed(std::move(g.top));
  g.bottom.vertices.front() = {0, 0};
  g.bottom.vertices.back() = {1, 0};
  g.top.vertices.front() = {0, 1};
  g.top.vertices.back() = {1, 1};
  g.right = reflected(g.top);  // S -> S1
  g.left = reflected(g.bottom);  // O -> S2
  auto& a = g.assembled.vertices;
  a = g.bottom.vertices;
  a.insert(a.end(), g.right.vertices.begin() + 1, g.right.vertices.end());
  a.insert(a.end(), g.top.vertices.rbegin() + 1, g.top.vertices.rend());
  a.insert(a.end(), g.left.vertices.rbegin() + 1, g.left.vertices.rend() - 1);
  g.assembled.closed = true;
  g.assembled = normalized(std::move(g.assembled));
  g.bottom_is_graph = is_graph_over_x(g.bottom);
  return g;
}

}  // namespace detail

inline std::vector<gamma_stage> build_gamma_sequence(const param_point& p, int n, std::size_t resample_to = 4096) {
  if (p.strength_class() != strength::large) throw error(error_code::domain_error, "sequence requires large strength");
  const double mu1 = *loci(p.epsilon()).mu1;
  if (!(p.mu() > mu1 && p.mu() < 4.0)) throw error(error_code::domain_error, "sequence requires mu1(eps) < mu < 4");
  if (n < 1) throw error(error_code::invalid_argument, "n must be at least 1");

  const double e = p.epsilon();
  const plane_point q1{1.0, (1.0 - e) / e - (1.0 - 2.0 * e) * p.mu() / (4.0 * e)};
  std::vector<gamma_stage> out;
  polyline arc = detail::densified_path({{0, 0}, {1, 0}, q1}, resample_to);
  for (int k = 1; k <= n; ++k) {
    auto stage = detail::stage_from_arc(p, arc, resample_to, k);
    auto [q, idx] = detail::first_l1_crossing(p, stage.right, k);
    stage.q = q;
    if (!out.empty()) stage.hausdorff_to_previous = hausdorff(out.back().assembled, stage.assembled);
    // Next arc: O -> S along the bottom piece, then S -> q along the right piece.
    polyline next;
    next.vertices = stage.bottom.vertices;
    next.vertices.insert(next.vertices.end(), stage.right.vertices.begin() + 1, stage.right.vertices.begin() + static_cast<std::ptrdiff_t>(idx));
    next.vertices.push_back(q);
    arc = normalized(std::move(next));
    out.push_back(std::move(stage));
  }
  return out;
}

struct witness {
  plane_point point;
  int depth;  // number of steps to land on the fixed point O
  double distance_to_curve;
};

struct witness_options {
  double margin = 2e-3;       // minimum distance from the curve
  long long verify_steps = 10000;
  double landing_tol = 1e-8;
};

// Bounded points outside a closed curve, searched among the iterated
// preimages of O. Each candidate is confirmed by iterating forward: it must
// stay in Q and land on O within landing_tol after `depth` steps, after which
// the orbit stays at the fixed point for the remaining steps.
inline std::vector<witness> exterior_bounded_witnesses(const param_point& p, const polyline& gamma, std::size_t search_budget,
                                                       const witness_options& opt = {}) {
  std::vector<witness> out;
  if (search_budget == 0 || gamma.vertices.size() < 3) return out;
  segment_index index(gamma);
  polygon_locator interior(gamma);
  std::vector<plane_point> level{{0.0, 0.0}};
  std::size_t examined = 1;
  for (int depth = 1; !level.empty() && examined < search_budget; ++depth) {
    std::vector<plane_point> next;
    for (auto z : level) {
      for (auto w : preimages(p, z)) {
        if (examined >= search_budget) break;
        ++examined;
        // O is its own preimage; its subtree is already being expanded.
        if (w == plane_point{0.0, 0.0}) continue;
        if (!(w.x >= 0.0 && w.x <= 1.0 && w.y >= 0.0 && w.y <= 1.0)) continue;
        next.push_back(w);
        if (interior.inside(w)) continue;
        const double d = index.distance(w);
        if (d <= opt.margin) continue;
        // Forward confirmation.
        plane_point v = w;
        bool ok = true;
        for (int s = 0; s < depth && ok; ++s) {
          v = map_eval(p, v);
          ok = v.x >= -opt.landing_tol && v.x <= 1.0 + opt.landing_tol && v.y >= -opt.landing_tol && v.y <= 1.0 + opt.landing_tol;
        }
        ok = ok && norm(v) <= opt.landing_tol && depth <= opt.verify_steps;
        if (ok) out.push_back({w, depth, d});
      }
    }
    level = std::move(next);
  }
  return out;
}

}  // namespace clm
