#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "clm/core_map.hpp"

namespace clm {

struct polyline {
  std::vector<plane_point> vertices;
  bool closed = false;

  std::size_t size() const { return vertices.size(); }
  std::size_t segment_count() const {
    if (vertices.size() < 2) return 0;
    return closed ? vertices.size() : vertices.size() - 1;
  }
  plane_point seg_a(std::size_t i) const { return vertices[i]; }
  plane_point seg_b(std::size_t i) const { return vertices[(i + 1) % vertices.size()]; }

  double length() const {
    double s = 0.0;
    for (std::size_t i = 0; i < segment_count(); ++i) s += dist(seg_a(i), seg_b(i));
    return s;
  }
};

// Drops consecutive duplicates (and a duplicated closing vertex).
inline polyline normalized(polyline c, double eps = 0.0) {
  std::vector<plane_point> v;
  v.reserve(c.vertices.size());
  for (auto z : c.vertices)
    if (v.empty() || dist(v.back(), z) > eps) v.push_back(z);
  if (c.closed) {
    while (v.size() > 1 && dist(v.front(), v.back()) <= eps) v.pop_back();
  }
  c.vertices = std::move(v);
  return c;
}

inline polyline reversed(polyline c) {
  std::reverse(c.vertices.begin(), c.vertices.end());
  return c;
}

inline polyline reflected(polyline c) {
  for (auto& z : c.vertices) z = reflect(z);
  return c;
}

// Chord-length resampling with piecewise-linear interpolation. Open curves
// keep both endpoints; closed curves keep vertex 0 and spread n vertices
// evenly around the loop.
inline polyline resample(const polyline& c, std::size_t n) {
  if (c.vertices.size() < 2 || n < 2) return c;
  std::vector<plane_point> pts = c.vertices;
  if (c.closed) pts.push_back(c.vertices.front());
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + dist(pts[i - 1], pts[i]);
  const double total = s.back();
  polyline out;
  out.closed = c.closed;
  if (total <= 0.0) {
    out.vertices = {pts.front()};
    return out;
  }
  const std::size_t denom = c.closed ? n : n - 1;
  out.vertices.reserve(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(denom);
    while (seg + 2 < pts.size() && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double u = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
    out.vertices.push_back(lerp(pts[seg], pts[seg + 1], u));
  }
  if (!c.closed) out.vertices.back() = pts.back();
  return normalized(std::move(out));
}

inline double point_segment_distance(plane_point z, plane_point a, plane_point b) {
  const plane_point ab = b - a;
  const double len2 = dot(ab, ab);
  double u = len2 > 0.0 ? dot(z - a, ab) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return dist(z, lerp(a, b, u));
}

// Uniform bucket grid over a set of segments for nearest-distance queries.
class segment_index {
 public:
  explicit segment_index(const std::vector<polyline>& curves) {
    for (const auto& c : curves)
      for (std::size_t i = 0; i < c.segment_count(); ++i) segs_.push_back({c.seg_a(i), c.seg_b(i)});
    if (c_empty()) return;
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
    double total = 0.0;
    for (auto& s : segs_) {
      x0 = std::min({x0, s.a.x, s.b.x});
      x1 = std::max({x1, s.a.x, s.b.x});
      y0 = std::min({y0, s.a.y, s.b.y});
      y1 = std::max({y1, s.a.y, s.b.y});
      total += dist(s.a, s.b);
    }
    const double mean = total / static_cast<double>(segs_.size());
    cell_ = std::max({mean * 2.0, (x1 - x0) / 512.0, (y1 - y0) / 512.0, 1e-12});
    x0_ = x0 - cell_;
    y0_ = y0 - cell_;
    nx_ = static_cast<int>((x1 - x0_) / cell_) + 2;
    ny_ = static_cast<int>((y1 - y0_) / cell_) + 2;
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (std::size_t k = 0; k < segs_.size(); ++k) {
      const auto& s = segs_[k];
      int i0 = bx(std::min(s.a.x, s.b.x)), i1 = bx(std::max(s.a.x, s.b.x));
      int j0 = by(std::min(s.a.y, s.b.y)), j1 = by(std::max(s.a.y, s.b.y));
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<unsigned>(k));
    }
    for (std::size_t b = 0; b < buckets_.size(); ++b)
      if (!buckets_[b].empty()) occupied_.push_back(b);
  }

  explicit segment_index(const polyline& c) : segment_index(std::vector<polyline>{c}) {}

  // Distance from z to the nearest segment (vertex-only curves count as points).
  double distance(plane_point z) const {
    if (c_empty()) return std::numeric_limits<double>::infinity();
    const int ci = bx(z.x), cj = by(z.y);
    double best = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nx_, ny_) + 1;
    std::size_t visited = 0;
    for (int ring = 0; ring <= max_ring; ++ring) {
      // Anything found in this ring is closer than anything beyond ring+1.
      if (best <= (ring - 1) * cell_) return best;
      // Once the rings cost more than a full scan of occupied buckets, switch.
      if (visited > 4 * occupied_.size()) break;
      auto visit = [&](int i, int j) {
        if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return;
        ++visited;
        scan(z, static_cast<std::size_t>(j) * nx_ + i, best);
      };
      if (ring == 0) {
        visit(ci, cj);
        continue;
      }
      for (int i = ci - ring; i <= ci + ring; ++i) {
        visit(i, cj - ring);
        visit(i, cj + ring);
      }
      for (int j = cj - ring + 1; j <= cj + ring - 1; ++j) {
        visit(ci - ring, j);
        visit(ci + ring, j);
      }
    }
    // Far from the curve: visit occupied buckets by increasing box distance.
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(occupied_.size());
    for (std::size_t b : occupied_) {
      const int i = static_cast<int>(b % nx_), j = static_cast<int>(b / nx_);
      const double dx = std::max({x0_ + i * cell_ - z.x, z.x - (x0_ + (i + 1) * cell_), 0.0});
      const double dy = std::max({y0_ + j * cell_ - z.y, z.y - (y0_ + (j + 1) * cell_), 0.0});
      order.push_back({std::hypot(dx, dy), b});
    }
    std::sort(order.begin(), order.end());
    for (auto [d, b] : order) {
      if (d >= best) break;
      scan(z, b, best);
    }
    return best;
  }

 private:
  struct seg {
    plane_point a, b;
  };

  void scan(plane_point z, std::size_t bucket, double& best) const {
    for (unsigned k : buckets_[bucket]) best = std::min(best, point_segment_distance(z, segs_[k].a, segs_[k].b));
  }

  bool c_empty() const { return segs_.empty(); }
  int bx(double x) const { return std::clamp(static_cast<int>(std::floor((x - x0_) / cell_)), 0, nx_ - 1); }
  int by(double y) const { return std::clamp(static_cast<int>(std::floor((y - y0_) / cell_)), 0, ny_ - 1); }

  std::vector<seg> segs_;
  std::vector<std::vector<unsigned>> buckets_;
  std::vector<std::size_t> occupied_;
  double x0_ = 0, y0_ = 0, cell_ = 1;
  int nx_ = 1, ny_ = 1;
};

inline std::vector<plane_point> all_vertices(const std::vector<polyline>& curves) {
  std::vector<plane_point> out;
  for (const auto& c : curves) out.insert(out.end(), c.vertices.begin(), c.vertices.end());
  return out;
}

// sup over points of the distance to the curve set.
inline double directed_hausdorff(const std::vector<plane_point>& points, const std::vector<polyline>& to) {
  segment_index idx(to);
  double h = 0.0;
  for (auto z : points) h = std::max(h, idx.distance(z));
  return h;
}

inline double hausdorff(const std::vector<polyline>& a, const std::vector<polyline>& b) {
  return std::max(directed_hausdorff(all_vertices(a), b), directed_hausdorff(all_vertices(b), a));
}

inline double hausdorff(const polyline& a, const polyline& b) {
  return hausdorff(std::vector<polyline>{a}, std::vector<polyline>{b});
}

// Even-odd rule; the boundary itself is undefined, callers keep a margin.
inline bool inside_polygon(const polyline& c, plane_point z) {
  bool in = false;
  const auto& v = c.vertices;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > z.y) != (v[j].y > z.y)) {
      const double xc = v[j].x + (z.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (z.x < xc) in = !in;
    }
  }
  return in;
}

// Winding number of a closed curve around z (crossing-number form).
inline int winding_number(const polyline& c, plane_point z) {
  int w = 0;
  const auto& v = c.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const plane_point a = v[i], b = v[(i + 1) % v.size()];
    const double side = (b.x - a.x) * (z.y - a.y) - (z.x - a.x) * (b.y - a.y);
    if (a.y <= z.y) {
      if (b.y > z.y && side > 0) ++w;
    } else if (b.y <= z.y && side < 0) {
      --w;
    }
  }
  return w;
}

// Even-odd point location against a fixed closed curve, with edges bucketed
// into horizontal bands so a query only scans the edges spanning its band.
class polygon_locator {
 public:
  explicit polygon_locator(const polyline& c, int bands = 1024) : v_(c.vertices) {
    if (v_.size() < 3) return;
    y0_ = y1_ = v_[0].y;
    for (auto z : v_) {
      y0_ = std::min(y0_, z.y);
      y1_ = std::max(y1_, z.y);
    }
    bands_.assign(static_cast<std::size_t>(bands), {});
    h_ = std::max((y1_ - y0_) / bands, 1e-300);
    for (std::size_t i = 0; i < v_.size(); ++i) {
      const auto a = v_[i], b = v_[(i + 1) % v_.size()];
      const int j0 = band(std::min(a.y, b.y)), j1 = band(std::max(a.y, b.y));
      for (int j = j0; j <= j1; ++j) bands_[static_cast<std::size_t>(j)].push_back(static_cast<unsigned>(i));
    }
  }

  bool inside(plane_point z) const {
    if (bands_.empty() || z.y < y0_ || z.y > y1_) return false;
    bool in = false;
    for (unsigned i : bands_[static_cast<std::size_t>(band(z.y))]) {
      const auto a = v_[(i + 1) % v_.size()], b = v_[i];
      if ((a.y > z.y) != (b.y > z.y)) {
        const double xc = b.x + (z.y - b.y) * (a.x - b.x) / (a.y - b.y);
        if (z.x < xc) in = !in;
      }
    }
    return in;
  }

 private:
  int band(double y) const {
    return std::clamp(static_cast<int>((y - y0_) / h_), 0, static_cast<int>(bands_.size()) - 1);
  }

  std::vector<plane_point> v_;
  std::vector<std::vector<unsigned>> bands_;
  double y0_ = 0, y1_ = 0, h_ = 1;
};

// True if x is strictly monotone along the curve (vertical line test).
inline bool is_graph_over_x(const polyline& c) {
  if (c.vertices.size() < 2) return true;
  const double dir = c.vertices.back().x - c.vertices.front().x;
  for (std::size_t i = 1; i < c.vertices.size(); ++i) {
    const double dx = c.vertices[i].x - c.vertices[i - 1].x;
    if (dx * dir <= 0.0) return false;
  }
  return true;
}

// Circle x^2 + y^2 = x + y, starting at O and running through S=(1,0).
inline polyline circle_C(std::size_t n) {
  polyline c;
  c.closed = true;
  const double r = std::sqrt(0.5);
  const double start = -3.0 * std::numbers::pi / 4.0;  // angle of O seen from the center
  for (std::size_t k = 0; k < n; ++k) {
    const double a = start + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    c.vertices.push_back({0.5 + r * std::cos(a), 0.5 + r * std::sin(a)});
  }
  c.vertices[0] = {0.0, 0.0};
  return c;
}

// Boundary of the unit square, counter-clockwise from O, with n vertices.
inline polyline boundary_Q(std::size_t n) {
  polyline c;
  c.closed = true;
  const std::size_t per = std::max<std::size_t>(1, n / 4);
  const plane_point corners[4] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (int s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < per; ++k)
      c.vertices.push_back(lerp(corners[s], corners[(s + 1) % 4], static_cast<double>(k) / static_cast<double>(per)));
  return c;
}

}  // namespace clm
