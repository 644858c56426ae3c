#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "clm/error.hpp"

namespace clm {

namespace tol {
inline constexpr double round_trip = 1e-12;
inline constexpr double fixed = 1e-12;
inline constexpr double geo = 1e-10;
inline constexpr double eig = 1e-8;
}  // namespace tol

struct plane_point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const plane_point&, const plane_point&) = default;
};

inline plane_point operator+(plane_point a, plane_point b) { return {a.x + b.x, a.y + b.y}; }
inline plane_point operator-(plane_point a, plane_point b) { return {a.x - b.x, a.y - b.y}; }
inline plane_point operator*(double s, plane_point a) { return {s * a.x, s * a.y}; }
inline double dot(plane_point a, plane_point b) { return a.x * b.x + a.y * b.y; }
inline double norm(plane_point a) { return std::hypot(a.x, a.y); }
inline double dist(plane_point a, plane_point b) { return norm(a - b); }
inline plane_point lerp(plane_point a, plane_point b, double s) { return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)}; }
inline bool is_finite(plane_point a) { return std::isfinite(a.x) && std::isfinite(a.y); }

// Reflection across the diagonal.
inline plane_point reflect(plane_point a) { return {a.y, a.x}; }

enum class strength { small, large, other };

inline const char* to_string(strength s) {
  switch (s) {
    case strength::small: return "Small";
    case strength::large: return "Large";
    case strength::other: return "Other";
  }
  return "?";
}

class param_point {
 public:
  param_point(double mu, double epsilon) : mu_(mu), eps_(epsilon) {
    if (!std::isfinite(mu) || !std::isfinite(epsilon))
      throw error(error_code::invalid_argument, "mu and epsilon must be finite");
    if (!(mu > 0.0)) throw error(error_code::invalid_argument, "mu must be positive");
    if (epsilon == 0.0 || epsilon == 0.5 || epsilon == 1.0)
      throw error(error_code::invalid_argument, "epsilon must differ from 0, 1/2 and 1");
  }

  double mu() const noexcept { return mu_; }
  double epsilon() const noexcept { return eps_; }

  strength strength_class() const noexcept {
    if (eps_ > 0.0 && eps_ < 0.5) return strength::small;
    if (eps_ < 0.0) return strength::large;
    return strength::other;
  }

  friend bool operator==(const param_point&, const param_point&) = default;

 private:
  double mu_;
  double eps_;
};

inline double logistic(double t, double mu) { return mu * t * (1.0 - t); }
inline double logistic_deriv(double t, double mu) { return mu * (1.0 - 2.0 * t); }

inline plane_point map_eval(const param_point& p, plane_point z) {
  const double e = p.epsilon();
  const double fx = logistic(z.x, p.mu());
  const double fy = logistic(z.y, p.mu());
  // (1-e) f(x) + e f(y), arranged so diagonal inputs map to exactly (f(x), f(x)).
  return {fx + e * (fy - fx), fy + e * (fx - fy)};
}

inline plane_point map_iterate(const param_point& p, plane_point z, int n) {
  for (int i = 0; i < n; ++i) z = map_eval(p, z);
  return z;
}

// Row-major 2x2 matrix [[a, b], [c, d]].
struct mat2 {
  double a = 1, b = 0, c = 0, d = 1;

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  plane_point apply(plane_point v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

  static mat2 identity() { return {}; }
};

inline mat2 operator*(const mat2& m, const mat2& n) {
  return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d, m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
}

inline mat2 jacobian(const param_point& p, plane_point z) {
  const double e = p.epsilon();
  const double dx = logistic_deriv(z.x, p.mu());
  const double dy = logistic_deriv(z.y, p.mu());
  return {(1.0 - e) * dx, e * dy, e * dx, (1.0 - e) * dy};
}

using eigen_pair = std::array<std::complex<double>, 2>;

// Closed-form eigenvalues, larger real part (or positive imaginary part) first.
inline eigen_pair eigenvalues(const mat2& m) {
  const double half_tr = 0.5 * m.trace();
  const double disc = half_tr * half_tr - m.det();
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    // Avoid cancellation in the smaller root.
    const double big = half_tr >= 0.0 ? half_tr + s : half_tr - s;
    const double other = big != 0.0 ? m.det() / big : half_tr - s;
    if (big >= other) return {std::complex<double>(big, 0.0), std::complex<double>(other, 0.0)};
    return {std::complex<double>(other, 0.0), std::complex<double>(big, 0.0)};
  }
  const double s = std::sqrt(-disc);
  return {std::complex<double>(half_tr, s), std::complex<double>(half_tr, -s)};
}

inline bool is_complex_pair(const eigen_pair& ev) { return ev[0].imag() != 0.0; }

enum class stability { repeller, saddle, attractor, non_hyperbolic };

inline const char* to_string(stability s) {
  switch (s) {
    case stability::repeller: return "Repeller";
    case stability::saddle: return "Saddle";
    case stability::attractor: return "Attractor";
    case stability::non_hyperbolic: return "NonHyperbolic";
  }
  return "?";
}

inline stability classify(const eigen_pair& ev) {
  const double m0 = std::abs(ev[0]);
  const double m1 = std::abs(ev[1]);
  if (std::abs(m0 - 1.0) <= tol::eig || std::abs(m1 - 1.0) <= tol::eig) return stability::non_hyperbolic;
  if (m0 < 1.0 && m1 < 1.0) return stability::attractor;
  if (m0 > 1.0 && m1 > 1.0) return stability::repeller;
  return stability::saddle;
}

enum class fixed_point_label { O, Pmu, PmuEps, RPmuEps };

inline const char* to_string(fixed_point_label l) {
  switch (l) {
    case fixed_point_label::O: return "O";
    case fixed_point_label::Pmu: return "Pmu";
    case fixed_point_label::PmuEps: return "PmuEps";
    case fixed_point_label::RPmuEps: return "RPmuEps";
  }
  return "?";
}

struct fixed_point_info {
  plane_point location;
  eigen_pair eigenvalues;
  stability classification;
  fixed_point_label label;
};

// k = 1 - 1/(mu (1 - 2 eps)), the shift parameter of the off-diagonal pair.
inline double pitchfork_k(const param_point& p) { return 1.0 - 1.0 / (p.mu() * (1.0 - 2.0 * p.epsilon())); }

inline double pitchfork_discriminant(const param_point& p) {
  const double mu = p.mu();
  const double k = pitchfork_k(p);
  return 2.0 * (mu - 1.0) * mu * k - mu * mu * k * k;
}

// The off-diagonal fixed point (p-, p+) when it exists.
inline std::optional<plane_point> off_diagonal_fixed_point(const param_point& p) {
  const double disc = pitchfork_discriminant(p);
  if (disc < 0.0) return std::nullopt;
  const double mu = p.mu();
  const double k = pitchfork_k(p);
  const double s = std::sqrt(disc);
  return plane_point{(k * mu - s) / (2.0 * mu), (k * mu + s) / (2.0 * mu)};
}

inline fixed_point_info diagonal_fixed_point(const param_point& p, double x, fixed_point_label label) {
  const double d = logistic_deriv(x, p.mu());
  eigen_pair ev{std::complex<double>(d, 0.0), std::complex<double>((1.0 - 2.0 * p.epsilon()) * d, 0.0)};
  return {{x, x}, ev, classify(ev), label};
}

inline std::vector<fixed_point_info> fixed_points(const param_point& p) {
  std::vector<fixed_point_info> out;
  out.push_back(diagonal_fixed_point(p, 0.0, fixed_point_label::O));
  out.push_back(diagonal_fixed_point(p, (p.mu() - 1.0) / p.mu(), fixed_point_label::Pmu));
  if (auto q = off_diagonal_fixed_point(p)) {
    for (auto [pt, label] : {std::pair{*q, fixed_point_label::PmuEps}, std::pair{reflect(*q), fixed_point_label::RPmuEps}}) {
      auto ev = eigenvalues(jacobian(p, pt));
      out.push_back({pt, ev, classify(ev), label});
    }
  }
  return out;
}

struct loci_values {
  std::optional<double> mu0;
  std::optional<double> mu1;
  std::optional<double> mu_prime;
  std::optional<double> mu0_prime;
  std::optional<double> mu2;
};

inline loci_values loci(double eps) {
  if (!std::isfinite(eps) || eps == 0.5) throw error(error_code::invalid_argument, "epsilon must be finite and differ from 1/2");
  loci_values v;
  const double w = 1.0 - 2.0 * eps;
  const bool small = eps > 0.0 && eps < 0.5;
  const bool large = eps < 0.0;
  if (small) {
    v.mu0 = 1.0 / w;
    if (eps <= 0.375) v.mu_prime = 1.0 + std::sqrt((3.0 - 2.0 * eps) / w);
  }
  if (small || large) v.mu1 = 4.0 * (1.0 - eps) / w;
  if (large) {
    v.mu0_prime = (1.0 - 4.0 * eps) / w;
    v.mu2 = (3.0 - 4.0 * eps) / w;
  }
  return v;
}

// A critical-value ray y = slope * x + intercept leaving the cone vertex
// towards decreasing x (direction -1) or increasing x (direction +1).
struct ray {
  double slope;
  double intercept;
  double vertex_x;
  int direction;

  double y_at(double x) const { return slope * x + intercept; }
  bool covers_x(double x) const { return direction < 0 ? x <= vertex_x : x >= vertex_x; }
};

struct rect {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(plane_point z) const { return z.x >= x0 && z.x <= x1 && z.y >= y0 && z.y <= y1; }
  bool valid() const { return std::isfinite(x0) && std::isfinite(x1) && std::isfinite(y0) && std::isfinite(y1) && x1 > x0 && y1 > y0; }
};

struct plane_geometry {
  double l1_x = 0.5;  // vertical critical line
  double l2_y = 0.5;  // horizontal critical line
  ray L1;
  ray L2;
  plane_point cone_vertex;
  plane_point circle_center{0.5, 0.5};
  double circle_radius = std::sqrt(0.5);
  rect square_Q{0, 1, 0, 1};
  double q_intercept;
};

inline plane_geometry geometry(const param_point& p) {
  const double mu = p.mu();
  const double e = p.epsilon();
  const double w = 1.0 - 2.0 * e;
  plane_geometry g;
  // L1 is the image of x = 1/2: its x - mu/4 is e (f(t) - mu/4), so it points
  // left for e > 0 and right for e < 0. L2 likewise with weight 1 - e.
  g.L1 = {(1.0 - e) / e, -w * mu / (4.0 * e), mu / 4.0, e > 0.0 ? -1 : 1};
  g.L2 = {e / (1.0 - e), w * mu / (4.0 * (1.0 - e)), mu / 4.0, e < 1.0 ? -1 : 1};
  g.cone_vertex = {mu / 4.0, mu / 4.0};
  g.q_intercept = w * mu / (4.0 * (1.0 - e));
  return g;
}

// Radicands of the inverse branches: x = (1 +- sqrt(rx))/2, y = (1 +- sqrt(ry))/2.
// rx vanishes on L1 and ry on L2; both are affine in z.
struct radicand_pair {
  double rx;
  double ry;
};

inline radicand_pair radicands(const param_point& p, plane_point z) {
  const double e = p.epsilon();
  const double s = 4.0 / (p.mu() * (1.0 - 2.0 * e));
  return {1.0 + s * (e * z.y - (1.0 - e) * z.x), 1.0 + s * (e * z.x - (1.0 - e) * z.y)};
}

// Multiply a radicand by this to get the signed distance to its ray's line.
inline double radicand_to_distance(const param_point& p) {
  const double e = p.epsilon();
  return std::abs(p.mu() * (1.0 - 2.0 * e)) / (4.0 * std::hypot(e, 1.0 - e));
}

enum class cone_position { interior, on_L1, on_L2, vertex, outside };

inline const char* to_string(cone_position c) {
  switch (c) {
    case cone_position::interior: return "Interior";
    case cone_position::on_L1: return "OnL1";
    case cone_position::on_L2: return "OnL2";
    case cone_position::vertex: return "Vertex";
    case cone_position::outside: return "Outside";
  }
  return "?";
}

inline cone_position cone_membership(const param_point& p, plane_point z) {
  const auto g = geometry(p);
  if (dist(z, g.cone_vertex) <= tol::geo) return cone_position::vertex;
  const auto r = radicands(p, z);
  const double k = radicand_to_distance(p);
  const double d1 = r.rx * k;
  const double d2 = r.ry * k;
  const bool on1 = std::abs(d1) <= tol::geo;
  const bool on2 = std::abs(d2) <= tol::geo;
  if (on1 && on2) return cone_position::vertex;
  if (on1) return d2 > 0.0 ? cone_position::on_L1 : cone_position::outside;
  if (on2) return d1 > 0.0 ? cone_position::on_L2 : cone_position::outside;
  return (d1 > 0.0 && d2 > 0.0) ? cone_position::interior : cone_position::outside;
}

// Sign pair of an inverse branch; -1 picks the root below 1/2.
struct branch {
  int sx;
  int sy;

  friend bool operator==(const branch&, const branch&) = default;
};

inline constexpr std::array<branch, 4> all_branches{{{-1, -1}, {-1, 1}, {1, -1}, {1, 1}}};

// Branch index in the fixed (--), (-+), (+-), (++) order.
inline int branch_index(branch b) { return (b.sx > 0 ? 2 : 0) + (b.sy > 0 ? 1 : 0); }

// Inverse branch evaluated from (already clamped, non-negative) radicands.
inline plane_point branch_point(radicand_pair r, branch b) {
  return {0.5 * (1.0 + b.sx * std::sqrt(r.rx)), 0.5 * (1.0 + b.sy * std::sqrt(r.ry))};
}

// Radicands snapped to zero for points classified onto a ray, so boundary
// preimages coincide exactly.
inline std::optional<radicand_pair> clamped_radicands(const param_point& p, plane_point z) {
  auto pos = cone_membership(p, z);
  if (pos == cone_position::outside) return std::nullopt;
  auto r = radicands(p, z);
  if (pos == cone_position::on_L1 || pos == cone_position::vertex) r.rx = 0.0;
  if (pos == cone_position::on_L2 || pos == cone_position::vertex) r.ry = 0.0;
  r.rx = std::max(r.rx, 0.0);
  r.ry = std::max(r.ry, 0.0);
  return r;
}

struct preimage_set {
  std::array<plane_point, 4> points{};
  std::array<branch, 4> branches{};
  int count = 0;

  const plane_point* begin() const { return points.data(); }
  const plane_point* end() const { return points.data() + count; }
  std::size_t size() const { return static_cast<std::size_t>(count); }
  const plane_point& operator[](std::size_t i) const { return points[i]; }
};

inline preimage_set preimages(const param_point& p, plane_point z) {
  preimage_set out;
  auto r = clamped_radicands(p, z);
  if (!r) return out;
  for (branch b : all_branches) {
    plane_point w = branch_point(*r, b);
    bool dup = false;
    for (int i = 0; i < out.count; ++i) dup = dup || dist(out.points[i], w) < tol::geo;
    if (dup) continue;
    out.points[out.count] = w;
    out.branches[out.count] = b;
    ++out.count;
  }
  return out;
}

}  // namespace clm
