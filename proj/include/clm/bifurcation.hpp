#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "clm/core_map.hpp"
#include "clm/grid.hpp"
#include "clm/orbit.hpp"
#include "clm/parallel.hpp"

namespace clm {

struct periodic_orbit {
  std::vector<plane_point> points;
  int period = 1;
  eigen_pair cycle_eigenvalues{};
  double residual = 0.0;
  int iterations = 0;

  // Modulus of the complex pair, if the cycle eigenvalues are one.
  std::optional<double> complex_modulus() const {
    if (!is_complex_pair(cycle_eigenvalues)) return std::nullopt;
    return std::abs(cycle_eigenvalues[0]);
  }
  double max_modulus() const { return std::max(std::abs(cycle_eigenvalues[0]), std::abs(cycle_eigenvalues[1])); }
};

struct newton_options {
  int max_iterations = 100;
  double tolerance = tol::fixed;
  int max_halvings = 30;
};

// Product of Jacobians along p steps from z, and the endpoint F^p(z).
inline std::pair<mat2, plane_point> cycle_jacobian(const param_point& par, plane_point z, int period) {
  mat2 m = mat2::identity();
  for (int k = 0; k < period; ++k) {
    m = jacobian(par, z) * m;
    z = map_eval(par, z);
  }
  return {m, z};
}

// Newton iteration on G(z) = F^p(z) - z. A step that raises the residual is
// halved until it does not (damping 1/2).
inline periodic_orbit find_periodic_orbit(const param_point& par, int period, plane_point guess,
                                          const newton_options& opt = {}) {
  if (period < 1) throw error(error_code::invalid_argument, "period must be at least 1");
  if (!is_finite(guess)) throw error(error_code::invalid_argument, "guess must be finite");
  auto residual_of = [&](plane_point z) {
    const plane_point w = map_iterate(par, z, period);
    const double r = dist(w, z);
    return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
  };
  plane_point z = guess;
  double res = residual_of(z);
  int it = 0;
  for (; it < opt.max_iterations && !(res <= opt.tolerance); ++it) {
    auto [m, w] = cycle_jacobian(par, z, period);
    const mat2 jg{m.a - 1.0, m.b, m.c, m.d - 1.0};
    const double det = jg.det();
    if (!std::isfinite(det) || det == 0.0) break;
    const plane_point g = w - z;
    const plane_point step{(jg.d * g.x - jg.b * g.y) / det, (-jg.c * g.x + jg.a * g.y) / det};
    double lambda = 1.0;
    plane_point next = z - step;
    double next_res = residual_of(next);
    for (int h = 0; h < opt.max_halvings && !(next_res < res); ++h) {
      lambda *= 0.5;
      next = z - lambda * step;
      next_res = residual_of(next);
    }
    if (!(next_res < res) && !(next_res <= opt.tolerance)) {
      // Damping exhausted: accept the full step once to escape a plateau.
      next = z - step;
      next_res = residual_of(next);
    }
    z = next;
    res = next_res;
  }
  if (!(res <= opt.tolerance)) {
    std::ostringstream msg;
    msg << "iterations=" << it << " last_residual=" << res;
    throw error(error_code::no_convergence, msg.str());
  }

  periodic_orbit out;
  out.period = period;
  out.iterations = it;
  out.points.push_back(z);
  for (int k = 1; k < period; ++k) out.points.push_back(map_eval(par, out.points.back()));
  for (int k = 0; k < period; ++k)
    out.residual = std::max(out.residual, dist(map_eval(par, out.points[k]), out.points[(k + 1) % period]));
  for (int q = 1; q < period; ++q) {
    if (period % q != 0) continue;
    if (dist(map_iterate(par, z, q), z) <= opt.tolerance)
      throw error(error_code::converged_to_lower_period, "orbit has period " + std::to_string(q));
  }
  out.cycle_eigenvalues = eigenvalues(cycle_jacobian(par, z, period).first);
  return out;
}

// Closest return of a long orbit: the tail point z minimising |F^p(z) - z|.
inline plane_point seed_periodic_guess(const param_point& par, int period, plane_point z0, long long n_transient = 20000,
                                       int n_tail = 5000) {
  if (period < 1) throw error(error_code::invalid_argument, "period must be at least 1");
  const escape_region region(par);
  plane_point z = z0;
  for (long long k = 0; k < n_transient; ++k) {
    if (region.outside(z)) throw error(error_code::not_bounded, "orbit escaped at step " + std::to_string(k));
    z = map_eval(par, z);
  }
  std::vector<plane_point> tail{z};
  for (int k = 0; k < n_tail + period; ++k) {
    z = map_eval(par, z);
    if (region.outside(z)) throw error(error_code::not_bounded, "orbit escaped in the sampling window");
    tail.push_back(z);
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + period < tail.size(); ++k) {
    const double d = dist(tail[k + period], tail[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return tail[best];
}

// ---------------------------------------------------------------------------
// Hopf bracketing by continuation in mu.

struct continuation_sample {
  double mu = 0.0;
  periodic_orbit orbit;
};

struct hopf_bracket_result {
  double epsilon = 0.0;
  int period = 2;
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  periodic_orbit orbit_at_lo;
  double modulus_lo = 0.0;
  std::optional<double> modulus_hi;  // empty when the orbit was lost at mu_hi
  bool orbit_lost_at_hi = false;
  bool refined = true;  // false when the requested width already covers the range
  int bisection_steps = 0;
  std::vector<continuation_sample> continuation;
};

struct hopf_options {
  int steps = 200;          // continuation samples across the range
  int min_step_divisor = 64;  // local refinement when Newton fails
  newton_options newton{};
};

namespace detail {

// Corrector from a predicted point; nullopt when Newton fails or the orbit
// jumped to another branch.
inline std::optional<periodic_orbit> correct(double mu, double eps, int period, plane_point predicted,
                                             const newton_options& opt, double max_jump) {
  try {
    auto o = find_periodic_orbit(param_point(mu, eps), period, predicted, opt);
    if (dist(o.points[0], predicted) > max_jump) return std::nullopt;
    return o;
  } catch (const error&) {
    return std::nullopt;
  }
}

inline bool above_one(const periodic_orbit& o) {
  auto m = o.complex_modulus();
  return m && *m > 1.0;
}

inline bool below_one_complex(const periodic_orbit& o) {
  auto m = o.complex_modulus();
  return m && *m < 1.0;
}

}  // namespace detail

// Continues the period-p orbit from mu_start (seeded by Newton from
// seed_guess) and brackets the first mu where the complex pair modulus
// crosses 1, or where the orbit ceases to be found.
inline hopf_bracket_result hopf_bracket(double eps, int period, double mu_start, double mu_end, double width,
                                        plane_point seed_guess, const hopf_options& opt = {},
                                        const exec_options& ex = {}) {
  if (!(mu_start < mu_end)) throw error(error_code::invalid_argument, "mu_start must be below mu_end");
  if (!(width > 0.0)) throw error(error_code::invalid_argument, "width must be positive");
  if (period < 1) throw error(error_code::invalid_argument, "period must be at least 1");
  hopf_bracket_result out;
  out.epsilon = eps;
  out.period = period;

  periodic_orbit current;
  try {
    current = find_periodic_orbit(param_point(mu_start, eps), period, seed_guess, opt.newton);
  } catch (const error& e) {
    throw error(error_code::orbit_lost, std::string("no orbit at mu_start: ") + e.what());
  }
  out.continuation.push_back({mu_start, current});

  if (width >= mu_end - mu_start) {
    out.refined = false;
    out.mu_lo = mu_start;
    out.mu_hi = mu_end;
    out.orbit_at_lo = current;
    out.modulus_lo = current.max_modulus();
    if (auto hi = detail::correct(mu_end, eps, period, current.points[0], opt.newton, 1.0))
      out.modulus_hi = hi->max_modulus();
    else
      out.orbit_lost_at_hi = true;
    return out;
  }

  const double base = (mu_end - mu_start) / opt.steps;
  double mu = mu_start;
  bool saw_complex = is_complex_pair(current.cycle_eigenvalues);
  std::optional<double> hi_mu;
  std::optional<periodic_orbit> hi_orbit;
  plane_point velocity{0, 0};  // dz0/dmu from the last two samples
  while (mu_end - mu > 1e-14 * mu_end && !hi_mu) {
    if (ex.stop_requested()) throw error(error_code::not_converged, "cancelled");
    double h = std::min(base, mu_end - mu);
    std::optional<periodic_orbit> next;
    for (int div = 1; div <= opt.min_step_divisor && !next; div *= 2) {
      h = std::min(base, mu_end - mu) / div;
      const plane_point predicted = current.points[0] + h * velocity;
      next = detail::correct(mu + h, eps, period, predicted, opt.newton, std::max(1e-3, 20.0 * h * (1.0 + norm(velocity))));
    }
    if (!next) {
      hi_mu = mu + h;
      break;
    }
    const bool crossed = detail::below_one_complex(current) && (detail::above_one(*next) || next->max_modulus() > 1.0);
    velocity = (1.0 / h) * (next->points[0] - current.points[0]);
    out.continuation.push_back({mu + h, *next});
    saw_complex = saw_complex || is_complex_pair(next->cycle_eigenvalues);
    if (crossed) {
      hi_mu = mu + h;
      hi_orbit = next;
      break;
    }
    mu += h;
    current = *next;
  }
  if (!hi_mu) {
    if (!saw_complex) throw error(error_code::no_complex_pair, "cycle eigenvalues stay real over the range");
    throw error(error_code::no_complex_pair, "complex pair modulus does not cross 1 over the range");
  }
  if (!detail::below_one_complex(current)) {
    if (!saw_complex) throw error(error_code::orbit_lost, "continuation failed before a complex pair appeared");
    throw error(error_code::orbit_lost, "continuation failed before a modulus crossing");
  }

  // Bisection on [lo, hi]: lo keeps a complex pair inside the unit circle.
  double lo = mu;
  double hi = *hi_mu;
  periodic_orbit lo_orbit = current;
  while (hi - lo > width) {
    if (ex.stop_requested()) throw error(error_code::not_converged, "cancelled");
    const double mid = 0.5 * (lo + hi);
    auto o = detail::correct(mid, eps, period, lo_orbit.points[0], opt.newton, std::max(1e-3, 20.0 * (mid - lo) * (1.0 + norm(velocity))));
    ++out.bisection_steps;
    if (o && detail::below_one_complex(*o)) {
      lo = mid;
      lo_orbit = *o;
    } else {
      hi = mid;
      hi_orbit = o;
    }
  }
  out.mu_lo = lo;
  out.mu_hi = hi;
  out.orbit_at_lo = lo_orbit;
  out.modulus_lo = *lo_orbit.complex_modulus();
  if (hi_orbit) {
    out.modulus_hi = hi_orbit->max_modulus();
  } else {
    out.orbit_lost_at_hi = true;
  }
  return out;
}

struct hopf_request {
  double epsilon;
  int period;
  double mu_start, mu_end, width;
  plane_point seed_guess;
};

struct hopf_scan_entry {
  std::optional<hopf_bracket_result> bracket;
  std::optional<error_code> failure;
  std::string message;
};

// Independent requests run concurrently; each continuation is sequential.
inline std::vector<hopf_scan_entry> hopf_scan(const std::vector<hopf_request>& reqs, const hopf_options& opt = {},
                                              const exec_options& ex = {}) {
  std::vector<hopf_scan_entry> out(reqs.size());
  parallel_for(reqs.size(), ex.threads, [&](std::size_t i, unsigned) {
    const auto& r = reqs[i];
    try {
      out[i].bracket = hopf_bracket(r.epsilon, r.period, r.mu_start, r.mu_end, r.width, r.seed_guess, opt, ex);
    } catch (const error& e) {
      out[i].failure = e.code();
      out[i].message = e.what();
    }
  });
  return out;
}

// mu, orbit points, eigenvalue parts and moduli per continuation step.
inline std::string continuation_csv(const std::vector<continuation_sample>& samples) {
  std::ostringstream s;
  s.precision(17);
  if (samples.empty()) return "mu\n";
  const int p = samples.front().orbit.period;
  s << "mu";
  for (int k = 0; k < p; ++k) s << ",x" << k << ",y" << k;
  s << ",re1,im1,re2,im2,mod1,mod2\n";
  for (const auto& c : samples) {
    s << c.mu;
    for (auto z : c.orbit.points) s << ',' << z.x << ',' << z.y;
    const auto& ev = c.orbit.cycle_eigenvalues;
    s << ',' << ev[0].real() << ',' << ev[0].imag() << ',' << ev[1].real() << ',' << ev[1].imag() << ','
      << std::abs(ev[0]) << ',' << std::abs(ev[1]) << '\n';
  }
  return s.str();
}

// ---------------------------------------------------------------------------
// Pitchfork of the off-diagonal fixed points.

struct pitchfork_sample {
  double mu = 0.0;
  double offset = 0.0;  // mu - locus
  bool exists = false;
  std::optional<double> distance;  // |p_{mu,eps} - bifurcating fixed point|
};

struct pitchfork_report {
  double epsilon = 0.0;
  double locus = 0.0;
  bool from_origin = true;  // O for small strength, P_mu for large strength
  double discriminant_at_locus = 0.0;
  bool flip = false;           // existence differs on the two sides at offset 1e-8
  int existing_side = 0;       // +1 or -1
  double scaling_exponent = 0.0;
  bool exponent_ok = false;
  bool distances_shrink = false;
  std::vector<pitchfork_sample> samples;

  bool passed() const { return std::abs(discriminant_at_locus) <= 1e-8 && flip && exponent_ok && distances_shrink; }
};

inline pitchfork_report pitchfork_check(double eps, int n_samples = 12) {
  const auto lv = loci(eps);
  pitchfork_report rep;
  rep.epsilon = eps;
  if (lv.mu0) {
    rep.locus = *lv.mu0;
    rep.from_origin = true;
  } else if (lv.mu0_prime) {
    rep.locus = *lv.mu0_prime;
    rep.from_origin = false;
  } else {
    throw error(error_code::invalid_argument, "epsilon must give small or large strength");
  }
  if (n_samples < 3) throw error(error_code::invalid_argument, "at least three samples are needed");
  if (!(rep.locus > 0.0)) throw error(error_code::domain_error, "locus is not a positive mu");
  rep.discriminant_at_locus = pitchfork_discriminant(param_point(rep.locus, eps));

  const double probe = 1e-8 * std::max(1.0, rep.locus);
  const bool above = off_diagonal_fixed_point(param_point(rep.locus + probe, eps)).has_value();
  const bool below = off_diagonal_fixed_point(param_point(rep.locus - probe, eps)).has_value();
  rep.flip = above != below;
  rep.existing_side = above ? 1 : -1;

  auto bif_point = [&](double mu) {
    return rep.from_origin ? plane_point{0, 0} : plane_point{(mu - 1.0) / mu, (mu - 1.0) / mu};
  };
  // Offsets from 1e-1 to 1e-7 (times the locus scale), geometric.
  std::vector<double> lx, ly;
  for (int i = 0; i < n_samples; ++i) {
    const double t = static_cast<double>(i) / (n_samples - 1);
    const double off = std::pow(10.0, -1.0 - 6.0 * t) * std::max(1.0, rep.locus);
    for (int side : {1, -1}) {
      pitchfork_sample s;
      s.offset = side * off;
      s.mu = rep.locus + s.offset;
      if (!(s.mu > 0.0)) continue;
      const param_point par(s.mu, eps);
      if (auto q = off_diagonal_fixed_point(par)) {
        s.exists = true;
        s.distance = dist(*q, bif_point(s.mu));
        if (side == rep.existing_side && *s.distance > 0.0) {
          lx.push_back(std::log(off));
          ly.push_back(std::log(*s.distance));
        }
      }
      rep.samples.push_back(s);
    }
  }
  if (lx.size() >= 3) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    rep.scaling_exponent = sxy / sxx;
    rep.exponent_ok = std::abs(rep.scaling_exponent - 0.5) <= 0.1;
  }
  // Distances decrease as the offset shrinks on the existing side.
  rep.distances_shrink = ly.size() >= 2;
  for (std::size_t i = 1; i < ly.size(); ++i) rep.distances_shrink = rep.distances_shrink && ly[i] < ly[i - 1];
  return rep;
}

// ---------------------------------------------------------------------------
// Parameter-plane loci.

enum class locus_curve : std::uint8_t { mu0 = 1, mu1 = 2, mu_prime = 4, mu0_prime = 8, mu2 = 16 };

inline const char* to_string(locus_curve c) {
  switch (c) {
    case locus_curve::mu0: return "mu0";
    case locus_curve::mu1: return "mu1";
    case locus_curve::mu_prime: return "mu_prime";
    case locus_curve::mu0_prime: return "mu0_prime";
    case locus_curve::mu2: return "mu2";
  }
  return "?";
}

inline constexpr std::array<locus_curve, 5> all_loci{locus_curve::mu0, locus_curve::mu1, locus_curve::mu_prime,
                                                     locus_curve::mu0_prime, locus_curve::mu2};

inline std::optional<double> locus_value(const loci_values& v, locus_curve c) {
  switch (c) {
    case locus_curve::mu0: return v.mu0;
    case locus_curve::mu1: return v.mu1;
    case locus_curve::mu_prime: return v.mu_prime;
    case locus_curve::mu0_prime: return v.mu0_prime;
    case locus_curve::mu2: return v.mu2;
  }
  return std::nullopt;
}

// Cells carry a bit mask of the curves passing through them; x is epsilon and
// y is mu. Adjacent columns are joined vertically so steep curves stay connected.
struct loci_raster {
  grid_spec grid;
  std::vector<std::uint8_t> cells;
  bool empty() const { return cells.empty(); }
  bool has(int i, int j, locus_curve c) const { return cells[grid.index(i, j)] & static_cast<std::uint8_t>(c); }
  std::size_t count(locus_curve c) const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [&](std::uint8_t v) { return v & static_cast<std::uint8_t>(c); }));
  }
};

inline loci_raster loci_diagram(double eps_lo, double eps_hi, double mu_lo, double mu_hi, int width, int height) {
  loci_raster out;
  if (!(eps_hi > eps_lo) || !(mu_hi > mu_lo) || width < 1 || height < 1) return out;
  out.grid = grid_spec({eps_lo, eps_hi, mu_lo, mu_hi}, width, height);
  out.cells.assign(out.grid.cell_count(), 0);
  auto row_of = [&](double mu) { return static_cast<int>(std::floor((mu - mu_lo) / out.grid.cell_height())); };
  for (auto curve : all_loci) {
    std::optional<int> prev;
    for (int i = 0; i < width; ++i) {
      const double e = out.grid.cell_center(i, 0).x;
      std::optional<double> v;
      if (e != 0.5 && e != 0.0) v = locus_value(loci(e), curve);
      if (!v || !std::isfinite(*v)) {
        prev.reset();
        continue;
      }
      const int j = row_of(*v);
      const int a = prev ? std::min(*prev, j) : j;
      const int b = prev ? std::max(*prev, j) : j;
      for (int r = std::max(a, 0); r <= std::min(b, height - 1); ++r)
        out.cells[out.grid.index(i, r)] |= static_cast<std::uint8_t>(curve);
      prev = j;
    }
  }
  return out;
}

}  // namespace clm
