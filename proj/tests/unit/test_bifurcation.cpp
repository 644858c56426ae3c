#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "clm/bifurcation.hpp"
#include "oracles.hpp"

using namespace clm;

namespace {

// Eigenvalue moduli in decreasing order.
std::pair<double, double> moduli(const eigen_pair& ev) {
  const double a = std::abs(ev[0]), b = std::abs(ev[1]);
  return {std::max(a, b), std::min(a, b)};
}

}  // namespace

TEST(FindPeriodicOrbit, OriginEigenvalues) {
  param_point p(3.0, 0.2);
  auto o = find_periodic_orbit(p, 1, {0.01, -0.02});
  EXPECT_LT(norm(o.points[0]), 1e-12);
  EXPECT_LE(o.residual, tol::fixed);
  auto [big, small] = moduli(o.cycle_eigenvalues);
  EXPECT_NEAR(big, 3.0, 1e-9);
  EXPECT_NEAR(small, 0.6 * 3.0, 1e-9);
}

TEST(FindPeriodicOrbit, PmuEigenvalues) {
  for (auto [mu, e] : {std::pair{2.5, 0.2}, {3.5, -0.4}, {1.8, 0.1}}) {
    param_point p(mu, e);
    const double x = (mu - 1) / mu;
    auto o = find_periodic_orbit(p, 1, {x + 0.01, x - 0.01});
    EXPECT_NEAR(o.points[0].x, x, 1e-12);
    EXPECT_NEAR(o.points[0].y, x, 1e-12);
    const double a = 2 - mu, b = (1 - 2 * e) * (2 - mu);
    auto [big, small] = moduli(o.cycle_eigenvalues);
    EXPECT_NEAR(big, std::max(std::abs(a), std::abs(b)), 1e-9);
    EXPECT_NEAR(small, std::min(std::abs(a), std::abs(b)), 1e-9);
  }
}

TEST(FindPeriodicOrbit, AttractingPeriodTwoAtLargeStrength) {
  param_point p(2.37, -0.9);
  auto guess = seed_periodic_guess(p, 2, {0.3, 0.2});
  auto o = find_periodic_orbit(p, 2, guess);
  ASSERT_EQ(o.points.size(), 2u);
  EXPECT_GT(dist(o.points[0], o.points[1]), 1e-3);
  EXPECT_LT(std::abs(o.cycle_eigenvalues[0]), 1.0);
  EXPECT_LT(std::abs(o.cycle_eigenvalues[1]), 1.0);
  // The two points are exchanged by the reflection.
  EXPECT_NEAR(o.points[1].x, o.points[0].y, 1e-10);
}

TEST(FindPeriodicOrbit, Errors) {
  param_point p(3.0, 0.2);
  try {
    find_periodic_orbit(p, 2, {0.001, 0.001});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), error_code::converged_to_lower_period);
  }
  try {
    find_periodic_orbit(p, 1, {40.0, -30.0}, {3});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), error_code::no_convergence);
    EXPECT_NE(std::string(e.what()).find("last_residual"), std::string::npos);
  }
  EXPECT_THROW(find_periodic_orbit(p, 0, {0.1, 0.1}), error);
}

// Residual contract and eigenvalues against finite-difference products.
TEST(FindPeriodicOrbit, ResidualAndEigenvaluesAgainstFiniteDifferences) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 40; ++trial) {
    auto [mu, e] = oracle::random_params(rng, 2.0, 4.0);
    param_point p(mu, e);
    const int period = 1 + trial % 3;
    periodic_orbit o;
    try {
      o = find_periodic_orbit(p, period, {u(rng), u(rng)});
    } catch (const error&) {
      continue;
    }
    ++checked;
    EXPECT_LE(o.residual, tol::fixed);
    for (int k = 0; k < period; ++k) {
      auto w = oracle::coupled_map(mu, e, {o.points[k].x, o.points[k].y});
      EXPECT_LE(std::hypot(w.x - o.points[(k + 1) % period].x, w.y - o.points[(k + 1) % period].y),
                10 * tol::fixed * std::max(1.0, norm(o.points[k])));
    }
    double m[4];
    oracle::fd_cycle_jacobian(mu, e, {o.points[0].x, o.points[0].y}, period, 1e-6, m);
    auto [a, b] = oracle::eig2(m);
    auto [big, small] = moduli(o.cycle_eigenvalues);
    const double scale = std::max(1.0, big);
    EXPECT_NEAR(big, std::max(std::abs(a), std::abs(b)), 1e-5 * scale) << mu << " " << e << " " << period;
    EXPECT_NEAR(small, std::min(std::abs(a), std::abs(b)), 1e-5 * scale) << mu << " " << e << " " << period;
  }
  EXPECT_GE(checked, 20);
}

TEST(HopfBracket, SmallStrength) {
  const auto t0 = std::chrono::steady_clock::now();
  auto guess = seed_periodic_guess(param_point(4.0, 0.14), 2, {0.3, 0.2});
  auto h = hopf_bracket(0.14, 2, 4.0, 4.01, 1e-5, guess);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GE(h.mu_lo, 4.0041);
  EXPECT_LE(h.mu_hi, 4.0042);
  EXPECT_LE(h.mu_hi - h.mu_lo, 1e-5);
  EXPECT_TRUE(h.refined);
  ASSERT_TRUE(h.orbit_at_lo.complex_modulus());
  EXPECT_LT(h.modulus_lo, 1.0);
  EXPECT_TRUE(h.orbit_lost_at_hi || (h.modulus_hi && *h.modulus_hi > 1.0));
  EXPECT_LE(h.orbit_at_lo.residual, tol::fixed);
  EXPECT_LT(secs, 60.0);
}

TEST(HopfBracket, LargeStrength) {
  auto guess = seed_periodic_guess(param_point(2.4, -0.9), 2, {0.3, 0.2});
  auto h = hopf_bracket(-0.9, 2, 2.4, 2.6, 1e-3, guess);
  EXPECT_GE(h.mu_lo, 2.525 - 1e-9);
  EXPECT_LT(h.modulus_lo, 1.0);
  // The complex pair is inside the unit circle at 2.525 itself, so the
  // crossing lies strictly above it.
  auto at = find_periodic_orbit(param_point(2.525, -0.9), 2, h.orbit_at_lo.points[0]);
  ASSERT_TRUE(at.complex_modulus());
  EXPECT_LT(*at.complex_modulus(), 1.0);
  EXPECT_LT(h.mu_hi, 2.53);
  EXPECT_LE(h.mu_hi - h.mu_lo, 1e-3);
  ASSERT_TRUE(h.modulus_hi);
  EXPECT_GT(*h.modulus_hi, 1.0);
}

TEST(HopfBracket, DegenerateWidthReturnsRange) {
  auto guess = seed_periodic_guess(param_point(4.0, 0.14), 2, {0.3, 0.2});
  auto h = hopf_bracket(0.14, 2, 4.0, 4.01, 0.5, guess);
  EXPECT_FALSE(h.refined);
  EXPECT_EQ(h.mu_lo, 4.0);
  EXPECT_EQ(h.mu_hi, 4.01);
  EXPECT_EQ(h.bisection_steps, 0);
}

TEST(HopfBracket, Errors) {
  // P_mu has real eigenvalues throughout.
  const double e = 0.2;
  const double x = 0.5;
  try {
    hopf_bracket(e, 1, 1.8, 2.6, 1e-3, {x, x});
    FAIL();
  } catch (const error& err) {
    EXPECT_EQ(err.code(), error_code::no_complex_pair);
  }
  try {
    hopf_bracket(0.14, 2, 4.0, 4.01, 1e-5, {1e200, 1e200});
    FAIL();
  } catch (const error& err) {
    EXPECT_EQ(err.code(), error_code::orbit_lost);
  }
  EXPECT_THROW(hopf_bracket(0.14, 2, 4.01, 4.0, 1e-5, {0.3, 0.2}), error);
}

// Adjacent continuation samples differ by O(dmu): compare with the implicit
// derivative dz/dmu = -(DF^p - I)^-1 dF^p/dmu, estimated by finite differences.
TEST(HopfBracket, ContinuationConsistency) {
  auto guess = seed_periodic_guess(param_point(4.0, 0.14), 2, {0.3, 0.2});
  auto h = hopf_bracket(0.14, 2, 4.0, 4.01, 1e-5, guess);
  ASSERT_GT(h.continuation.size(), 10u);
  for (std::size_t k = 1; k < h.continuation.size(); ++k) {
    const auto& a = h.continuation[k - 1];
    const auto& b = h.continuation[k];
    const double dmu = b.mu - a.mu;
    ASSERT_GT(dmu, 0.0);
    const auto z = a.orbit.points[0];
    double m[4];
    oracle::fd_cycle_jacobian(a.mu, 0.14, {z.x, z.y}, 2, 1e-6, m);
    const double dh = 1e-6;
    auto fp = oracle::coupled_map(a.mu + dh, 0.14, oracle::coupled_map(a.mu + dh, 0.14, {z.x, z.y}));
    auto fm = oracle::coupled_map(a.mu - dh, 0.14, oracle::coupled_map(a.mu - dh, 0.14, {z.x, z.y}));
    const double gx = (fp.x - fm.x) / (2 * dh), gy = (fp.y - fm.y) / (2 * dh);
    const double ja = m[0] - 1, jb = m[1], jc = m[2], jd = m[3] - 1, det = ja * jd - jb * jc;
    const double vx = -(jd * gx - jb * gy) / det, vy = -(-jc * gx + ja * gy) / det;
    EXPECT_LT(dist(b.orbit.points[0], z), 10 * dmu * std::hypot(vx, vy) + 1e-9) << a.mu;
  }
}

TEST(HopfBracket, ScanAndCsv) {
  auto g1 = seed_periodic_guess(param_point(4.0, 0.14), 2, {0.3, 0.2});
  auto g2 = seed_periodic_guess(param_point(2.4, -0.9), 2, {0.3, 0.2});
  exec_options ex;
  ex.threads = 2;
  auto out = hopf_scan({{0.14, 2, 4.0, 4.01, 1e-5, g1}, {-0.9, 2, 2.4, 2.6, 1e-3, g2}, {0.14, 2, 4.0, 4.01, 1e-5, {1e200, 1e200}}}, {}, ex);
  ASSERT_EQ(out.size(), 3u);
  ASSERT_TRUE(out[0].bracket);
  ASSERT_TRUE(out[1].bracket);
  EXPECT_EQ(out[0].bracket->mu_lo, hopf_bracket(0.14, 2, 4.0, 4.01, 1e-5, g1).mu_lo);
  ASSERT_TRUE(out[2].failure);
  EXPECT_EQ(*out[2].failure, error_code::orbit_lost);

  const auto csv = continuation_csv(out[0].bracket->continuation);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "mu,x0,y0,x1,y1,re1,im1,re2,im2,mod1,mod2");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), out[0].bracket->continuation.size() + 1);
}

TEST(Pitchfork, SmallStrengthAtMu0) {
  auto r = pitchfork_check(0.2);
  EXPECT_NEAR(r.locus, 5.0 / 3.0, 1e-14);
  EXPECT_TRUE(r.from_origin);
  EXPECT_TRUE(r.flip);
  EXPECT_EQ(r.existing_side, 1);
  EXPECT_LE(std::abs(r.discriminant_at_locus), 1e-8);
  EXPECT_NEAR(r.scaling_exponent, 0.5, 0.1);
  EXPECT_TRUE(r.passed());
}

TEST(Pitchfork, LargeStrengthAtMu0Prime) {
  auto r = pitchfork_check(-0.5);
  EXPECT_NEAR(r.locus, 1.5, 1e-14);
  EXPECT_FALSE(r.from_origin);
  EXPECT_TRUE(r.passed());
  // Off-diagonal points collapse onto P_mu.
  for (const auto& s : r.samples)
    if (s.exists && std::abs(s.offset) < 1e-6) EXPECT_LT(*s.distance, 1e-2);
}

TEST(Pitchfork, SweepOverEpsilon) {
  for (double e : {0.05, 0.1, 0.3, 0.45, -0.1, -0.3, -0.7, -1.0, -1.4}) {
    auto r = pitchfork_check(e);
    EXPECT_TRUE(r.passed()) << e << " exponent " << r.scaling_exponent;
  }
  EXPECT_THROW(pitchfork_check(0.7), error);
  EXPECT_THROW(pitchfork_check(0.2, 2), error);
}

TEST(Loci, SmallStrengthDiagram) {
  auto d = loci_diagram(0.0, 0.5, 1.0, 20.0, 400, 400);
  ASSERT_FALSE(d.empty());
  EXPECT_GT(d.count(locus_curve::mu0), 0u);
  EXPECT_GT(d.count(locus_curve::mu1), 0u);
  EXPECT_GT(d.count(locus_curve::mu_prime), 0u);
  EXPECT_EQ(d.count(locus_curve::mu0_prime), 0u);
  EXPECT_EQ(d.count(locus_curve::mu2), 0u);
  // mu' ends at eps = 3/8.
  for (int i = 0; i < 400; ++i)
    for (int j = 0; j < 400; ++j)
      if (d.has(i, j, locus_curve::mu_prime)) EXPECT_LE(d.grid.cell_center(i, j).x, 0.375 + d.grid.cell_width());
}

TEST(Loci, LargeStrengthOrdering) {
  for (int i = 1; i < 1000; ++i) {
    const double e = -0.55 * i / 1000.0;
    auto v = loci(e);
    ASSERT_TRUE(v.mu0_prime && v.mu2 && v.mu1);
    EXPECT_LT(*v.mu0_prime, *v.mu2);
    EXPECT_LT(*v.mu2, *v.mu1);
    EXPECT_NEAR(*v.mu0_prime, (1 - 4 * e) / (1 - 2 * e), 1e-14);
  }
  auto d = loci_diagram(-0.55, 0.0, 0.0, 6.0, 300, 300);
  EXPECT_GT(d.count(locus_curve::mu0_prime), 0u);
  EXPECT_GT(d.count(locus_curve::mu2), 0u);
  EXPECT_GT(d.count(locus_curve::mu1), 0u);
  EXPECT_EQ(d.count(locus_curve::mu0), 0u);
  // Per column, mu0' sits below mu2, which sits below mu1.
  for (int i = 0; i < 300; ++i) {
    int r0 = -1, r2 = -1, r1 = -1;
    for (int j = 0; j < 300; ++j) {
      if (d.has(i, j, locus_curve::mu0_prime) && r0 < 0) r0 = j;
      if (d.has(i, j, locus_curve::mu2) && r2 < 0) r2 = j;
      if (d.has(i, j, locus_curve::mu1) && r1 < 0) r1 = j;
    }
    if (r0 >= 0 && r2 >= 0) EXPECT_LE(r0, r2);
    if (r2 >= 0 && r1 >= 0) EXPECT_LE(r2, r1);
  }
}

TEST(Loci, EmptyRanges) {
  EXPECT_TRUE(loci_diagram(0.3, 0.3, 1.0, 5.0, 10, 10).empty());
  EXPECT_TRUE(loci_diagram(0.1, 0.3, 5.0, 1.0, 10, 10).empty());
}
