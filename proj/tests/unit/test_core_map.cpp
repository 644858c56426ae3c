#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "clm/core_map.hpp"
#include "oracles.hpp"

using namespace clm;

namespace {

double pdist(plane_point a, oracle::pt b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST(ParamPoint, RejectsExcludedCouplings) {
  EXPECT_THROW(param_point(2.0, 0.0), error);
  EXPECT_THROW(param_point(2.0, 0.5), error);
  EXPECT_THROW(param_point(2.0, 1.0), error);
  EXPECT_THROW(param_point(0.0, 0.2), error);
  EXPECT_THROW(param_point(-1.0, 0.2), error);
  EXPECT_THROW(param_point(std::nan(""), 0.2), error);
  EXPECT_NO_THROW(param_point(2.0, 0.25));
}

TEST(ParamPoint, StrengthClass) {
  EXPECT_EQ(param_point(2, 0.25).strength_class(), strength::small);
  EXPECT_EQ(param_point(2, -0.5).strength_class(), strength::large);
  EXPECT_EQ(param_point(2, 0.7).strength_class(), strength::other);
  EXPECT_EQ(param_point(2, 1.5).strength_class(), strength::other);
}

TEST(Logistic, HandValues) {
  EXPECT_EQ(logistic(0.0, 3.7), 0.0);
  EXPECT_DOUBLE_EQ(logistic(0.5, 4.0), 1.0);
  EXPECT_NEAR(logistic(0.3, 2.0), 0.42, 1e-15);
}

TEST(MapEval, HandValues) {
  param_point p(2.0, 0.25);
  EXPECT_EQ(map_eval(p, {0, 0}), (plane_point{0, 0}));
  auto z = map_eval(p, {0.3, 0.7});
  EXPECT_NEAR(z.x, 0.42, 1e-15);
  EXPECT_NEAR(z.y, 0.42, 1e-15);
  for (double e : {-3.0, -0.5, 0.1, 0.3, 0.75, 2.0}) {
    auto w = map_eval(param_point(2.0, e), {0.5, 0.5});
    EXPECT_DOUBLE_EQ(w.x, 0.5);
    EXPECT_DOUBLE_EQ(w.y, 0.5);
  }
}

TEST(MapEval, AgreesWithOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    plane_point z{u(rng), u(rng)};
    EXPECT_LT(pdist(map_eval(p, z), oracle::coupled_map(mu, e, {z.x, z.y})), 1e-13);
  }
}

TEST(MapEval, DiagonalInvarianceIsExact) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    const double x = u(rng);
    auto w = map_eval(p, {x, x});
    EXPECT_EQ(w.x, w.y);
    EXPECT_EQ(w.x, logistic(x, mu));
  }
}

TEST(MapEval, ReflectionEquivariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    plane_point z{u(rng), u(rng)};
    EXPECT_EQ(map_eval(p, reflect(z)), reflect(map_eval(p, z)));
  }
}

TEST(Jacobian, HandValueAndCriticalLines) {
  auto j = jacobian(param_point(3.0, 0.2), {0, 0});
  EXPECT_NEAR(j.a, 2.4, 1e-15);
  EXPECT_NEAR(j.b, 0.6, 1e-15);
  EXPECT_NEAR(j.c, 0.6, 1e-15);
  EXPECT_NEAR(j.d, 2.4, 1e-15);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    EXPECT_EQ(jacobian(p, {0.5, u(rng)}).det(), 0.0);
    EXPECT_EQ(jacobian(p, {u(rng), 0.5}).det(), 0.0);
  }
}

TEST(Jacobian, DeterminantIdentity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    plane_point z{u(rng), u(rng)};
    const double expect = (1 - 2 * e) * logistic_deriv(z.x, mu) * logistic_deriv(z.y, mu);
    EXPECT_NEAR(jacobian(p, z).det(), expect, 1e-11 * std::max(1.0, std::abs(expect)));
  }
}

TEST(Jacobian, MatchesCentralDifferencesAt1000Points) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    plane_point z{u(rng), u(rng)};
    double fd[4];
    oracle::fd_jacobian(mu, e, {z.x, z.y}, 1e-6, fd);
    auto j = jacobian(p, z);
    EXPECT_NEAR(j.a, fd[0], 1e-6);
    EXPECT_NEAR(j.b, fd[1], 1e-6);
    EXPECT_NEAR(j.c, fd[2], 1e-6);
    EXPECT_NEAR(j.d, fd[3], 1e-6);
  }
}

TEST(Eigenvalues, ClosedFormMatchesCharacteristicPolynomial) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    mat2 m{u(rng), u(rng), u(rng), u(rng)};
    for (auto l : eigenvalues(m)) {
      auto r = l * l - m.trace() * l + m.det();
      EXPECT_LT(std::abs(r), 1e-10);
    }
  }
}

TEST(FixedPoints, OriginRepellerAtMu3Eps02) {
  auto fps = fixed_points(param_point(3.0, 0.2));
  ASSERT_GE(fps.size(), 2u);
  EXPECT_EQ(fps[0].label, fixed_point_label::O);
  std::multiset<double> mods{std::abs(fps[0].eigenvalues[0]), std::abs(fps[0].eigenvalues[1])};
  EXPECT_NEAR(*mods.begin(), 1.8, 1e-14);
  EXPECT_NEAR(*mods.rbegin(), 3.0, 1e-14);
  EXPECT_EQ(fps[0].classification, stability::repeller);
}

TEST(FixedPoints, OriginSaddleBelowMu0) {
  auto fps = fixed_points(param_point(1.5, 0.2));
  EXPECT_EQ(fps[0].classification, stability::saddle);
  EXPECT_NEAR(std::abs(fps[0].eigenvalues[1]), 0.9, 1e-14);
  EXPECT_LT(1.5, *loci(0.2).mu0);
  EXPECT_NEAR(*loci(0.2).mu0, 5.0 / 3.0, 1e-15);
}

TEST(FixedPoints, PmuAttractorForLargeStrength) {
  auto fps = fixed_points(param_point(2.0, -0.5));
  EXPECT_EQ(fps[1].label, fixed_point_label::Pmu);
  EXPECT_DOUBLE_EQ(fps[1].location.x, 0.5);
  EXPECT_DOUBLE_EQ(fps[1].location.y, 0.5);
  EXPECT_EQ(fps[1].classification, stability::attractor);
  auto l = loci(-0.5);
  EXPECT_DOUBLE_EQ(*l.mu0_prime, 1.5);
  EXPECT_DOUBLE_EQ(*l.mu2, 2.5);
}

TEST(FixedPoints, AllAreFixedAndOffDiagonalPairMatchesDiscriminant) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 2000; ++i) {
    auto [mu, e] = oracle::random_params(rng, 0.3, 6.0);
    param_point p(mu, e);
    auto fps = fixed_points(p);
    for (const auto& f : fps) {
      auto w = oracle::coupled_map(mu, e, {f.location.x, f.location.y});
      EXPECT_LT(pdist(f.location, w), tol::fixed * std::max(1.0, mu)) << mu << " " << e;
    }
    const double k = 1 - 1 / (mu * (1 - 2 * e));
    const double disc = 2 * (mu - 1) * mu * k - mu * mu * k * k;
    EXPECT_EQ(fps.size(), disc >= 0 ? 4u : 2u);
  }
}

TEST(FixedPoints, PairExistsExactlyBeyondPitchforkLocus) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> es(0.02, 0.48), el(-2.0, -0.02), mu(1.01, 6.0);
  for (int i = 0; i < 500; ++i) {
    const double e = es(rng), m = mu(rng);
    const double mu0 = 1 / (1 - 2 * e);
    if (std::abs(m - mu0) < 1e-9) continue;
    EXPECT_EQ(fixed_points(param_point(m, e)).size() == 4, m > mu0) << m << " " << e;
  }
  for (int i = 0; i < 500; ++i) {
    const double e = el(rng), m = mu(rng);
    const double mu0p = (1 - 4 * e) / (1 - 2 * e);
    if (std::abs(m - mu0p) < 1e-9) continue;
    EXPECT_EQ(fixed_points(param_point(m, e)).size() == 4, m > mu0p) << m << " " << e;
  }
}

// Stability list for large strength, written from the comparisons with the loci.
TEST(FixedPoints, LargeStrengthClassificationSweep) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> es(-2.0, -0.01), mus(1.001, 6.0);
  int checked = 0;
  while (checked < 100) {
    const double e = es(rng), m = mus(rng);
    const double mu0p = (1 - 4 * e) / (1 - 2 * e), mu2 = (3 - 4 * e) / (1 - 2 * e);
    if (std::abs(m - mu0p) < 1e-6 || std::abs(m - mu2) < 1e-6 || std::abs(m - 3) < 1e-6) continue;
    auto fps = fixed_points(param_point(m, e));
    EXPECT_EQ(fps[0].classification, stability::repeller);
    stability expect = m < mu0p ? stability::saddle : m < mu2 ? stability::attractor : m < 3 ? stability::saddle : stability::repeller;
    EXPECT_EQ(fps[1].classification, expect) << m << " " << e;
    ++checked;
  }
}

TEST(FixedPoints, OriginFlipAtMu0SmallStrength) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> es(0.01, 0.49), mus(1.001, 6.0);
  int checked = 0;
  while (checked < 100) {
    const double e = es(rng), m = mus(rng);
    const double mu0 = 1 / (1 - 2 * e);
    if (std::abs(m - mu0) < 1e-6) continue;
    auto fps = fixed_points(param_point(m, e));
    EXPECT_EQ(fps[0].classification, m < mu0 ? stability::saddle : stability::repeller);
    ++checked;
  }
}

TEST(Loci, HandValues) {
  auto a = loci(0.25);
  EXPECT_DOUBLE_EQ(*a.mu0, 2.0);
  EXPECT_DOUBLE_EQ(*a.mu1, 6.0);
  EXPECT_NEAR(*a.mu_prime, 1 + std::sqrt(5.0), 1e-15);
  EXPECT_FALSE(a.mu0_prime);
  EXPECT_FALSE(a.mu2);

  auto b = loci(-0.9);
  EXPECT_NEAR(*b.mu1, 2.714, 1e-3);
  EXPECT_NEAR(*b.mu2, 2.357, 1e-3);
  EXPECT_FALSE(b.mu0);
  EXPECT_FALSE(b.mu_prime);

  auto c = loci(0.375);
  ASSERT_TRUE(c.mu_prime);
  // 1 + sqrt((3 - 3/4) / (1 - 3/4)) = 1 + sqrt(9): the curve ends at mu = 4.
  EXPECT_NEAR(*c.mu_prime, 4.0, 1e-14);
  EXPECT_FALSE(loci(0.38).mu_prime);
  EXPECT_THROW(loci(0.5), error);
}

TEST(Geometry, RaysPassThroughVertex) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    auto g = geometry(p);
    EXPECT_NEAR(g.L1.y_at(mu / 4), mu / 4, 1e-12 * std::max(1.0, std::abs(g.L1.slope)));
    EXPECT_NEAR(g.L2.y_at(mu / 4), mu / 4, 1e-12 * std::max(1.0, std::abs(g.L2.slope)));
    EXPECT_NEAR(g.L1.slope, (1 - e) / e, 1e-15 * std::abs(g.L1.slope));
    EXPECT_NEAR(g.L2.slope, e / (1 - e), 1e-15 * std::max(1.0, std::abs(g.L2.slope)));
  }
}

TEST(Cone, Examples) {
  param_point p(2.0, 0.25);
  EXPECT_EQ(cone_membership(p, {0.5, 0.5}), cone_position::vertex);
  EXPECT_EQ(cone_membership(p, {0, 0}), cone_position::interior);
  auto r = radicands(p, {0, 0});
  EXPECT_EQ(r.rx, 1.0);
  EXPECT_EQ(r.ry, 1.0);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point q(mu, e);
    if (q.strength_class() != strength::small) continue;
    EXPECT_EQ(cone_membership(q, {mu / 4 + 1e-6 + std::abs(u(rng)), u(rng)}), cone_position::outside);
  }
  // With negative coupling the image of x = 1/2 reaches right of the vertex.
  param_point large(2.7778, -0.459);
  auto w = map_eval(large, {0.5, 0.0});
  EXPECT_GT(w.x, large.mu() / 4);
  EXPECT_NE(cone_membership(large, w), cone_position::outside);
}

TEST(Cone, RaysAreImagesOfCriticalLines) {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    auto g = geometry(p);
    const double t = u(rng);
    auto a = oracle::coupled_map(mu, e, {0.5, t});
    auto b = oracle::coupled_map(mu, e, {t, 0.5});
    EXPECT_NEAR(a.y, g.L1.y_at(a.x), 1e-9 * std::max(1.0, std::abs(g.L1.slope)));
    EXPECT_TRUE(g.L1.covers_x(a.x + g.L1.direction * 1e-12));
    EXPECT_NEAR(b.y, g.L2.y_at(b.x), 1e-9 * std::max(1.0, std::abs(g.L2.slope)));
    EXPECT_TRUE(g.L2.covers_x(b.x + g.L2.direction * 1e-12));
  }
}

// Interior of the cone spanned by the two rays, decided by decomposing z - vertex
// along the ray directions, against the radicand signs.
TEST(Cone, GeometricAndRadicandTestsAgree) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 20000; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    plane_point z{u(rng), u(rng)};
    auto g = geometry(p);
    const double d1x = g.L1.direction, d1y = g.L1.direction * g.L1.slope;
    const double d2x = g.L2.direction, d2y = g.L2.direction * g.L2.slope;
    const double vx = z.x - mu / 4, vy = z.y - mu / 4;
    const double det = d1x * d2y - d2x * d1y;
    const double a = (vx * d2y - d2x * vy) / det;
    const double b = (d1x * vy - vx * d1y) / det;
    if (std::abs(a) < 1e-9 || std::abs(b) < 1e-9) continue;
    const bool geo_inside = a > 0 && b > 0;
    auto r = radicands(p, z);
    const bool rad_inside = r.rx > 0 && r.ry > 0;
    EXPECT_EQ(geo_inside, rad_inside) << mu << " " << e;
    EXPECT_EQ(cone_membership(p, z) == cone_position::interior, rad_inside);
  }
}

TEST(Preimages, OfOriginAreTheFourCorners) {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 50; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    auto pre = preimages(param_point(mu, e), {0, 0});
    ASSERT_EQ(pre.size(), 4u);
    EXPECT_EQ(pre[0], (plane_point{0, 0}));
    EXPECT_EQ(pre[1], (plane_point{0, 1}));
    EXPECT_EQ(pre[2], (plane_point{1, 0}));
    EXPECT_EQ(pre[3], (plane_point{1, 1}));
  }
}

TEST(Preimages, RoundTripSymmetryAndOutside) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  int interior = 0;
  while (interior < 5000) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    plane_point z{u(rng), u(rng)};
    if (cone_membership(p, z) != cone_position::interior) continue;
    ++interior;
    auto pre = preimages(p, z);
    ASSERT_EQ(pre.size(), 4u);
    for (auto w : pre) EXPECT_LT(pdist(z, oracle::coupled_map(mu, e, {w.x, w.y})), 1e-12);
    // symmetric about x = 1/2 and y = 1/2
    EXPECT_NEAR(pre[0].x + pre[2].x, 1.0, 1e-15);
    EXPECT_NEAR(pre[0].y + pre[1].y, 1.0, 1e-15);
    EXPECT_EQ(pre[0].y, pre[2].y);
    EXPECT_EQ(pre[0].x, pre[1].x);
  }
  param_point p(2.0, 0.25);
  EXPECT_EQ(preimages(p, {2.0 / 4 + 1, 0}).size(), 0u);
}

TEST(Preimages, BoundaryPointsGiveTwo) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 200; ++i) {
    auto [mu, e] = oracle::random_params(rng);
    param_point p(mu, e);
    auto g = geometry(p);
    const double x1 = mu / 4 + g.L1.direction * u(rng);
    const double x2 = mu / 4 + g.L2.direction * u(rng);
    EXPECT_EQ(preimages(p, {x1, g.L1.y_at(x1)}).size(), 2u);
    EXPECT_EQ(preimages(p, {x2, g.L2.y_at(x2)}).size(), 2u);
  }
  param_point p(2.0, 0.25);
  EXPECT_EQ(preimages(p, {0.5, 0.5}).size(), 1u);
}
