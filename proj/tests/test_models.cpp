#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "cvi/catalog.hpp"
#include "cvi/models.hpp"

using namespace cvi;

TEST(Models, Spheres) {
  std::vector<double> p{0.7, 1.3, 2.0, 0.5};
  EXPECT_NEAR(curvature_frame(round_sphere(4), p, 0).J, 2.0, 1e-12);
  EXPECT_NEAR(curvature_frame(round_sphere(4, 2.0), p, 0).R, 3.0, 1e-12);
  for (int n = 2; n <= 7; ++n) {
    std::vector<double> q(n, 1.2);
    EXPECT_NEAR(curvature_frame(round_sphere(n), q, 0).R, n * (n - 1.0), 1e-10) << n;
  }
  EXPECT_THROW(round_sphere(8), ModelError);
  EXPECT_THROW(round_sphere(3, -1.0), ModelError);
}

TEST(Models, Products) {
  Chart a = product(round_sphere(2), round_sphere(2));
  std::vector<double> p{0.9, 1.0, 2.1, 3.0};
  auto f = curvature_frame(a, p, 0);
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(f.ricci[i], f.g[i], 1e-12);
  EXPECT_EQ(a.coords[2], "th1b");
  Chart b = product(round_sphere(2), round_sphere(2, 2.0));
  EXPECT_NEAR(curvature_frame(b, p, 0).R, 2.5, 1e-12);
  Chart c = product(flat_torus(2), round_sphere(2));
  EXPECT_NEAR(curvature_frame(c, p, 0).R, 2.0, 1e-12);
  EXPECT_THROW(product(flat_torus(5), flat_torus(4)), ModelError);
}

TEST(Models, PerturbationsArePositive) {
  Chart g = generic_metric(5, 7, 0.05);
  EXPECT_NO_THROW(check_positive_on_nodes(g));
  std::vector<double> p1(5, 0.3), p2(5, 1.9);
  EXPECT_GT(std::abs(curvature_frame(g, p1, 0).R - curvature_frame(g, p2, 0).R), 1e-6);
  EXPECT_THROW(generic_metric(4, 1, 0.2), ModelError);

  Chart s4 = round_sphere(4);
  Chart same = conformal_perturb(s4, "0");
  for (int i = 0; i < 16; ++i) EXPECT_TRUE(structurally_equal(same.g[i], s4.g[i]));
  Chart pert = conformal_perturb(s4, "0.05*" + sphere_harmonic(4, 1));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> th(0.1, 3.04), ph(0.0, 6.28);
  for (int s = 0; s < 5; ++s) {
    std::vector<double> q{th(rng), th(rng), th(rng), ph(rng)};
    auto f = curvature_frame(pert, q, 0);
    Eigen::Map<Eigen::Matrix4d> Ric(f.ricci.v.data()), G(f.g.v.data());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix4d> es(Ric, G);
    EXPECT_GT(es.eigenvalues().minCoeff(), 2.0);
  }
}

TEST(Models, SphereHarmonicsAreEigenfunctions) {
  // −Δ Y_d = d(d+n−1) Y_d
  for (int n : {4, 6})
    for (int d = 1; d <= 3; ++d) {
      Chart s = round_sphere(n);
      Expr y = parse_expr(sphere_harmonic(n, d), s.symbols());
      std::vector<double> p(n, 0.9);
      JetEvaluator ev(s, ActiveSet::from_exprs(s, {y}), 2, 0);
      ev.set_point(p);
      JetFrame F(ev.metric(), ev.active());
      Jet yj = ev.eval(y);
      EXPECT_NEAR(-F.laplacian(yj).value(), d * (d + n - 1.0) * yj.value(), 1e-12) << n << " " << d;
    }
}

TEST(Page, Parameters) {
  auto pp = page_parameters();
  EXPECT_LT(pp.quartic_residual, 1e-12);
  EXPECT_NEAR(pp.nu, 0.2817, 1e-4);
  EXPECT_NEAR(pp.c, 1.0 / (3 + 6 * pp.nu * pp.nu - std::pow(pp.nu, 4)), 1e-15);
  const std::vector<std::string> rs{"r", "nu", "c"};
  for (double r : {0.03, 0.1, 0.25}) {
    std::vector<double> v{r, pp.nu, pp.c};
    double a2 = Program(parse_expr(pp.alpha2, rs), rs).eval(v);
    double b2 = Program(parse_expr(pp.beta2, rs), rs).eval(v);
    double g2 = Program(parse_expr(pp.gamma2, rs), rs).eval(v);
    EXPECT_NEAR(std::sqrt(a2 * b2), pp.c, 1e-12 * pp.c);
    EXPECT_NEAR(g2, pp.c * (1 - r * r), 1e-15);
  }
}

TEST(Page, EinsteinAndWeylRelations) {
  Chart c = page_metric();
  EXPECT_TRUE(c.pointwise_only);
  std::mt19937_64 rng(8);
  std::vector<double> w2;
  for (int s = 0; s < 10; ++s) {
    std::vector<double> p(4);
    for (int i = 0; i < 4; ++i) {
      double lo = c.domain[i][0], hi = c.domain[i][1];
      p[i] = std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    auto k = page_frame_check(p);
    EXPECT_LT(k.ricci_residual, 1e-6);
    double sc = std::abs(k.W0202);
    EXPECT_NEAR(k.W0303, k.W0202, 1e-6 * sc);
    EXPECT_NEAR(k.W1212, k.W0202, 1e-6 * sc);
    EXPECT_NEAR(k.W1313, k.W0202, 1e-6 * sc);
    EXPECT_NEAR(k.W0231, k.W0312, 1e-6 * std::abs(k.W0231));
    // the printed closed forms match after the corrections recorded as discrepancies
    EXPECT_NEAR(k.W0101, k.W0101_alt, 1e-5 * std::abs(k.W0101));
    EXPECT_NEAR(k.W0123, k.W0123_alt, 1e-5 * std::abs(k.W0123));
    w2.push_back(k.W2);
  }
  double mean = 0.0, var = 0.0;
  for (double x : w2) mean += x / w2.size();
  for (double x : w2) var += (x - mean) * (x - mean) / (w2.size() - 1);
  EXPECT_GT(std::sqrt(var), 1e-3 * mean);
}

TEST(Page, ProductWithSphereIsEinstein) {
  Chart c = page_times_sphere();
  auto pp = page_parameters();
  std::vector<double> p{0.1, 1.0, 1.2, 2.0, 0.8, 1.0};
  auto f = curvature_frame(c, p, 0);
  double lam = 3 * (1 + pp.nu * pp.nu);
  for (int i = 0; i < 36; ++i) EXPECT_NEAR(f.ricci[i], lam * f.g[i], 1e-9 * (1 + std::abs(f.g[i])));
}
