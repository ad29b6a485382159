#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "cvi/deform.hpp"
#include "cvi/models.hpp"

using namespace cvi;
using std::numbers::pi;

namespace {

std::vector<double> pt(const Chart& c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> p(c.n);
  for (int i = 0; i < c.n; ++i) {
    double lo = c.domain[i][0], hi = c.domain[i][1], m = c.periodic[i] ? 0.0 : 0.15 * (hi - lo);
    p[i] = std::uniform_real_distribution<double>(lo + m, hi - m)(rng);
  }
  return p;
}

Expr ex(const Chart& c, const std::string& s) { return parse_expr(s, c.symbols()); }

std::vector<Expr> exs(const Chart& c, const std::vector<std::string>& s) {
  std::vector<Expr> out;
  for (auto& x : s) out.push_back(ex(c, x));
  return out;
}

}  // namespace

TEST(Deform, ConformalDerivativeExamples) {
  Chart s4 = round_sphere(4);
  auto p = pt(s4, 1);
  EXPECT_NEAR(d_dt_invariant(Inv::J, MetricFamily::conformal(s4, "1"), p).d1, -4.0, 1e-12);
  Chart t4 = flat_torus(4);
  auto q = pt(t4, 2);
  EXPECT_NEAR(d_dt_invariant(Inv::J, MetricFamily::conformal(t4, "sin(x1)"), q).d1, std::sin(q[0]), 1e-12);
  // Y₁ is in the kernel of −Δ − 2J on S⁴
  auto y1 = sphere_harmonic(4, 1);
  EXPECT_NEAR(d_dt_invariant(Inv::Q4, MetricFamily::conformal(s4, y1), p).d1, 0.0, 1e-9);
  EXPECT_NEAR(d_dt_invariant(Inv::Sigma2, MetricFamily::conformal(s4, y1), p).d1, 0.0, 1e-10);
}

TEST(Deform, SecondOrderJet) {
  // J(e^{2tc}g) = e^{−2tc}J for constant c
  Chart s5 = round_sphere(5);
  auto d = d_dt_invariant(Inv::J, MetricFamily::conformal(s5, "0.5", 2), pt(s5, 3));
  ASSERT_TRUE(d.has_d2);
  EXPECT_NEAR(d.value, 2.5, 1e-12);
  EXPECT_NEAR(d.d1, -2.5, 1e-12);
  EXPECT_NEAR(d.d2, 2.5, 1e-11);
}

TEST(Deform, ConformalComparators) {
  Chart t5 = flat_torus(5);
  Expr u = ex(t5, "sin(x1)*cos(x2) + 0.3*cos(x3 - x5)");
  EXPECT_LT(conformal_comparator(Comparator::P, t5, u, pt(t5, 4)).residual, 1e-8);
  Chart g = generic_metric(5, 11, 0.1, 3);
  Expr v = ex(g, "0.4*sin(x1 + x2) + cos(x3)");
  for (unsigned s = 0; s < 2; ++s) {
    auto p = pt(g, 20 + s);
    for (auto w : {Comparator::P, Comparator::C, Comparator::B, Comparator::J, Comparator::R})
      EXPECT_LT(conformal_comparator(w, g, v, p).relative(), 1e-9) << static_cast<int>(w);
  }
  Chart s4 = conformal_perturb(round_sphere(4), "0.05*" + sphere_harmonic(4, 1));
  Expr y = ex(s4, "sin(th1)*cos(th2) + 0.2*cos(th3)");
  EXPECT_LT(conformal_comparator(Comparator::C, s4, y, pt(s4, 6)).relative(), 1e-9);
  EXPECT_LT(conformal_comparator(Comparator::B, s4, y, pt(s4, 7)).relative(), 1e-9);
}

TEST(Deform, MetricComparatorAndTraceRelation) {
  Chart g = generic_metric(4, 3, 0.1, 3);
  std::vector<std::string> h(16, "0");
  h[0] = "sin(x2)";
  h[1] = h[4] = "0.5*cos(x1 + x3)";
  h[10] = "1 + cos(x2)*sin(x3)";
  h[11] = h[14] = "0.2*x1*0 + sin(x3)";
  auto H = exs(g, h);
  for (unsigned s = 0; s < 3; ++s) {
    auto p = pt(g, 30 + s);
    EXPECT_LT(metric_comparator_R(g, H, p).relative(), 1e-9);
    EXPECT_LT(volume_variation_residual(g, H, p).relative(), 1e-12);
  }
  Expr u = ex(g, "cos(x1) + 0.5*sin(x2 - x3)");
  for (auto id : {Inv::J, Inv::R, Inv::Sigma2, Inv::Q4, Inv::W2})
    EXPECT_LT(relate_derivatives_residual(id, g, u, pt(g, 40)).relative(), 1e-9) << entry(id).name;
}

TEST(Deform, DiffeomorphismIdentity) {
  Chart g = generic_metric(5, 8, 0.1, 3);
  auto X = exs(g, {"sin(x2)", "cos(x1 + x3)", "0.3", "sin(x1)*cos(x2)", "0"});
  auto p = pt(g, 50);
  for (auto id : {Inv::R, Inv::Sigma2, Inv::Q4, Inv::W2, Inv::I1, Inv::K3, Inv::L2})
    EXPECT_LT(diffeo_identity_residual(id, g, X, p).relative(), 1e-8) << entry(id).name;
}

TEST(Deform, QuadOptionsDepends) {
  Chart g = generic_metric(6, 2, 0.05, 2);
  auto q = quad_options(g, {ex(g, "sin(x4)")});
  EXPECT_EQ(q.depends, (std::vector<int>{0, 1, 3}));
}

TEST(Deform, SelfAdjointness) {
  Chart g = generic_metric(4, 12, 0.1, 2);
  Expr u1 = ex(g, "sin(x1) + 0.3*cos(x2)"), u2 = ex(g, "sin(x1) + cos(x1 + x2)");
  auto q = quad_options(g, {u1, u2});
  for (auto id : {Inv::J, Inv::Sigma2, Inv::Q4, Inv::W2}) {
    auto r = self_adjointness_residual(id, g, u1, u2, q);
    EXPECT_LT(r.relative(), 1e-8) << entry(id).name << " " << r.lhs << " " << r.rhs;
  }
}

TEST(Deform, ConformalGradient) {
  Chart g = generic_metric(5, 13, 0.1, 2);
  Expr u = ex(g, "sin(x1)*cos(x2) + 0.5");
  auto q = quad_options(g, {u});
  for (auto id : {Inv::J, Inv::Sigma2, Inv::Q4, Inv::W2}) {
    auto r = conformal_gradient_residual(id, g, u, q);
    EXPECT_LT(r.relative(), 1e-8) << entry(id).name << " " << r.lhs << " " << r.rhs;
  }
  Chart h = generic_metric(7, 19, 0.1, 2);
  Expr v = ex(h, "sin(x1)*cos(x2) + 0.5");
  auto q7 = quad_options(h, {v}, Profile::Deep);
  for (auto id : {Inv::V3, Inv::Q6, Inv::I1, Inv::I2, Inv::K1, Inv::K2, Inv::K3, Inv::L1, Inv::L2, Inv::L3}) {
    auto r = conformal_gradient_residual(id, h, v, q7);
    EXPECT_LT(r.relative(), 1e-8) << entry(id).name << " " << r.lhs << " " << r.rhs;
  }
  // critical dimension: ∫Q₆ is conformally invariant on six-manifolds
  Chart k = generic_metric(6, 19, 0.1, 2);
  Expr w = ex(k, "sin(x1)*cos(x2) + 0.5");
  auto r = conformal_gradient_residual(Inv::Q6, k, w, quad_options(k, {w}, Profile::Deep));
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_LT(std::abs(r.lhs), 1e-9 * r.scale);
}

TEST(Deform, Weight4Gradients) {
  Chart g = generic_metric(5, 14, 0.1, 2);
  Expr u = ex(g, "cos(x1) + 0.4*sin(x2)");
  auto q = quad_options(g, {u});
  for (int w : {0, 1}) EXPECT_LT(weight4_gradient_residual(w, g, u, q).relative(), 1e-8) << w;
}

TEST(Deform, Weight6Gradients) {
  Chart g = generic_metric(6, 15, 0.1, 2);
  Expr u = ex(g, "cos(x1) + 0.4*sin(x1 + x2)");
  // the products in these integrands outrun the 12-node torus grid
  auto q = quad_options(g, {u}, Profile::Deep);
  for (int i = 0; i <= 6; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = weight6_gradient_residual(i, g, u, q);
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(r.relative(), 1e-8) << basis6_names()[i] << " " << r.lhs << " " << r.rhs << " (" << dt << "s)";
  }
}

TEST(Deform, VolumeNormalization) {
  Chart s4 = round_sphere(4);
  Expr u = ex(s4, "cos(th1) + 0.5*cos(th1)^2");
  QuadOptions q;
  q.symmetric = {1, 2, 3};
  auto [d1, d2] = volume_normalization_residual(s4, u, q);
  EXPECT_LT(std::abs(d1), 1e-12);
  EXPECT_LT(std::abs(d2), 1e-12);
  Chart g = generic_metric(4, 16, 0.1, 2);
  Expr v = ex(g, "sin(x1) + 0.3");
  auto r = volume_normalization_residual(g, v, quad_options(g, {v}));
  EXPECT_LT(std::abs(r.first), 1e-12);
  EXPECT_LT(std::abs(r.second), 1e-12);
  // mean-zero part integrates to zero
  Expr m = mean_zero(s4, u, q);
  EXPECT_LT(std::abs(integrate(s4, m, Profile::Standard, false).value), 1e-12);
}

TEST(Deform, SecondVariationOnSpheres) {
  QuadOptions q4;
  q4.symmetric = {1, 2, 3};
  Chart s4 = round_sphere(4);
  auto norm2 = [&](const Chart& c, const Expr& u, const QuadOptions& q) {
    Program p0(mean_zero(c, u, q), c.symbols());
    return integrate_nodes(c, q, 1, [&](std::span<const double> x, std::span<double> out) {
      double v = p0.eval(x);
      out[0] = v * v * volume_density(c, x);
    })[0];
  };
  Expr y2 = ex(s4, sphere_harmonic(4, 2)), y1 = ex(s4, sphere_harmonic(4, 1));
  auto a = second_variation_residual(Inv::J, s4, y2, q4);
  EXPECT_LT(a.relative(), 1e-8);
  EXPECT_NEAR(a.rhs, 6 * norm2(s4, y2, q4), 1e-8 * a.rhs);
  auto b = second_variation_residual(Inv::J, s4, y1, q4);
  EXPECT_LT(std::abs(b.lhs), 1e-10);
  EXPECT_LT(std::abs(b.rhs), 1e-10);
  Chart s5 = round_sphere(5);
  QuadOptions q5;
  q5.symmetric = {1, 2, 3, 4};
  Expr z2 = ex(s5, sphere_harmonic(5, 2));
  auto c = second_variation_residual(Inv::Sigma2, s5, z2, q5);
  EXPECT_LT(c.relative(), 1e-8);
  EXPECT_NEAR(c.rhs, 14 * norm2(s5, z2, q5), 1e-8 * c.rhs);
  // critical dimension and nonconstant bases are refused
  EXPECT_THROW(second_variation_residual(Inv::Q4, s4, y2, q4), DeformError);
  Chart g = generic_metric(5, 3, 0.05, 2);
  Expr w = ex(g, "sin(x1)");
  EXPECT_THROW(second_variation_residual(Inv::J, g, w, quad_options(g, {w})), DeformError);
}

TEST(Deform, CriticalPrimitive) {
  // at n = 2k, d/dε of the primitive is ∫vL at the endpoint metric
  Chart g = generic_metric(4, 17, 0.1, 2);
  Expr u = ex(g, "0.2*sin(x1)"), v = ex(g, "cos(x2) + 0.5*sin(x1 + x2)");
  auto q = quad_options(g, {u, v});
  for (auto id : {Inv::Sigma2, Inv::Q4}) {
    auto r = critical_primitive_gradient_residual(id, g, u, v, q);
    EXPECT_LT(r.relative(), 1e-8) << entry(id).name << " " << r.lhs << " " << r.rhs;
  }
  // σ₂ primitive on the flat torus vanishes identically along u
  Chart t4 = flat_torus(4);
  Expr w = ex(t4, "0.1*cos(x1)");
  double s = critical_primitive(Inv::Sigma2, t4, w, quad_options(t4, {w}));
  EXPECT_TRUE(std::isfinite(s));
}

TEST(Deform, GammaPairings) {
  Chart g = generic_metric(4, 18, 0.1, 2);
  Expr f = ex(g, "1 + 0.5*cos(x1)"), u = ex(g, "sin(x2)");
  auto X = exs(g, {"sin(x2)", "cos(x1)", "0", "0"});
  std::vector<std::string> hs(16, "0");
  hs[0] = "cos(x2)";
  hs[1] = hs[4] = "0.3*sin(x1)";
  hs[15] = "1";
  auto h = exs(g, hs);
  auto q = quad_options(g, {f, u});
  for (auto id : {Inv::R, Inv::Sigma2, Inv::Q4}) {
    auto r = gamma_pairing_residuals(id, g, f, u, X, h, q);
    EXPECT_LT(r.trace.relative(), 1e-8) << entry(id).name;
    EXPECT_LT(r.divergence.relative(), 1e-8) << entry(id).name;
    if (id == Inv::R) {
      ASSERT_TRUE(r.has_dual);
      EXPECT_LT(r.dual_R.relative(), 1e-8);
    }
  }
}

TEST(Deform, AlmostSchur) {
  QuadOptions q;
  q.symmetric = {1, 2, 3};
  auto e = almost_schur_check(round_sphere(4), 0.0, q);
  EXPECT_LE(e.lhs, 1e-10);
  EXPECT_LE(e.rhs, 1e-10);
  EXPECT_TRUE(e.pass);
  Chart pert = conformal_perturb(round_sphere(4), "0.05*" + sphere_harmonic(4, 1));
  auto s = almost_schur_check(pert, 0.0, q);
  EXPECT_TRUE(s.pass);
  EXPECT_GT(s.lhs, 0.0);
  EXPECT_LT(s.lhs, s.rhs);
  EXPECT_GT(s.ric_min, 2.0);
  EXPECT_THROW(almost_schur_check(pert, 10.0, q), DeformError);
}
