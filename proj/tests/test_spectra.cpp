#include <gtest/gtest.h>

#include <cmath>

#include "cvi/deform.hpp"
#include "cvi/models.hpp"
#include "cvi/spectra.hpp"

using namespace cvi;

TEST(Spectra, OperatorExamples) {
  auto j = einstein_operator(Inv::J, 4, 2.0);
  EXPECT_EQ(j.q, std::vector<double>{1.0});
  EXPECT_EQ(j.eval(4.0), 0.0);
  auto q4 = einstein_operator(Inv::Q4, 4, 2.0);
  for (double lam : {0.0, 1.5, 10.0}) EXPECT_NEAR(q4.eval(lam), (lam + 6) * (lam - 4), 1e-12);
  EXPECT_THROW(einstein_operator(Inv::K3, 6, 3.0), SpectraError);
  EXPECT_THROW(einstein_operator(Inv::L1, 6, 3.0), SpectraError);
  EXPECT_THROW(einstein_operator(Inv::W2, 6, 3.0), SpectraError);
  // the stability factor vanishes at λ = 2J
  for (auto id : {Inv::J, Inv::R, Inv::Sigma2, Inv::Q4, Inv::V3, Inv::Q6, Inv::I1, Inv::I2})
    EXPECT_EQ(einstein_operator(id, 6, 1.7).eval(3.4), 0.0) << entry(id).name;
}

TEST(Spectra, TableExamples) {
  auto t = sphere_spectrum_table(Inv::J, 4, 1.0, 3);
  EXPECT_EQ(t[1].eigenvalue, 0.0);
  EXPECT_DOUBLE_EQ(sphere_spectrum_table(Inv::Q4, 4, 1.0, 3)[2].eigenvalue, 96.0);
  EXPECT_NEAR(sphere_spectrum_table(Inv::Sigma2, 5, 1.0, 3)[2].eigenvalue, 14.0, 1e-12);
  // radius scaling: λ_k = k(k+n−1)/r²
  auto r2 = sphere_spectrum_table(Inv::J, 4, 2.0, 2);
  EXPECT_DOUBLE_EQ(r2[2].lambda, 2.5);
  EXPECT_DOUBLE_EQ(r2[2].eigenvalue, 2.5 - 1.0);
}

TEST(Spectra, StabilityOnUnitSpheres) {
  for (int n = 4; n <= 7; ++n) {
    for (auto id : {Inv::J, Inv::Sigma2, Inv::Q4, Inv::V3, Inv::Q6, Inv::I1, Inv::I2}) {
      auto v = stability_verdict(id, n);
      EXPECT_TRUE(v.stable) << entry(id).name << " n=" << n;
      EXPECT_EQ(v.kernel_modes, std::vector<int>{1}) << entry(id).name << " n=" << n;
      EXPECT_GT(v.min_positive_gap, 0.0);
    }
    for (auto id : {Inv::K1, Inv::K2}) {
      auto v = stability_verdict(id, n);
      EXPECT_FALSE(v.stable) << entry(id).name;
      EXPECT_TRUE(v.kernel_is_everything);
    }
  }
  // constants are reported, not judged
  EXPECT_NEAR(stability_verdict(Inv::J, 4).k0_eigenvalue, -4.0, 1e-15);
}

TEST(Spectra, ConstantsScaleWithWeight) {
  // DL(1) = −2kL, so 2J·q(0) = 2k·L at Einstein metrics
  for (int n : {5, 6, 7}) {
    double J = n / 2.0;
    std::vector<double> p(n, 1.2);
    Chart s = round_sphere(n);
    for (auto id : {Inv::Sigma2, Inv::Q4, Inv::V3, Inv::Q6, Inv::I1, Inv::I2}) {
      if (n < entry(id).min_dim) continue;
      double L = eval_invariant(id, s, p);
      double q0 = einstein_operator(id, n, J).eval_q(0.0);
      EXPECT_NEAR(2 * J * q0, 2 * entry(id).k * L, 1e-9 * std::max(1.0, std::abs(L))) << entry(id).name << " n=" << n;
    }
  }
}

TEST(Spectra, KMaxDoesNotChangeVerdicts) {
  for (auto id : {Inv::Q4, Inv::Q6, Inv::I1})
    for (int n : {5, 6})
      EXPECT_EQ(stability_verdict(id, n, 1.0, 5).stable, stability_verdict(id, n, 1.0, 200).stable);
}

TEST(Spectra, EinsteinGeneric) {
  EXPECT_TRUE(einstein_generic_verdict(Inv::Q4, 4, 1.0).stable);
  EXPECT_FALSE(einstein_generic_verdict(Inv::K1, 6, 1.0).stable);
  EXPECT_TRUE(einstein_generic_verdict(Inv::K2, 6, 1.0).indeterminate);
}

TEST(Spectra, RootsAndSigns) {
  auto r = real_roots({6.0, -5.0, 1.0});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r[0], 2.0, 1e-15);
  EXPECT_NEAR(r[1], 3.0, 1e-15);
  EXPECT_TRUE(real_roots({1.0, 0.0, 1.0}).empty());
  EXPECT_TRUE(nonnegative_from({6.0, -5.0, 1.0}, 3.0, false));
  EXPECT_FALSE(nonnegative_from({6.0, -5.0, 1.0}, 3.0, true));
  EXPECT_FALSE(nonnegative_from({6.0, -5.0, 1.0}, 2.5, false));
  EXPECT_TRUE(nonnegative_from({4.0, -4.0, 1.0}, 0.0, false));
}

TEST(Spectra, CatalogConsistency) {
  // Q_{2k} on the unit sphere from the GJMS constant term
  struct Case {
    int k, n;
  };
  for (auto c : {Case{2, 5}, Case{2, 6}, Case{3, 7}}) {
    auto P = gjms_operator(c.k, c.n, c.n / 2.0);
    double via_p = 2.0 / (c.n - 2 * c.k) * P.eval(0.0);
    std::vector<double> pt(c.n, 1.1);
    Inv id = c.k == 2 ? Inv::Q4 : Inv::Q6;
    double direct = eval_invariant(id, round_sphere(c.n), pt);
    EXPECT_NEAR(direct, via_p, 1e-9 * std::abs(via_p)) << c.k << " " << c.n;
    EXPECT_NEAR(sphere_q_curvature(c.k, c.n), via_p, 1e-12 * std::abs(via_p));
  }
  std::vector<double> p4(4, 1.1), p6(6, 1.1);
  EXPECT_NEAR(eval_invariant(Inv::Q4, round_sphere(4), p4), 4 * 2 * 6 / 8.0, 1e-9);
  EXPECT_NEAR(eval_invariant(Inv::Q6, round_sphere(6), p6), 6.0 * 4 * 8 * 2 * 10 / 32, 1e-9);
  EXPECT_NEAR(sphere_q_curvature(2, 4), 6.0, 1e-14);
  EXPECT_NEAR(sphere_q_curvature(3, 6), 120.0, 1e-12);
}

TEST(Spectra, CrossCheckAgainstJets) {
  // DL(Y_k) computed through the conformal family against the closed-form eigenvalue
  struct Case {
    Inv id;
    int n;
  };
  std::vector<Case> cases{{Inv::J, 4},  {Inv::R, 5},  {Inv::Sigma2, 5}, {Inv::Q4, 4}, {Inv::Q4, 6},
                          {Inv::V3, 6}, {Inv::Q6, 6}, {Inv::I1, 5},     {Inv::I2, 6}, {Inv::K1, 5},
                          {Inv::K2, 6}};
  for (const auto& c : cases) {
    Chart s = round_sphere(c.n);
    std::vector<double> p(c.n, 0.9);
    auto table = sphere_spectrum_table(c.id, c.n, 1.0, 2);
    for (int k : {1, 2}) {
      Expr y = parse_expr(sphere_harmonic(c.n, k), s.symbols());
      double yv = eval_jet(y, s.coords, p, 0).value();
      double got = d_dt_invariant(c.id, MetricFamily::conformal(s, y), p).d1;
      double want = table[k].eigenvalue * yv;
      EXPECT_NEAR(got, want, 1e-7 * std::max(1.0, std::abs(want))) << entry(c.id).name << " n=" << c.n << " k=" << k;
    }
  }
}

TEST(Cones, Examples) {
  auto a = cone_classify(1, 0, 4);
  EXPECT_TRUE(a.in_SV && a.in_V && a.in_E);
  auto b = cone_classify(0, 1, 4);
  EXPECT_TRUE(b.in_E && b.in_V && b.in_SV);
  const int n = 5;
  auto c = cone_classify(1, -(n * n + 2.0 * n - 4) / (n - 1), n);
  EXPECT_TRUE(c.in_V);
  EXPECT_FALSE(c.in_SV);
  EXPECT_NEAR(c.witness_SV, -2.0 * n, 1e-12);
  EXPECT_TRUE(c.routes_agree);

  auto d = det_gradient_membership(1, 0);
  EXPECT_TRUE(d.in_SV && d.gamma_SV && d.gamma_agree);
  auto e = det_gradient_membership(1, -0.5);
  EXPECT_TRUE(e.in_V && e.in_SV && e.gamma_agree);
  auto f = det_gradient_membership(0, 1);
  EXPECT_DOUBLE_EQ(f.alpha, 1.0);
  EXPECT_DOUBLE_EQ(f.beta, -4.0);
  EXPECT_TRUE(f.in_V && f.gamma_V && f.gamma_agree);
}

TEST(Cones, GridContainmentAndRoutes) {
  int strict_sv = 0, strict_v = 0, sphere_mismatch = 0;
  for (int n : {4, 5, 6})
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j) {
        double a = (-30 + 3 * i) / 10.0, b = (-30 + 3 * j) / 10.0;
        if (i == 10 && j == 10) continue;  // the zero operator is outside every cone's semantics
        auto v = cone_classify(a, b, n);
        if (v.in_SV) EXPECT_TRUE(v.in_V) << a << " " << b;
        if (v.in_V && !(a == 0 && b == 0)) EXPECT_TRUE(v.in_E) << a << " " << b;
        strict_sv += v.in_V && !v.in_SV;
        strict_v += v.in_E && !v.in_V;
        EXPECT_TRUE(v.routes_agree) << a << " " << b << " n=" << n;
        // on the round sphere the first nonzero test eigenvalue is λ₂, so that route only sees a larger set
        if (v.in_V) EXPECT_TRUE(v.sphere_route_V) << a << " " << b;
        sphere_mismatch += v.sphere_route_V != v.in_V;
      }
  EXPECT_GT(strict_sv, 0);
  EXPECT_GT(strict_v, 0);
  EXPECT_GT(sphere_mismatch, 0);
}

TEST(Cones, DetGradientGrid) {
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) {
      auto v = det_gradient_membership((-30 + 3 * i) / 10.0, (-30 + 3 * j) / 10.0);
      EXPECT_TRUE(v.gamma_agree) << v.gamma2 << " " << v.gamma3;
    }
}
