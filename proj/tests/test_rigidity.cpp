#include <gtest/gtest.h>

#include <cmath>

#include "cvi/rigidity.hpp"
#include "oracles.hpp"

using namespace cvi;

namespace {

std::vector<int> kv(int n, std::initializer_list<int> head) {
  std::vector<int> v(n, 0);
  int i = 0;
  for (int x : head) v[i++] = x;
  return v;
}

FourierField block_mode(int n, std::vector<int> k, int a, int b) {
  FourierField h = FourierField::sym2(n);
  std::vector<double> amp(n * n, 0.0);
  amp[a * n + b] = amp[b * n + a] = 1.0;
  h.add_cos(std::move(k), amp);
  return h;
}

// u⊗v + v⊗u with u, v ⊥ k and u ⊥ v: transverse and trace-free
FourierField tt_from(int n, std::vector<int> k, std::vector<double> u, std::vector<double> v, bool sine = false) {
  FourierField h = FourierField::sym2(n);
  std::vector<double> amp(n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) amp[i * n + j] = u[i] * v[j] + v[i] * u[j];
  if (sine)
    h.add_sin(std::move(k), amp);
  else
    h.add_cos(std::move(k), amp);
  return h;
}

FourierField e_of(int n, std::vector<int> k, double a = 1.0) {
  FourierField u = FourierField::scalar(n);
  u.add_cos(std::move(k), {a});
  return e_map(u, n);
}

}  // namespace

TEST(Rigidity, ParallelTensorsGiveZero) {
  FourierField h = FourierField::sym2(4);
  std::vector<double> a(16, 0.0);
  a[0] = 0.4;
  a[1] = a[4] = 0.3;
  a[15] = -0.2;
  h.add_cos({0, 0, 0, 0}, a);
  EXPECT_NEAR(d2_flat_form(Inv::R, 4, h), 0.0, 1e-12);
  EXPECT_NEAR(d2_flat_form(Inv::Q4, 4, h), 0.0, 1e-12);
  auto s = singular_identity_check_R(4, h);
  EXPECT_NEAR(s.lhs, 0.0, 1e-12);
  EXPECT_NEAR(s.dgamma, 0.0, 1e-12);
  EXPECT_NEAR(s.trace_term, 0.0, 1e-12);
}

TEST(Rigidity, RejectsNonDivergenceFree) {
  // h_01 = cos(x0) has δh ≠ 0
  EXPECT_THROW(d2_flat_form(Inv::R, 4, block_mode(4, kv(4, {1}), 0, 1)), RigidityError);
}

TEST(Rigidity, ScalarCurvatureAgainstFiniteDifferences) {
  // TT mode h_23 = cos(x0): second t-difference of R(g+th) from the plain finite-difference oracle
  const int n = 4;
  FourierField h = block_mode(n, kv(n, {1}), 2, 3);
  double jets = d2_flat_form(Inv::R, n, h);
  const double tau = 2e-2, two_pi = 2 * M_PI;
  double fd = 0.0;
  const int m = 12;
  for (int i = 0; i < m; ++i) {
    double x0 = two_pi * i / m;
    auto R_at = [&](double t) {
      oracle::MetricFn g = [&](const std::vector<double>& x) {
        oracle::Mat a(n, std::vector<double>(n, 0.0));
        for (int d = 0; d < n; ++d) a[d][d] = 1.0;
        a[2][3] = a[3][2] = t * std::cos(x[0]);
        return a;
      };
      return oracle::curvature_fd(g, {x0, 0.1, 0.2, 0.3}).scalar;
    };
    // second difference, one Richardson step to cancel the τ² error
    auto d2 = [&](double s) { return (R_at(s) - 2 * R_at(0.0) + R_at(-s)) / (s * s); };
    fd += (4 * d2(tau / 2) - d2(tau)) / 3 * (two_pi / m);
  }
  fd *= std::pow(two_pi, n - 1);
  EXPECT_NEAR(jets, fd, 1e-4 * std::abs(fd));
  // −½∫|∇h|² by hand
  EXPECT_NEAR(jets, -0.5 * sobolev_norm2(h, 1), 1e-10 * std::abs(jets));
}

TEST(Rigidity, FitMatchesHandComputedForms) {
  // R: A = B = −½. Q₄: A = −1/(n−2)², A/(n−1)+B = −(n+2)/(4(n−1)²). σ₂: A = −1/(4(n−2)²), A/(n−1)+B = 0.
  auto r = fit_AB(Inv::R, 4);
  EXPECT_NEAR(r.A, -0.5, 1e-9);
  EXPECT_NEAR(r.B, -0.5, 1e-9);
  EXPECT_NEAR(r.C, 0.5, 1e-9);
  EXPECT_TRUE(r.A_negative && r.trace_combo_negative && r.infinitesimally_rigid);
  EXPECT_LE(r.fit_residual, 1e-6);
  EXPECT_GE(r.distinct_frequencies, 4);
  EXPECT_NEAR(r.linear_c, 1.0, 1e-9);

  for (int n : {4, 5}) {
    auto q = fit_AB(Inv::Q4, n);
    double N = n;
    EXPECT_NEAR(q.A, -1.0 / ((N - 2) * (N - 2)), 1e-9) << n;
    EXPECT_NEAR(q.trace_combo, -(N + 2) / (4 * (N - 1) * (N - 1)), 1e-9) << n;
    EXPECT_TRUE(q.infinitesimally_rigid);
    EXPECT_GT(q.C, 0.0);
    EXPECT_NEAR(q.C, std::min(-q.A, -q.A - (N - 1) * q.B), 1e-15);
    EXPECT_LE(q.fit_residual, 1e-6);
  }
  auto q4 = fit_AB(Inv::Q4, 4);
  EXPECT_NEAR(q4.C, 0.25, 1e-9);

  auto s = fit_AB(Inv::Sigma2, 5);
  EXPECT_NEAR(s.A, -1.0 / 36, 1e-10);
  EXPECT_NEAR(s.trace_combo, 0.0, 1e-10);
  EXPECT_TRUE(s.A_negative);
  EXPECT_FALSE(s.infinitesimally_rigid);
  EXPECT_EQ(s.C, 0.0);
  EXPECT_NEAR(s.linear_c, 0.0, 1e-12);
}

TEST(Rigidity, FlatSpectrumBoundOnHeldOutProbes) {
  const int n = 4;
  std::vector<FourierField> held{
      tt_from(n, kv(n, {1, 1, 1}), {1, -1, 0, 0}, {1, 1, -2, 0}),
      tt_from(n, kv(n, {0, 1, 2}), {1, 0, 0, 0}, {0, 0, 0, 1}, true) + e_of(n, kv(n, {1, 0, 2}), 0.7),
      e_of(n, kv(n, {2, 2}), -0.4) + block_mode(n, kv(n, {1, -1}), 2, 3),
  };
  for (auto id : {Inv::R, Inv::Q4}) {
    auto fit = fit_AB(id, n);
    for (std::size_t i = 0; i < held.size(); ++i) {
      ASSERT_TRUE(is_divergence_free(held[i]));
      auto b = flat_spectrum_bound(fit, held[i]);
      EXPECT_TRUE(b.holds) << entry(id).name << " probe " << i << ": " << b.lhs << " vs " << b.bound;
      // the two-term form predicts the value itself
      FourierField tr = trace(held[i]);
      double pred = fit.A * sobolev_norm2(held[i], fit.k) + fit.B * sobolev_norm2(tr, fit.k);
      EXPECT_NEAR(b.lhs, pred, 1e-7 * std::abs(b.lhs)) << entry(id).name << " probe " << i;
    }
  }
}

TEST(Rigidity, DecompositionIsAdditive) {
  const int n = 4;
  FourierField htt = tt_from(n, kv(n, {1, 2}), {0, 0, 1, 0}, {0, 0, 0, 1});
  FourierField hf = e_of(n, kv(n, {1, 2}), 0.8);
  // orthogonal per mode
  EXPECT_NEAR(l2_inner(htt, hf), 0.0, 1e-14);
  for (auto id : {Inv::R, Inv::Q4}) {
    double a = d2_flat_form(id, n, htt), b = d2_flat_form(id, n, hf), ab = d2_flat_form(id, n, htt + hf);
    EXPECT_NEAR(ab, a + b, 1e-7 * std::abs(ab)) << entry(id).name;
  }
}

TEST(Rigidity, LinearTerm) {
  for (int n : {4, 5}) {
    auto r = linear_term_probe(Inv::R, n);
    EXPECT_NEAR(r.c, 1.0, 1e-10);
    EXPECT_LE(r.spread, 1e-8);
    EXPECT_LE(r.pointwise_residual, 1e-10);
    EXPECT_NEAR(r.integral, 0.0, 1e-10 * std::max(1.0, r.integral_scale));
    auto q = linear_term_probe(Inv::Q4, n);
    EXPECT_NEAR(q.c, 1.0 / (2 * (n - 1)), 1e-10) << n;
    EXPECT_NEAR(q.integral, 0.0, 1e-10 * std::max(1.0, q.integral_scale));
  }
  EXPECT_NEAR(linear_term_probe(Inv::Q4, 4).c, 1.0 / 6, 1e-10);
  auto s = linear_term_probe(Inv::Sigma2, 5);
  EXPECT_NEAR(s.c, 0.0, 1e-12);
  EXPECT_EQ(s.per_mode.size(), 4u);
}

TEST(Rigidity, QuadraticWeight6EntriesHaveNoLinearTerm) {
  const int n = 6;
  for (auto id : {Inv::K1, Inv::K2, Inv::K3, Inv::L1, Inv::L2, Inv::L3}) {
    auto t = linear_term_probe(id, n);
    EXPECT_NEAR(t.c, 0.0, 1e-10) << entry(id).name;
    EXPECT_NEAR(t.integral, 0.0, 1e-10 * std::max(1.0, t.integral_scale)) << entry(id).name;
  }
  for (int idx = 0; idx < 16; ++idx) EXPECT_NEAR(linear_term_probe(FlatScalar::basis6(idx), n).c, 0.0, 1e-10) << idx;
  // Δ²J is the one linear entry: D(Δ²J)[h] = (−Δ)³ tr h / (2(n−1))
  EXPECT_NEAR(linear_term_probe(FlatScalar::basis6(16), n).c, 1.0 / (2 * (n - 1)), 1e-10);
}

TEST(Rigidity, RiemannLinearizationAtFlatMetrics) {
  struct Case {
    int n;
    std::vector<int> k;
    double a;
  };
  for (const auto& c : {Case{4, {1, 2, 0, 0}, 0.6}, Case{5, {0, 1, 1, 0, 0}, -1.1}, Case{6, {2, 0, 1, 0, 0, 0}, 0.9}}) {
    FourierField h = FourierField::sym2(c.n);
    std::vector<double> amp(c.n * c.n);
    for (int i = 0; i < c.n; ++i)
      for (int j = 0; j < c.n; ++j) amp[i * c.n + j] = std::sin(1.0 + i + j + i * j) * c.a;
    h.add_cos(c.k, amp);
    FourierField u = FourierField::scalar(c.n);
    u.add_sin(c.k, {c.a});
    auto r = flat_riemann_linearization_residual(c.n, h, u);
    EXPECT_LE(r.closed_form, 1e-9) << c.n;
    // the ∇²f part of E(Υ) is a Lie derivative, so only (Υ/(n−1))g contributes
    EXPECT_LE(r.e_map_measured, 1e-8) << c.n;
    EXPECT_NEAR(r.measured_factor, 1.0 / (2 * (c.n - 1)), 1e-10) << c.n;
    EXPECT_GT(r.e_map_literal, 0.1) << c.n;
  }
}

TEST(Rigidity, SingularIdentityForScalarCurvature) {
  // single trace mode h = cos(x0 + x1) g, outside ker δ
  const int n = 4;
  FourierField h = FourierField::sym2(n);
  std::vector<double> id(n * n, 0.0);
  for (int i = 0; i < n; ++i) id[i * n + i] = 1.0;
  h.add_cos(kv(n, {1, 1}), id);
  auto a = singular_identity_check_R(n, h);
  EXPECT_LE(a.residual(), 1e-6);
  EXPECT_GT(a.scale, 1.0);

  FourierField g = FourierField::sym2(n);
  std::vector<double> p(n * n), q(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      p[i * n + j] = 0.3 * std::cos(i + j + 0.5) + (i == j ? 0.2 : 0.0);
      q[i * n + j] = 0.25 * std::sin(1.0 + i * j);
    }
  g.add_cos(kv(n, {1, 0, 2}), p);
  g.add_sin(kv(n, {0, 1, 1}), q);
  auto b = singular_identity_check_R(n, g);
  EXPECT_LE(b.residual(), 1e-6) << b.lhs << " " << b.dgamma << " " << b.trace_term;
}
