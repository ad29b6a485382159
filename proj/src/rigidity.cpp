#include "cvi/rigidity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cvi/deform.hpp"
#include "cvi/models.hpp"

namespace cvi {

namespace {

std::vector<Expr> tensor_exprs(const Chart& c, const FourierField& h) {
  std::vector<Expr> out;
  for (int i = 0; i < c.n; ++i)
    for (int j = 0; j < c.n; ++j) out.push_back(parse_expr(h.expr(c.coords, i, j), c.symbols()));
  return out;
}

Expr scalar_expr(const Chart& c, const FourierField& u) { return parse_expr(u.expr(c.coords), c.symbols()); }

QuadOptions flat_options(const Chart& c, const std::vector<Expr>& fields) {
  QuadOptions q = quad_options(c, fields);
  // constant integrands: one axis keeps the node loop nonempty
  if (q.depends.empty()) q.depends = {0};
  return q;
}

double freq2(const std::vector<int>& k) {
  double s = 0.0;
  for (int x : k) s += double(x) * x;
  return s;
}

// deterministic interior sample points
std::vector<std::vector<double>> sample_points(int n, int count) {
  std::vector<std::vector<double>> pts;
  for (int s = 0; s < count; ++s) {
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) p[i] = std::fmod(0.37 + 1.13 * s + 0.71 * i + 0.29 * s * i, 2.0 * M_PI);
    pts.push_back(p);
  }
  return pts;
}

void check_sym2(const FourierField& h, int n) {
  if (h.rank != 2 || h.n != n) throw RigidityError("expected a symmetric 2-tensor field on T^" + std::to_string(n));
}

FourierField tt_mode(int n, std::vector<int> k, int a, int b, bool sine = false) {
  FourierField h = FourierField::sym2(n);
  std::vector<double> amp(n * n, 0.0);
  amp[a * n + b] = amp[b * n + a] = 1.0;
  if (sine)
    h.add_sin(std::move(k), amp);
  else
    h.add_cos(std::move(k), amp);
  return h;
}

FourierField scalar_mode(int n, std::vector<int> k, double a = 1.0) {
  FourierField u = FourierField::scalar(n);
  u.add_cos(std::move(k), {a});
  return u;
}

}  // namespace

FlatScalar FlatScalar::of(Inv id) {
  const auto& e = entry(id);
  return {e.name, e.k, e.metric_order, [id](InvariantContext& ctx) { return ctx.eval(id, 0); }};
}

FlatScalar FlatScalar::basis6(int idx) {
  if (idx < 0 || idx >= kBasis6) throw RigidityError("basis index out of range");
  int mo = idx == 16 ? 6 : (idx <= 2 ? 2 : 4);
  return {basis6_names()[idx], 3, mo, [idx](InvariantContext& ctx) { return ctx.basis6(idx, 0); }};
}

double d2_flat_form_general(const FlatScalar& L, int n, const FourierField& h) {
  check_sym2(h, n);
  Chart c = flat_torus(n);
  auto H = tensor_exprs(c, h);
  FamilyEvaluator fe(MetricFamily::path(c, H, 2), L.metric_order);
  std::vector<double> p0(n, 0.0);
  const double rho0 = volume_density(c, p0);
  auto I = integrate_nodes(c, flat_options(c, H), 1, [&](std::span<const double> p, std::span<double> out) {
    fe.set_point(p);
    out[0] = L.eval(fe.context()).t_deriv(2) * rho0;
  });
  return I[0];
}

double d2_flat_form(Inv id, int n, const FourierField& h) {
  check_dimension(id, n);
  check_sym2(h, n);
  if (!is_divergence_free(h, 1e-12)) throw RigidityError("d2_flat_form: h is not divergence-free");
  return d2_flat_form_general(FlatScalar::of(id), n, h);
}

RigidityFit fit_AB(Inv id, int n) {
  check_dimension(id, n);
  if (n < 4) throw RigidityError("fit_AB: TT probes need n >= 4");
  const int k = entry(id).k;
  RigidityFit fit;
  fit.id = entry(id).name;
  fit.n = n;
  fit.k = k;

  struct Spec {
    std::vector<int> k;
    bool tt;
  };
  auto kv = [n](int a, int b) {
    std::vector<int> v(n, 0);
    v[0] = a;
    v[1] = b;
    return v;
  };
  std::vector<Spec> specs{{kv(1, 0), true},  {kv(1, 1), true},  {kv(2, 1), true},  {kv(1, -2), true},
                          {kv(1, 0), false}, {kv(1, 1), false}, {kv(2, 1), false}, {kv(0, 3), false}};
  for (const auto& s : specs) {
    FourierField h = s.tt ? tt_mode(n, s.k, 2, 3) : e_map(scalar_mode(n, s.k), n);
    RigidityProbe pr;
    pr.kind = s.tt ? "TT" : "E";
    pr.k = s.k;
    pr.d2 = d2_flat_form(id, n, h);
    pr.grad_h = sobolev_norm2(h, k);
    pr.grad_tr = sobolev_norm2(trace(h), k);
    fit.probes.push_back(pr);
  }
  {
    std::vector<std::vector<int>> seen;
    for (const auto& s : specs)
      if (std::find(seen.begin(), seen.end(), s.k) == seen.end()) seen.push_back(s.k);
    fit.distinct_frequencies = static_cast<int>(seen.size());
  }

  const int m = static_cast<int>(fit.probes.size());
  Eigen::MatrixXd M(m, 2);
  Eigen::VectorXd y(m);
  // rows scaled to unit norm so every probe counts equally
  for (int i = 0; i < m; ++i) {
    const auto& p = fit.probes[i];
    double s = std::hypot(p.grad_h, p.grad_tr);
    M(i, 0) = p.grad_h / s;
    M(i, 1) = p.grad_tr / s;
    y(i) = p.d2 / s;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  auto sv = svd.singularValues();
  if (sv(1) <= 1e-8 * sv(0)) throw RigidityError("fit_AB: probe design is ill-conditioned");
  Eigen::VectorXd ab = svd.solve(y);
  fit.A = ab(0);
  fit.B = ab(1);
  fit.trace_combo = fit.A / (n - 1) + fit.B;

  double scale = 0.0;
  for (const auto& p : fit.probes) scale = std::max(scale, std::abs(p.d2));
  double misfit = 0.0, a_lo = 1e300, a_hi = -1e300, c_lo = 1e300, c_hi = -1e300;
  for (const auto& p : fit.probes) {
    misfit = std::max(misfit, std::abs(p.d2 - fit.A * p.grad_h - fit.B * p.grad_tr));
    if (p.kind == "TT") {
      double a = p.d2 / p.grad_h;
      a_lo = std::min(a_lo, a);
      a_hi = std::max(a_hi, a);
    } else {
      double c = p.d2 / p.grad_tr;
      c_lo = std::min(c_lo, c);
      c_hi = std::max(c_hi, c);
    }
  }
  const double coef = std::max(std::abs(fit.A), std::abs(fit.trace_combo));
  fit.fit_residual = scale > 0 ? misfit / scale : misfit;
  fit.consistency = std::max(a_hi - a_lo, c_hi - c_lo) / std::max(coef, 1e-300);
  if (fit.consistency > 1e-5 || fit.fit_residual > 1e-5)
    throw RigidityError("fit_AB: two-term form fails for " + fit.id + " (spread " + std::to_string(fit.consistency) +
                        ")");

  const double tol = 1e-9 * coef;
  fit.A_negative = fit.A < -tol;
  fit.trace_combo_negative = fit.trace_combo < -tol;
  fit.infinitesimally_rigid = fit.A_negative && fit.trace_combo_negative;
  if (fit.infinitesimally_rigid) fit.C = std::min(-fit.A, -fit.A - (n - 1) * fit.B);
  fit.linear_c = linear_term_probe(id, n).c;
  return fit;
}

FlatBound flat_spectrum_bound(const RigidityFit& fit, const FourierField& h) {
  FlatBound b;
  b.lhs = d2_flat_form(entry(fit.id).id, fit.n, h);
  double gh = sobolev_norm2(h, fit.k);
  b.bound = -fit.C * gh;
  b.scale = std::max(std::abs(b.lhs), std::abs(fit.A) * gh);
  b.holds = b.lhs <= b.bound + 1e-6 * b.scale;
  return b;
}

LinearTerm linear_term_probe(const FlatScalar& L, int n) {
  Chart c = flat_torus(n);
  LinearTerm out;
  out.id = L.name;
  auto kv = [n](int a, int b) {
    std::vector<int> v(n, 0);
    v[0] = a;
    v[1] = b;
    return v;
  };
  const auto pts = sample_points(n, 6);
  double max_dl = 0.0, max_res = 0.0;
  std::vector<std::vector<double>> dl_all, ref_all;
  for (auto kk : {kv(1, 0), kv(1, 1), kv(2, 1), kv(0, 2)}) {
    FourierField h = e_map(scalar_mode(n, kk), n);
    FourierField tr = trace(h);
    auto H = tensor_exprs(c, h);
    FamilyEvaluator fe(MetricFamily::path(c, H, 1), L.metric_order);
    const double lam = std::pow(freq2(kk), L.k);
    double num = 0.0, den = 0.0;
    std::vector<double> dls, refs;
    for (const auto& p : pts) {
      fe.set_point(p);
      double dl = L.eval(fe.context()).t_deriv(1);
      double ref = lam * tr.eval(p)[0];
      num += dl * ref;
      den += ref * ref;
      dls.push_back(dl);
      refs.push_back(ref);
      max_dl = std::max(max_dl, std::abs(dl));
    }
    out.per_mode.push_back(num / den);
    dl_all.push_back(dls);
    ref_all.push_back(refs);
  }
  double s = 0.0;
  for (double v : out.per_mode) s += v;
  out.c = s / out.per_mode.size();
  double spread = 0.0;
  for (double v : out.per_mode) spread = std::max(spread, std::abs(v - out.c));
  out.spread = std::abs(out.c) > 1e-12 ? spread / std::abs(out.c) : spread;
  for (std::size_t m = 0; m < dl_all.size(); ++m)
    for (std::size_t i = 0; i < dl_all[m].size(); ++i)
      max_res = std::max(max_res, std::abs(dl_all[m][i] - out.c * ref_all[m][i]));
  out.pointwise_residual = max_dl > 0 ? max_res / max_dl : max_res;
  if (out.spread > 1e-8) throw RigidityError("linear_term_probe: DL[h] is not c(-Δ)^k tr h for " + L.name);

  // S = 0: ∫DL[h] vanishes for h outside ker δ as well
  FourierField g = FourierField::sym2(n);
  std::vector<double> a(n * n, 0.0), b(n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      a[i * n + j] = a[j * n + i] = 0.3 + 0.1 * i - 0.07 * j;
      b[i * n + j] = b[j * n + i] = 0.2 - 0.05 * (i + j);
    }
  g.add_cos(kv(1, 0), a);
  g.add_sin(kv(1, 2), b);
  auto G = tensor_exprs(c, g);
  FamilyEvaluator fe(MetricFamily::path(c, G, 1), L.metric_order);
  auto I = integrate_nodes(c, flat_options(c, G), 2, [&](std::span<const double> p, std::span<double> o) {
    fe.set_point(p);
    double v = L.eval(fe.context()).t_deriv(1);
    o[0] = v;
    o[1] = std::abs(v);
  });
  out.integral = I[0];
  out.integral_scale = I[1];
  return out;
}

LinearTerm linear_term_probe(Inv id, int n) {
  check_dimension(id, n);
  return linear_term_probe(FlatScalar::of(id), n);
}

RiemannLinearization flat_riemann_linearization_residual(int n, const FourierField& h, const FourierField& upsilon) {
  check_sym2(h, n);
  Chart c = flat_torus(n);
  RiemannLinearization out;
  const auto pts = sample_points(n, 5);
  auto H = tensor_exprs(c, h);
  {
    FamilyEvaluator fe(MetricFamily::path(c, H, 1), 2, H);
    double res = 0.0, sc = 1.0;
    for (const auto& p : pts) {
      fe.set_point(p);
      const JetFrame& F = fe.frame();
      auto dd = [&](int a, int b, int i, int j) { return F.d(F.d(fe.field(a * n + b), i), j).value(); };
      const JTensor& Rm = F.riemann();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              double ref = -0.5 * (dd(j, l, i, k) + dd(i, k, j, l) - dd(i, l, j, k) - dd(j, k, i, l));
              double got = Rm.at(i, j, k, l).t_deriv(1);
              res = std::max(res, std::abs(got - ref));
              sc = std::max({sc, std::abs(got), std::abs(ref)});
            }
    }
    out.closed_form = res / sc;
  }
  {
    FourierField E = e_map(upsilon, n);
    auto HE = tensor_exprs(c, E);
    FamilyEvaluator pe(MetricFamily::path(c, HE, 1), 2);
    FamilyEvaluator ce(MetricFamily::conformal(c, scalar_expr(c, upsilon)), 2);
    std::vector<double> a, b;
    for (const auto& p : pts) {
      pe.set_point(p);
      ce.set_point(p);
      for (int i = 0; i < n * n * n * n; ++i) {
        a.push_back(pe.frame().riemann().c[i].t_deriv(1));
        b.push_back(ce.frame().riemann().c[i].t_deriv(1));
      }
    }
    double ab = 0.0, bb = 0.0, sc = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ab += a[i] * b[i];
      bb += b[i] * b[i];
      sc = std::max(sc, std::abs(a[i]));
    }
    out.measured_factor = bb > 0 ? ab / bb : 0.0;
    const double lit = n / (2.0 * (n - 1)), mea = 1.0 / (2.0 * (n - 1));
    double rl = 0.0, rm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      rl = std::max(rl, std::abs(a[i] - lit * b[i]));
      rm = std::max(rm, std::abs(a[i] - mea * b[i]));
    }
    out.e_map_literal = rl / sc;
    out.e_map_measured = rm / sc;
  }
  return out;
}

double SingularIdentity::residual() const {
  return std::abs(lhs - dgamma - trace_term) / std::max(1.0, scale);
}

SingularIdentity singular_identity_check_R(int n, const FourierField& h) {
  check_sym2(h, n);
  Chart c = flat_torus(n);
  auto H = tensor_exprs(c, h);
  FamilyEvaluator fe(MetricFamily::path(c, H, 2), 2, H);
  std::vector<double> p0(n, 0.0);
  const double rho0 = volume_density(c, p0);
  auto I = integrate_nodes(c, flat_options(c, H), 3, [&](std::span<const double> p, std::span<double> o) {
    fe.set_point(p);
    const JetFrame& F = fe.frame();
    JTensor Hj(n, 2);
    for (int i = 0; i < n * n; ++i) Hj.c[i] = fe.field(i);
    const JTensor& gi = F.ginv();
    auto pair = [&](auto&& A) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) s += gi.at(i, a).value() * gi.at(j, b).value() * A(i, j) * Hj.at(a, b).value();
      return s;
    };
    const JTensor& Ric = F.ricci();
    double dg = -pair([&](int i, int j) { return Ric.at(i, j).t_deriv(1); });
    Jet tr = F.trace(Hj);
    JTensor hess = F.nabla(F.gradient(tr));
    double lap = F.laplacian(tr).value();
    double tt = -0.5 * pair([&](int i, int j) { return hess.at(i, j).value() - lap * F.g().at(i, j).value(); });
    o[0] = F.scalar().t_deriv(2) * rho0;
    o[1] = dg * rho0;
    o[2] = tt * rho0;
  });
  SingularIdentity s;
  s.lhs = I[0];
  s.dgamma = I[1];
  s.trace_term = I[2];
  s.scale = std::max({std::abs(s.lhs), std::abs(s.dgamma), std::abs(s.trace_term)});
  return s;
}

}  // namespace cvi
