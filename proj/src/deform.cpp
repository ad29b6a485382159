#include "cvi/deform.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cvi/models.hpp"

namespace cvi {

namespace {

double relsum(double a, double b) { return std::max(std::abs(a), std::abs(b)); }

std::vector<Expr> concat(std::vector<Expr> a, const std::vector<Expr>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

int order_for(Inv id) { return entry(id).metric_order; }

std::vector<double> slot_values(const Chart& c, std::span<const double> p) {
  std::vector<double> v(p.begin(), p.end());
  auto pv = c.param_values();
  v.insert(v.end(), pv.begin(), pv.end());
  return v;
}

void check_order(int m) {
  if (m > kMaxJetOrder) throw JetError("jet order overflow: requested " + std::to_string(m));
}

}  // namespace

// ---------------------------------------------------------------- families

MetricFamily MetricFamily::conformal(const Chart& c, const Expr& upsilon, int t_order) {
  MetricFamily f;
  f.base = c;
  f.kind = FamilyKind::Conformal;
  f.upsilon = upsilon;
  f.t_order = t_order;
  return f;
}

MetricFamily MetricFamily::conformal(const Chart& c, const std::string& upsilon, int t_order) {
  return conformal(c, parse_expr(upsilon, c.symbols()), t_order);
}

MetricFamily MetricFamily::path(const Chart& c, const std::vector<Expr>& h, int t_order) {
  if (static_cast<int>(h.size()) != c.n * c.n) throw DeformError("path: h must have n*n components");
  MetricFamily f;
  f.base = c;
  f.kind = FamilyKind::Path;
  f.h = h;
  f.t_order = t_order;
  return f;
}

MetricFamily MetricFamily::lie(const Chart& c, const std::vector<Expr>& X) {
  if (static_cast<int>(X.size()) != c.n) throw DeformError("lie: X must have n components");
  MetricFamily f;
  f.base = c;
  f.kind = FamilyKind::Lie;
  f.X = X;
  f.t_order = 1;
  return f;
}

MetricFamily MetricFamily::volume_normalized(const Chart& c, const Expr& upsilon, int t_order,
                                             const QuadOptions& q) {
  MetricFamily f = conformal(c, upsilon, t_order);
  f.kind = FamilyKind::VolumeNormalizedConformal;
  // c(t)² = (V/M(t))^{2/n}, M(t) = ∫e^{ntΥ}dvol, so log c² has derivatives −2⟨Υ⟩ and −2n(⟨Υ²⟩ − ⟨Υ⟩²)
  Program pu(upsilon, c.symbols());
  auto pv = c.param_values();
  auto I = integrate_nodes(c, q, 3, [&](std::span<const double> p, std::span<double> out) {
    std::vector<double> v(p.begin(), p.end());
    v.insert(v.end(), pv.begin(), pv.end());
    double rho = volume_density(c, p), u = pu.eval(v);
    out[0] = rho;
    out[1] = u * rho;
    out[2] = u * u * rho;
  });
  double m1 = I[1] / I[0], m2 = I[2] / I[0];
  f.log_scale_d1 = -2.0 * m1;
  f.log_scale_d2 = -2.0 * c.n * (m2 - m1 * m1);
  return f;
}

std::vector<Expr> MetricFamily::exprs() const {
  std::vector<Expr> e;
  if (kind == FamilyKind::Conformal || kind == FamilyKind::VolumeNormalizedConformal) e.push_back(upsilon);
  e.insert(e.end(), h.begin(), h.end());
  e.insert(e.end(), X.begin(), X.end());
  return e;
}

FamilyEvaluator::FamilyEvaluator(const MetricFamily& f, int metric_order, std::vector<Expr> fields)
    : fam_(f),
      order_(metric_order),
      ev_(fam_.base, ActiveSet::from_exprs(fam_.base, concat(f.exprs(), fields)),
          metric_order + (f.kind == FamilyKind::Lie ? 1 : 0), f.t_order) {
  check_order(metric_order + (f.kind == FamilyKind::Lie ? 1 : 0));
  for (const auto& e : fields) field_prog_.push_back(ev_.compile(e));
  for (const auto& e : fam_.h) h_prog_.push_back(ev_.compile(e));
  for (const auto& e : fam_.X) x_prog_.push_back(ev_.compile(e));
  if (fam_.upsilon) u_prog_ = ev_.compile(fam_.upsilon);
}

void FamilyEvaluator::set_point(std::span<const double> p) {
  ev_.set_point(p);
  std::vector<Jet> g = ev_.metric();
  const int n = fam_.base.n;
  if (fam_.t_order > 0) {
    Jet t = ev_.t_variable();
    switch (fam_.kind) {
      case FamilyKind::Conformal:
      case FamilyKind::VolumeNormalizedConformal: {
        Jet e = 2.0 * (t * ev_.eval(u_prog_));
        if (fam_.kind == FamilyKind::VolumeNormalizedConformal) {
          const JetLayout& L = ev_.layout();
          int i1 = L.t_index(1), i2 = L.t_index(2);
          if (i1 >= 0) e[i1] += fam_.log_scale_d1;
          if (i2 >= 0) e[i2] += fam_.log_scale_d2;
        }
        if (fam_.power != 1.0) e *= fam_.power;
        Jet f = exp(e);
        for (auto& x : g) x = f * x;
        break;
      }
      case FamilyKind::Path:
        for (int i = 0; i < n * n; ++i) g[i] += t * ev_.eval(h_prog_[i]);
        break;
      case FamilyKind::Lie: {
        // (𝓛_X g)_ij = X^k∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k
        const ActiveSet& A = ev_.active();
        auto d = [&](const Jet& f, int coord) {
          int v = A.coord_to_var[coord];
          return v < 0 ? Jet(f.layout(), f.order() - 1, 0.0) : f.dx(v);
        };
        std::vector<Jet> X;
        for (auto& pr : x_prog_) X.push_back(ev_.eval(pr));
        std::vector<Jet> out(n * n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            Jet s(ev_.layout(), order_, 0.0);
            for (int k = 0; k < n; ++k) {
              s.fma(X[k], d(g[i * n + j], k));
              s.fma(g[k * n + j], d(X[k], i));
              s.fma(g[i * n + k], d(X[k], j));
            }
            out[i * n + j] = s;
          }
        for (int i = 0; i < n * n; ++i) g[i] = g[i].truncated(order_) + t.truncated(order_) * out[i];
        break;
      }
    }
  }
  if (static_cast<int>(g[0].order()) > order_)
    for (auto& x : g) x = x.truncated(order_);
  fields_.clear();
  for (auto& pr : field_prog_) fields_.push_back(ev_.eval(pr));
  ctx_.reset();
  frame_ = std::make_unique<JetFrame>(std::move(g), ev_.active());
  ctx_ = std::make_unique<InvariantContext>(*frame_);
}

DeformationJet d_dt_invariant(Inv id, const MetricFamily& f, std::span<const double> point) {
  check_dimension(id, f.base.n);
  FamilyEvaluator fe(f, order_for(id));
  fe.set_point(point);
  Jet L = fe.context().eval(id, 0);
  DeformationJet r;
  r.value = L.value();
  if (f.t_order >= 1) r.d1 = L.t_deriv(1);
  if (f.t_order >= 2) {
    r.d2 = L.t_deriv(2);
    r.has_d2 = true;
  }
  return r;
}

// ---------------------------------------------------------------- pointwise comparators

Residual conformal_comparator(Comparator which, const Chart& c, const Expr& upsilon, std::span<const double> point) {
  const int n = c.n;
  if (n < 3 || (which == Comparator::B && n < 4)) throw DeformError("comparator needs larger dimension");
  const int mo = (which == Comparator::B) ? 4 : (which == Comparator::C ? 3 : 2);
  FamilyEvaluator fe(MetricFamily::conformal(c, upsilon), mo, {upsilon});
  fe.set_point(point);
  const JetFrame& F = fe.frame();
  const Jet& u = fe.field(0);
  JTensor du = F.gradient(u);
  std::vector<double> got, ref;
  auto push = [&](double a, double b) {
    got.push_back(a);
    ref.push_back(b);
  };
  switch (which) {
    case Comparator::P: {
      JTensor H = F.nabla(du);
      for (int i = 0; i < n * n; ++i) push(F.P().c[i].t_deriv(1), -H.c[i].value());
      break;
    }
    case Comparator::C: {
      JTensor Wr = F.raise(F.W(), 2);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            double s = 0.0;
            for (int q = 0; q < n; ++q) s += Wr.at(i, j, q, k).value() * du[q].value();
            push(F.C().at(i, j, k).t_deriv(1), s);
          }
      break;
    }
    case Comparator::B: {
      JTensor up = F.raise(du, 0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int q = 0; q < n; ++q)
            s += up[q].value() * (F.C().at(i, q, j).value() + F.C().at(j, q, i).value());
          push(F.B().at(i, j).t_deriv(1), -2.0 * u.value() * F.B().at(i, j).value() - (n - 4.0) * s);
        }
      break;
    }
    case Comparator::J:
      push(F.J().t_deriv(1), -2.0 * F.J().value() * u.value() - F.laplacian(u).value());
      break;
    case Comparator::R:
      push(F.scalar().t_deriv(1), -2.0 * F.scalar().value() * u.value() - 2.0 * (n - 1) * F.laplacian(u).value());
      break;
  }
  Residual r;
  for (std::size_t i = 0; i < got.size(); ++i) {
    r.residual = std::max(r.residual, std::abs(got[i] - ref[i]));
    r.scale = std::max(r.scale, relsum(got[i], ref[i]));
  }
  r.scale = std::max(r.scale, 1.0);
  return r;
}

Residual metric_comparator_R(const Chart& c, const std::vector<Expr>& h, std::span<const double> point) {
  const int n = c.n;
  FamilyEvaluator fe(MetricFamily::path(c, h), 3, h);
  fe.set_point(point);
  const JetFrame& F = fe.frame();
  JTensor H(n, 2);
  for (int i = 0; i < n * n; ++i) H.c[i] = fe.field(i);
  JTensor Ricu = F.raise_all(F.ricci());
  double ric_h = 0.0;
  for (int i = 0; i < n * n; ++i) ric_h += Ricu.c[i].value() * H.c[i].value();
  // (δh)_j = ∇^i h_ij
  JTensor dH = F.nabla(H);
  const JTensor& gi = F.ginv();
  JTensor dh(n, 1);
  for (int j = 0; j < n; ++j) {
    Jet s(F.layout(), dH.order(), 0.0);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) s.fma(gi.at(k, i), dH.at(k, i, j));
    dh[j] = s;
  }
  double ref = -ric_h + F.divergence(dh).value() - F.laplacian(F.trace(H)).value();
  double got = F.scalar().t_deriv(1);
  return {std::abs(got - ref), std::max(1.0, relsum(got, ref))};
}

Residual relate_derivatives_residual(Inv id, const Chart& c, const Expr& upsilon, std::span<const double> point) {
  check_dimension(id, c.n);
  const int n = c.n;
  double a = d_dt_invariant(id, MetricFamily::conformal(c, upsilon), point).d1;
  std::vector<Expr> h(n * n);
  for (int i = 0; i < n * n; ++i) h[i] = mul(mul(constant(2.0), upsilon), c.g[i]);
  double b = d_dt_invariant(id, MetricFamily::path(c, h), point).d1;
  return {std::abs(a - b), std::max(1.0, relsum(a, b))};
}

namespace {

// X(L) at a point from an order metric_order+1 base frame
double directional(Inv id, const Chart& c, const std::vector<Expr>& X, const std::vector<Expr>& extra,
                   std::span<const double> point, FamilyEvaluator* base = nullptr) {
  std::unique_ptr<FamilyEvaluator> own;
  if (!base) {
    MetricFamily b = MetricFamily::conformal(c, constant(0.0), 0);
    own = std::make_unique<FamilyEvaluator>(b, order_for(id) + 1, concat(X, extra));
    base = own.get();
  }
  base->set_point(point);
  const JetFrame& F = base->frame();
  Jet L1 = base->context().eval(id, 1);
  double s = 0.0;
  for (int k = 0; k < c.n; ++k) s += base->field(k).value() * F.d(L1, k).value();
  return s;
}

}  // namespace

Residual diffeo_identity_residual(Inv id, const Chart& c, const std::vector<Expr>& X, std::span<const double> point) {
  check_dimension(id, c.n);
  check_order(order_for(id) + 1);
  double a = d_dt_invariant(id, MetricFamily::lie(c, X), point).d1;
  double b = directional(id, c, X, {}, point);
  return {std::abs(a - b), std::max(1.0, relsum(a, b))};
}

Residual volume_variation_residual(const Chart& c, const std::vector<Expr>& h, std::span<const double> point) {
  FamilyEvaluator fe(MetricFamily::path(c, h), 1, h);
  fe.set_point(point);
  const JetFrame& F = fe.frame();
  Jet rho = fe.density();
  double tr = 0.0;
  for (int i = 0; i < c.n * c.n; ++i) tr += F.ginv().c[i].value() * fe.field(i).value();
  double a = rho.t_deriv(1), b = 0.5 * tr * rho.value();
  return {std::abs(a - b), std::max(1.0, relsum(a, b))};
}

// ---------------------------------------------------------------- integrated checks

QuadOptions quad_options(const Chart& c, const std::vector<Expr>& fields, Profile p) {
  QuadOptions q;
  q.profile = p;
  q.depends = ActiveSet::from_exprs(c, fields).vars;
  return q;
}

double WeakResidual::relative() const {
  double s = std::max({std::abs(lhs), std::abs(rhs), scale});
  return s > 0.0 ? residual() / s : residual();
}

WeakResidual self_adjointness_residual(Inv id, const Chart& c, const Expr& u1, const Expr& u2, const QuadOptions& q) {
  check_dimension(id, c.n);
  const int mo = order_for(id);
  FamilyEvaluator a(MetricFamily::conformal(c, u2), mo, {u1});
  FamilyEvaluator b(MetricFamily::conformal(c, u1), mo, {u2});
  auto I = integrate_nodes(c, q, 4, [&](std::span<const double> p, std::span<double> out) {
    a.set_point(p);
    double x = a.field(0).value() * a.context().eval(id, 0).t_deriv(1) * a.density().value();
    b.set_point(p);
    double y = b.field(0).value() * b.context().eval(id, 0).t_deriv(1) * b.density().value();
    out[0] = x;
    out[1] = y;
    out[2] = std::abs(x);
    out[3] = std::abs(y);
  });
  return {I[0], I[1], std::max(I[2], I[3])};
}

WeakResidual conformal_gradient_residual(Inv id, const Chart& c, const Expr& u, const QuadOptions& q) {
  check_dimension(id, c.n);
  const int w = c.n - 2 * entry(id).k;
  FamilyEvaluator fe(MetricFamily::conformal(c, u), order_for(id), {u});
  auto I = integrate_nodes(c, q, 4, [&](std::span<const double> p, std::span<double> out) {
    fe.set_point(p);
    Jet L = fe.context().eval(id, 0);
    Jet rho = fe.density();
    double x = (L * rho).t_deriv(1);
    double y = w * L.value() * fe.field(0).value() * rho.value();
    out[0] = x;
    out[1] = y;
    out[2] = std::abs(x);
    out[3] = std::abs(y);
  });
  return {I[0], I[1], std::max(I[2], I[3])};
}

WeakResidual weight6_gradient_residual(int idx, const Chart& c, const Expr& u, const QuadOptions& q) {
  if (idx < 0 || idx > 6) throw DeformError("weight6 gradient: basis index must be 0..6");
  const int n = c.n;
  if (n < 5) throw CatalogError("weight −6 basis needs n >= 5");
  // building blocks reach fourth metric derivatives except Δ²J
  const int mo = idx == 4 ? 6 : 4;
  FamilyEvaluator fe(MetricFamily::conformal(c, u), mo, {u});
  auto I = integrate_nodes(c, q, 4, [&](std::span<const double> p, std::span<double> out) {
    fe.set_point(p);
    auto& X = fe.context();
    Jet rho = fe.density();
    double x = (X.basis6(idx, 0) * rho).t_deriv(1);
    double J = X.J(0).value();
    double g = 0.0;
    switch (idx) {
      case 0:
        g = -3 * X.lapJ2(0).value() + (n - 6.0) * J * J * J;
        break;
      case 1:
        g = -X.lapP2(0).value() - 2 * X.divPdJ(0).value() - X.lapJ2(0).value() + (n - 6.0) * J * X.P2(0).value();
        break;
      case 2:
        g = -3 * X.divPdJ(0).value() - 1.5 * X.lapP2(0).value() - 3 * X.divCP(0).value() +
            (n - 6.0) * X.trP3(0).value();
        break;
      case 3:
        g = 3.0 * (n - 4) * X.divCP(0).value() + (n - 6.0) * X.BP(0).value();
        break;
      case 4:
        g = 2 * X.lap2J(0).value() + 0.5 * (n - 2) * X.lapJ2(0).value() - (n - 6.0) * J * X.lapJ(0).value();
        break;
      case 5:
        g = 2.0 * (n - 3) * X.divCP(0).value() + X.divWC(0).value() + (n - 6.0) * X.WP2(0).value();
        break;
      case 6:
        g = -X.lapW2(0).value() + (n - 6.0) * J * X.W2(0).value();
        break;
    }
    double y = g * fe.field(0).value() * rho.value();
    out[0] = x;
    out[1] = y;
    out[2] = std::abs(x);
    out[3] = std::abs(y);
  });
  return {I[0], I[1], std::max(I[2], I[3])};
}

WeakResidual weight4_gradient_residual(int which, const Chart& c, const Expr& u, const QuadOptions& q) {
  if (which != 0 && which != 1) throw DeformError("weight4 gradient: which must be 0 (J²) or 1 (|P|²)");
  const int n = c.n;
  FamilyEvaluator fe(MetricFamily::conformal(c, u), 4, {u});
  auto I = integrate_nodes(c, q, 4, [&](std::span<const double> p, std::span<double> out) {
    fe.set_point(p);
    auto& X = fe.context();
    Jet rho = fe.density();
    Jet a = which == 0 ? X.J(0) * X.J(0) : X.P2(0);
    double x = 0.5 * (a * rho).t_deriv(1);
    double y = (-X.lapJ(0).value() + 0.5 * (n - 4) * a.value()) * fe.field(0).value() * rho.value();
    out[0] = x;
    out[1] = y;
    out[2] = std::abs(x);
    out[3] = std::abs(y);
  });
  return {I[0], I[1], std::max(I[2], I[3])};
}

std::pair<double, double> volume_normalization_residual(const Chart& c, const Expr& u, const QuadOptions& q) {
  FamilyEvaluator fe(MetricFamily::volume_normalized(c, u, 2, q), 0);
  auto I = integrate_nodes(c, q, 3, [&](std::span<const double> p, std::span<double> out) {
    fe.set_point(p);
    Jet rho = fe.density();
    out[0] = rho.value();
    out[1] = rho.t_deriv(1);
    out[2] = rho.t_deriv(2);
  });
  return {I[1] / I[0], I[2] / I[0]};
}

Expr mean_zero(const Chart& c, const Expr& u, const QuadOptions& q) {
  Program pu(u, c.symbols());
  auto I = integrate_nodes(c, q, 2, [&](std::span<const double> p, std::span<double> out) {
    double rho = volume_density(c, p);
    out[0] = rho;
    out[1] = pu.eval(slot_values(c, p)) * rho;
  });
  return sub(u, constant(I[1] / I[0]));
}

WeakResidual second_variation_residual(Inv id, const Chart& c, const Expr& u, const QuadOptions& q) {
  check_dimension(id, c.n);
  const int w = c.n - 2 * entry(id).k;
  if (w == 0) throw DeformError("critical dimension: use critical_primitive");
  Expr u0 = mean_zero(c, u, q);
  const int mo = order_for(id);
  FamilyEvaluator a(MetricFamily::volume_normalized(c, u0, 2, q), mo);
  FamilyEvaluator b(MetricFamily::conformal(c, u0), mo, {u0});
  std::vector<double> Ls;
  auto I = integrate_nodes(c, q, 4, [&](std::span<const double> p, std::span<double> out) {
    a.set_point(p);
    Jet L = a.context().eval(id, 0);
    Ls.push_back(L.value());
    double x = (L * a.density()).t_deriv(2) / w;
    b.set_point(p);
    double y = b.field(0).value() * b.context().eval(id, 0).t_deriv(1) * b.density().value();
    out[0] = x;
    out[1] = y;
    out[2] = std::abs(x);
    out[3] = std::abs(y);
  });
  double mean = 0.0, var = 0.0;
  for (double x : Ls) mean += x / Ls.size();
  for (double x : Ls) var += (x - mean) * (x - mean) / Ls.size();
  if (std::sqrt(var) > 1e-8 * std::max(1.0, std::abs(mean)))
    throw DeformError("second variation: " + entry(id).name + " is not constant on the base metric");
  return {I[0], I[1], std::max(I[2], I[3])};
}

double critical_primitive(Inv id, const Chart& c, const Expr& u, const QuadOptions& q, int s_nodes) {
  check_dimension(id, c.n);
  auto sr = gauss_legendre(s_nodes, 0.0, 1.0);
  double total = 0.0;
  for (int k = 0; k < s_nodes; ++k) {
    Chart cs = conformal_perturb(c, mul(constant(sr.x[k]), u));
    FamilyEvaluator fe(MetricFamily::conformal(cs, constant(0.0), 0), order_for(id), {u});
    auto I = integrate_nodes(cs, q, 1, [&](std::span<const double> p, std::span<double> out) {
      fe.set_point(p);
      out[0] = fe.field(0).value() * fe.context().eval(id, 0).value() * fe.density().value();
    });
    total += sr.w[k] * I[0];
  }
  return total;
}

WeakResidual critical_primitive_gradient_residual(Inv id, const Chart& c, const Expr& u, const Expr& v,
                                                  const QuadOptions& q, int s_nodes) {
  check_dimension(id, c.n);
  auto sr = gauss_legendre(s_nodes, 0.0, 1.0);
  const int mo = order_for(id);
  double lhs = 0.0, sc = 0.0;
  for (int k = 0; k < s_nodes; ++k) {
    const double s = sr.x[k];
    // e^{2s(u+εv)}g₀ = e^{2εsv}(e^{2su}g₀)
    Chart cs = conformal_perturb(c, mul(constant(s), u));
    FamilyEvaluator fe(MetricFamily::conformal(cs, mul(constant(s), v)), mo, {u, v});
    auto I = integrate_nodes(cs, q, 2, [&](std::span<const double> p, std::span<double> out) {
      fe.set_point(p);
      Jet t = fe.evaluator().t_variable().truncated(0);
      Jet f = fe.field(0).truncated(0) + t * fe.field(1).truncated(0);
      Jet x = f * fe.context().eval(id, 0) * fe.density();
      out[0] = x.t_deriv(1);
      out[1] = std::abs(out[0]);
    });
    lhs += sr.w[k] * I[0];
    sc += sr.w[k] * I[1];
  }
  Chart c1 = conformal_perturb(c, u);
  FamilyEvaluator fe(MetricFamily::conformal(c1, constant(0.0), 0), mo, {v});
  auto I = integrate_nodes(c1, q, 2, [&](std::span<const double> p, std::span<double> out) {
    fe.set_point(p);
    out[0] = fe.field(0).value() * fe.context().eval(id, 0).value() * fe.density().value();
    out[1] = std::abs(out[0]);
  });
  return {lhs, I[0], std::max(sc, I[1])};
}

GammaResiduals gamma_pairing_residuals(Inv id, const Chart& c, const Expr& f, const Expr& u,
                                       const std::vector<Expr>& X, const std::vector<Expr>& h, const QuadOptions& q) {
  check_dimension(id, c.n);
  const int n = c.n, mo = order_for(id);
  GammaResiduals out;
  {
    std::vector<Expr> ug(n * n);
    for (int i = 0; i < n * n; ++i) ug[i] = mul(u, c.g[i]);
    FamilyEvaluator a(MetricFamily::conformal(c, u), mo, {f});
    FamilyEvaluator b(MetricFamily::path(c, ug), mo, {f});
    auto I = integrate_nodes(c, q, 4, [&](std::span<const double> p, std::span<double> o) {
      a.set_point(p);
      double x = 0.5 * a.field(0).value() * a.context().eval(id, 0).t_deriv(1) * a.density().value();
      b.set_point(p);
      double y = b.field(0).value() * b.context().eval(id, 0).t_deriv(1) * b.density().value();
      o[0] = x;
      o[1] = y;
      o[2] = std::abs(x);
      o[3] = std::abs(y);
    });
    out.trace = {I[0], I[1], std::max(I[2], I[3])};
  }
  if (!X.empty()) {
    check_order(mo + 1);
    FamilyEvaluator a(MetricFamily::lie(c, X), mo, {f});
    FamilyEvaluator base(MetricFamily::conformal(c, constant(0.0), 0), mo + 1, concat(X, {f}));
    auto I = integrate_nodes(c, q, 4, [&](std::span<const double> p, std::span<double> o) {
      a.set_point(p);
      double x = a.field(0).value() * a.context().eval(id, 0).t_deriv(1) * a.density().value();
      double xl = directional(id, c, X, {f}, p, &base);
      double y = base.field(n).value() * xl * base.density().value();
      o[0] = x;
      o[1] = y;
      o[2] = std::abs(x);
      o[3] = std::abs(y);
    });
    out.divergence = {I[0], I[1], std::max(I[2], I[3])};
  }
  if (id == Inv::R && !h.empty()) {
    // Γ*(f) = −f Ric + ∇²f − Δf g
    FamilyEvaluator a(MetricFamily::path(c, h), 2, concat({f}, h));
    auto I = integrate_nodes(c, q, 4, [&](std::span<const double> p, std::span<double> o) {
      a.set_point(p);
      const JetFrame& F = a.frame();
      Jet rho = a.density();
      const Jet& fj = a.field(0);
      double x = fj.value() * F.scalar().t_deriv(1) * rho.value();
      JTensor H = F.nabla(F.gradient(fj));
      double lf = F.laplacian(fj).value();
      JTensor Hu(n, 2);
      for (int i = 0; i < n * n; ++i)
        Hu.c[i] = Jet(F.layout(), 0, -fj.value() * F.ricci().c[i].value() + H.c[i].value() - lf * F.g().c[i].value());
      Hu = F.raise_all(Hu);
      double y = 0.0;
      for (int i = 0; i < n * n; ++i) y += Hu.c[i].value() * a.field(1 + i).value();
      y *= rho.value();
      o[0] = y;
      o[1] = x;
      o[2] = std::abs(y);
      o[3] = std::abs(x);
    });
    out.dual_R = {I[0], I[1], std::max(I[2], I[3])};
    out.has_dual = true;
  }
  return out;
}

AlmostSchur almost_schur_check(const Chart& c, double ricci_floor, const QuadOptions& q) {
  const int n = c.n;
  if (n < 3) throw DeformError("almost-Schur needs n >= 3");
  FamilyEvaluator fe(MetricFamily::conformal(c, constant(0.0), 0), 2);
  double ric_min = 1e300;
  auto first = integrate_nodes(c, q, 3, [&](std::span<const double> p, std::span<double> out) {
    fe.set_point(p);
    const JetFrame& F = fe.frame();
    Eigen::MatrixXd Ric(n, n), G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Ric(i, j) = F.ricci().at(i, j).value();
        G(i, j) = F.g().at(i, j).value();
      }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ric, G, Eigen::EigenvaluesOnly);
    ric_min = std::min(ric_min, es.eigenvalues().minCoeff());
    double R = F.scalar().value(), rho = fe.density().value();
    // |Ric − (R/n)g|² = |Ric|² − R²/n
    JTensor Ru = F.raise_all(F.ricci());
    double ric2 = 0.0;
    for (int i = 0; i < n * n; ++i) ric2 += Ru.c[i].value() * F.ricci().c[i].value();
    out[0] = rho;
    out[1] = R * rho;
    out[2] = std::max(0.0, ric2 - R * R / n) * rho;
  });
  if (ric_min < ricci_floor)
    throw DeformError("almost-Schur: Ricci lower bound " + std::to_string(ric_min) + " below floor " +
                      std::to_string(ricci_floor));
  const double Rbar = first[1] / first[0];
  auto second = integrate_nodes(c, q, 1, [&](std::span<const double> p, std::span<double> out) {
    fe.set_point(p);
    double d = fe.frame().scalar().value() - Rbar;
    out[0] = d * d * fe.density().value();
  });
  AlmostSchur a;
  a.lhs = second[0];
  a.rhs = 4.0 * n * (n - 1.0) / ((n - 2.0) * (n - 2.0)) * first[2];
  a.ric_min = ric_min;
  a.pass = a.lhs <= a.rhs * (1 + 1e-8) || (a.lhs <= 1e-10 && a.rhs <= 1e-10);
  return a;
}

}  // namespace cvi
