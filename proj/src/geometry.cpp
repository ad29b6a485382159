#include "cvi/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace cvi {

std::vector<std::string> Chart::symbols() const {
  std::vector<std::string> s = coords;
  for (auto& [name, v] : params) s.push_back(name);
  return s;
}

std::vector<double> Chart::param_values() const {
  std::vector<double> v;
  for (auto& [name, x] : params) v.push_back(x);
  return v;
}

std::vector<double> Chart::center() const {
  std::vector<double> p(n);
  for (int i = 0; i < n; ++i) p[i] = 0.5 * (domain[i][0] + domain[i][1]);
  return p;
}

Chart make_chart(std::string name, std::vector<std::string> coords, std::vector<std::pair<std::string, double>> params,
                 const std::vector<std::vector<std::string>>& metric_text, std::vector<std::array<double, 2>> domain,
                 std::vector<bool> periodic, std::vector<AxisRule> quadrature) {
  Chart c;
  c.name = std::move(name);
  c.n = static_cast<int>(coords.size());
  c.coords = std::move(coords);
  c.params = std::move(params);
  c.domain = std::move(domain);
  c.periodic = std::move(periodic);
  c.quadrature = std::move(quadrature);
  c.g.assign(c.n * c.n, nullptr);
  auto syms = c.symbols();
  for (int i = 0; i < c.n; ++i) {
    for (int j = i; j < c.n; ++j) {
      Expr e = parse_expr(metric_text[i][j], syms);
      c.g[i * c.n + j] = e;
      c.g[j * c.n + i] = e;
    }
  }
  return c;
}

double min_metric_eigenvalue(const Chart& c, std::span<const double> point) {
  std::vector<double> slots(point.begin(), point.end());
  for (double v : c.param_values()) slots.push_back(v);
  auto syms = c.symbols();
  Eigen::MatrixXd G(c.n, c.n);
  for (int i = 0; i < c.n; ++i)
    for (int j = 0; j < c.n; ++j) G(i, j) = Program(c.metric(i, j), syms).eval(slots);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

void validate_chart(const Chart& c, int samples, unsigned seed) {
  if (c.n < 2 || c.n > 8) throw GeometryError("dimension out of range: " + std::to_string(c.n));
  if (static_cast<int>(c.coords.size()) != c.n || static_cast<int>(c.domain.size()) != c.n ||
      static_cast<int>(c.periodic.size()) != c.n)
    throw GeometryError("chart field sizes disagree with dimension");
  for (int i = 0; i < c.n; ++i)
    if (!(c.domain[i][1] > c.domain[i][0])) throw GeometryError("empty domain for " + c.coords[i]);
  std::mt19937_64 rng(seed);
  auto syms = c.symbols();
  for (int s = 0; s < samples; ++s) {
    std::vector<double> p(c.n);
    for (int i = 0; i < c.n; ++i) {
      double lo = c.domain[i][0], hi = c.domain[i][1];
      double margin = c.periodic[i] ? 0.0 : std::min(0.1, 0.25 * (hi - lo));
      p[i] = std::uniform_real_distribution<double>(lo + margin, hi - margin)(rng);
    }
    std::vector<double> slots = p;
    for (double v : c.param_values()) slots.push_back(v);
    for (int i = 0; i < c.n; ++i) {
      for (int j = i + 1; j < c.n; ++j) {
        double a = Program(c.metric(i, j), syms).eval(slots);
        double b = Program(c.metric(j, i), syms).eval(slots);
        if (std::abs(a - b) > 1e-14 * (1.0 + std::abs(a)))
          throw GeometryError("symmetry violated: g[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) +
                              "] != g[" + std::to_string(j + 1) + "][" + std::to_string(i + 1) + "]");
      }
    }
    double lam = min_metric_eigenvalue(c, p);
    if (!(lam > 1e-8)) throw GeometryError("positivity violated: minimum metric eigenvalue " + std::to_string(lam));
  }
}

// ---------------------------------------------------------------- active sets

ActiveSet ActiveSet::all(int n) {
  ActiveSet a;
  for (int i = 0; i < n; ++i) {
    a.vars.push_back(i);
    a.coord_to_var.push_back(i);
  }
  return a;
}

ActiveSet ActiveSet::from_exprs(const Chart& c, const std::vector<Expr>& extra) {
  ActiveSet a;
  a.coord_to_var.assign(c.n, -1);
  for (int i = 0; i < c.n; ++i) {
    bool used = false;
    for (const auto& e : c.g) used = used || references(e, c.coords[i]);
    for (const auto& e : extra) used = used || references(e, c.coords[i]);
    if (used) {
      a.coord_to_var[i] = static_cast<int>(a.vars.size());
      a.vars.push_back(i);
    }
  }
  return a;
}

JetEvaluator::JetEvaluator(const Chart& c, ActiveSet active, int order, int t_order)
    : chart_(&c), active_(std::move(active)), order_(order) {
  layout_ = &JetLayout::get(static_cast<int>(active_.vars.size()), order, t_order);
  auto syms = c.symbols();
  for (const auto& e : c.g) metric_prog_.emplace_back(e, syms);
  std::vector<double> p = c.center();
  set_point(p);
}

void JetEvaluator::set_point(std::span<const double> p) {
  slots_.clear();
  for (int i = 0; i < chart_->n; ++i) {
    int v = active_.coord_to_var[i];
    slots_.push_back(v >= 0 ? Jet::variable(*layout_, order_, v, p[i]) : Jet(*layout_, order_, p[i]));
  }
  for (auto& [name, val] : chart_->params) slots_.emplace_back(*layout_, order_, val);
}

Jet JetEvaluator::eval(const Program& p) const { return p.eval(slots_, *layout_, order_); }

Jet JetEvaluator::eval(const Expr& e) const { return eval(compile(e)); }

std::vector<Jet> JetEvaluator::metric() const {
  const int n = chart_->n;
  std::vector<Jet> g(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      g[i * n + j] = eval(metric_prog_[i * n + j]);
      if (j != i) g[j * n + i] = g[i * n + j];
    }
  }
  return g;
}

Jet JetEvaluator::t_variable() const {
  if (layout_->t_order() == 0) throw JetError("layout has no t variable");
  return Jet::variable(*layout_, order_, kMaxJetVars, 0.0);
}

// ---------------------------------------------------------------- tensors

JTensor JTensor::truncated(int q) const {
  JTensor r(n, rank);
  for (std::size_t i = 0; i < c.size(); ++i) r.c[i] = c[i].truncated(q);
  return r;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Tensor values(const JTensor& T) {
  Tensor r{T.n, T.rank, {}};
  r.v.reserve(T.c.size());
  for (const Jet& j : T.c) r.v.push_back(j.value());
  return r;
}

// ---------------------------------------------------------------- jet frame

JetFrame::JetFrame(std::vector<Jet> g, ActiveSet active) : active_(std::move(active)) {
  n_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(g.size()))));
  m_ = g[0].order();
  g_ = JTensor(n_, 2);
  g_.c = std::move(g);
}

Jet JetFrame::d(const Jet& f, int coord) const {
  int v = active_.coord_to_var[coord];
  if (v < 0) return Jet(f.layout(), f.order() - 1, 0.0);
  return f.dx(v);
}

const JTensor& JetFrame::ginv() const {
  if (ginv_) return *ginv_;
  const JetLayout& L = layout();
  const int n = n_, N = L.size(m_);
  std::vector<Eigen::MatrixXd> G(N, Eigen::MatrixXd(n, n)), H(N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int o = 0; o < N; ++o) G[o](i, j) = g_.at(i, j)[o];
  Eigen::LLT<Eigen::MatrixXd> llt(G[0]);
  if (llt.info() != Eigen::Success) throw GeometryError("singular or indefinite metric");
  Eigen::MatrixXd G0inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  H[0] = G0inv;
  const auto& T = L.terms();
  Eigen::MatrixXd S(n, n);
  for (int o = 1; o < N; ++o) {
    S.setZero();
    for (int t = L.term_begin(o), e = L.term_begin(o + 1); t < e; ++t) {
      if (T[t].a == 0) continue;
      S.noalias() += T[t].w * G[T[t].a] * H[T[t].b];
    }
    H[o] = -G0inv * S;
  }
  JTensor r(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Jet x(L, m_, 0.0);
      for (int o = 0; o < N; ++o) x[o] = 0.5 * (H[o](i, j) + H[o](j, i));
      r.at(i, j) = std::move(x);
    }
  }
  ginv_ = std::move(r);
  return *ginv_;
}

const JTensor& JetFrame::dg() const {
  if (dg_) return *dg_;
  if (m_ < 1) throw JetError("metric jets of order >= 1 needed for Christoffel symbols");
  JTensor r(n_, 3);
  for (int k = 0; k < n_; ++k)
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) {
        r.at(k, i, j) = d(g_.at(i, j), k);
        if (j != i) r.at(k, j, i) = r.at(k, i, j);
      }
  dg_ = std::move(r);
  return *dg_;
}

const JTensor& JetFrame::christoffel_lower() const {
  if (gam_low_) return *gam_low_;
  const JTensor& D = dg();
  JTensor r(n_, 3);
  for (int k = 0; k < n_; ++k)
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) {
        Jet x = D.at(i, j, k) + D.at(j, i, k) - D.at(k, i, j);
        x *= 0.5;
        r.at(k, i, j) = x;
        if (j != i) r.at(k, j, i) = std::move(x);
      }
  gam_low_ = std::move(r);
  return *gam_low_;
}

const JTensor& JetFrame::christoffel() const {
  if (gam_) return *gam_;
  const JTensor& GL = christoffel_lower();
  const JTensor& gi = ginv();
  JTensor r(n_, 3);
  for (int k = 0; k < n_; ++k)
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) {
        Jet x(layout(), m_ - 1, 0.0);
        for (int l = 0; l < n_; ++l) x.fma(gi.at(k, l), GL.at(l, i, j));
        r.at(k, i, j) = x;
        if (j != i) r.at(k, j, i) = std::move(x);
      }
  gam_ = std::move(r);
  return *gam_;
}

const std::vector<Jet>& JetFrame::contracted_christoffel() const {
  if (gam_con_) return *gam_con_;
  const JTensor& G = christoffel();
  const JTensor& gi = ginv();
  std::vector<Jet> r;
  for (int k = 0; k < n_; ++k) {
    Jet x(layout(), m_ - 1, 0.0);
    for (int i = 0; i < n_; ++i) {
      x.fma(gi.at(i, i), G.at(k, i, i));
      for (int j = i + 1; j < n_; ++j) x.fma(2.0 * gi.at(i, j), G.at(k, i, j));
    }
    r.push_back(std::move(x));
  }
  gam_con_ = std::move(r);
  return *gam_con_;
}

const JTensor& JetFrame::riemann() const {
  if (riem_) return *riem_;
  if (m_ < 2) throw JetError("metric jets of order >= 2 needed for curvature");
  const int n = n_;
  const JTensor& D = dg();
  const JTensor& GL = christoffel_lower();
  const JTensor& G = christoffel();
  std::map<std::array<int, 4>, Jet> dd;
  auto ddg = [&](int c, int e, int a, int b) -> const Jet& {
    std::array<int, 4> key{std::min(c, e), std::max(c, e), std::min(a, b), std::max(a, b)};
    auto it = dd.find(key);
    if (it != dd.end()) return it->second;
    return dd.emplace(key, d(D.at(key[1], key[2], key[3]), key[0])).first->second;
  };
  JTensor r(n, 4);
  Jet zero(layout(), m_ - 2, 0.0);
  for (auto& x : r.c) x = zero;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          if (k * n + l < i * n + j) continue;
          Jet x = ddg(j, k, i, l) + ddg(i, l, j, k) - ddg(i, k, j, l) - ddg(j, l, i, k);
          x *= 0.5;
          for (int q = 0; q < n; ++q) {
            x.fma(GL.at(q, j, k), G.at(q, i, l));
            Jet y = GL.at(q, j, l) * G.at(q, i, k);
            x -= y;
          }
          Jet mx = -x;
          r.at(i, j, k, l) = x;
          r.at(j, i, l, k) = x;
          r.at(k, l, i, j) = x;
          r.at(l, k, j, i) = x;
          r.at(j, i, k, l) = mx;
          r.at(i, j, l, k) = mx;
          r.at(l, k, i, j) = mx;
          r.at(k, l, j, i) = mx;
        }
  riem_ = std::move(r);
  return *riem_;
}

const JTensor& JetFrame::ricci() const {
  if (ric_) return *ric_;
  const JTensor& Rm = riemann();
  const JTensor& gi = ginv();
  JTensor r(n_, 2);
  for (int j = 0; j < n_; ++j)
    for (int l = j; l < n_; ++l) {
      Jet x(layout(), m_ - 2, 0.0);
      for (int i = 0; i < n_; ++i)
        for (int k = 0; k < n_; ++k)
          if (i != j && k != l) x.fma(gi.at(i, k), Rm.at(i, j, k, l));
      r.at(j, l) = x;
      if (l != j) r.at(l, j) = std::move(x);
    }
  ric_ = std::move(r);
  return *ric_;
}

const Jet& JetFrame::scalar() const {
  if (!R_) R_ = trace(ricci());
  return *R_;
}

const Jet& JetFrame::J() const {
  if (!J_) J_ = scalar() * (1.0 / (2.0 * (n_ - 1)));
  return *J_;
}

const JTensor& JetFrame::P() const {
  if (P_) return *P_;
  if (n_ < 3) throw GeometryError("Schouten tensor needs n >= 3");
  const JTensor& Ric = ricci();
  const Jet& j = J();
  JTensor r(n_, 2);
  for (int a = 0; a < n_; ++a)
    for (int b = a; b < n_; ++b) {
      Jet x = Ric.at(a, b) - j * g_.at(a, b);
      x *= 1.0 / (n_ - 2);
      r.at(a, b) = x;
      if (b != a) r.at(b, a) = std::move(x);
    }
  P_ = std::move(r);
  return *P_;
}

const JTensor& JetFrame::W() const {
  if (W_) return *W_;
  const int n = n_;
  const JTensor& Rm = riemann();
  const JTensor& Pt = P();
  JTensor r(n, 4);
  Jet zero(layout(), m_ - 2, 0.0);
  for (auto& x : r.c) x = zero;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          if (k * n + l < i * n + j) continue;
          Jet x = Rm.at(i, j, k, l);
          Jet y(layout(), m_ - 2, 0.0);
          y.fma(Pt.at(i, k), g_.at(j, l));
          y.fma(Pt.at(j, l), g_.at(i, k));
          Jet z(layout(), m_ - 2, 0.0);
          z.fma(Pt.at(i, l), g_.at(j, k));
          z.fma(Pt.at(j, k), g_.at(i, l));
          x -= y;
          x += z;
          Jet mx = -x;
          r.at(i, j, k, l) = x;
          r.at(j, i, l, k) = x;
          r.at(k, l, i, j) = x;
          r.at(l, k, j, i) = x;
          r.at(j, i, k, l) = mx;
          r.at(i, j, l, k) = mx;
          r.at(l, k, i, j) = mx;
          r.at(k, l, j, i) = mx;
        }
  W_ = std::move(r);
  return *W_;
}

const JTensor& JetFrame::nabla_P() const {
  if (!dP_) dP_ = nabla(P());
  return *dP_;
}

const JTensor& JetFrame::C() const {
  if (C_) return *C_;
  const JTensor& dP = nabla_P();
  JTensor r(n_, 3);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k) r.at(i, j, k) = dP.at(i, j, k) - dP.at(j, i, k);
  C_ = std::move(r);
  return *C_;
}

const JTensor& JetFrame::B() const {
  if (B_) return *B_;
  if (n_ < 4) throw GeometryError("Bach tensor needs n >= 4");
  const int n = n_;
  const JTensor& Ct = C();
  const int q = Ct.order() - 1;
  const JTensor& gi = ginv();
  const JTensor& G = christoffel();
  const auto& Gc = contracted_christoffel();
  // mixed Christoffel M^{ap}_i = g^{ab} Γ^p_{bi}
  JTensor M(n, 3);
  for (int a = 0; a < n; ++a)
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < n; ++i) {
        Jet x(layout(), q, 0.0);
        for (int b = 0; b < n; ++b) x.fma(gi.at(a, b), G.at(p, b, i));
        M.at(a, p, i) = std::move(x);
      }
  JTensor Pu = raise_all(P());
  const JTensor& Wt = W();
  JTensor r(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      // ∇^a C_aij
      Jet x(layout(), q, 0.0);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) x.fma(gi.at(a, b), d(Ct.at(a, i, j), b));
      for (int p = 0; p < n; ++p) {
        Jet y = Gc[p] * Ct.at(p, i, j);
        x -= y;
        for (int a = 0; a < n; ++a) {
          Jet z = M.at(a, p, i) * Ct.at(a, p, j);
          z.fma(M.at(a, p, j), Ct.at(a, i, p));
          x -= z;
        }
      }
      for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) x.fma(Wt.at(i, s, j, t), Pu.at(s, t));
      r.at(i, j) = x;
      if (j != i) r.at(j, i) = std::move(x);
    }
  B_ = std::move(r);
  return *B_;
}

Jet JetFrame::volume_density(int order) const {
  const int n = n_;
  std::vector<Jet> A(n * n);
  for (int i = 0; i < n * n; ++i) A[i] = g_.c[i].truncated(order);
  Jet det(layout(), order, 1.0);
  for (int k = 0; k < n; ++k) {
    const Jet& piv = A[k * n + k];
    if (!(piv.value() > 0.0)) throw GeometryError("singular or indefinite metric");
    det = det * piv;
    Jet inv = reciprocal(piv);
    for (int i = k + 1; i < n; ++i) {
      Jet f = A[i * n + k] * inv;
      for (int j = k + 1; j < n; ++j) A[i * n + j] -= f * A[k * n + j];
    }
  }
  return sqrt(det);
}

JTensor JetFrame::nabla(const JTensor& T) const {
  const int n = n_, r = T.rank;
  const int q = T.order() - 1;
  if (q < 0) throw JetError("jet order exhausted by covariant derivative");
  const JTensor& G = christoffel();
  JTensor out(n, r + 1);
  const int M = JTensor::ipow(n, r);
  std::vector<int> idx(r);
  for (int a = 0; a < n; ++a) {
    for (int I = 0; I < M; ++I) {
      int rem = I;
      for (int s = r - 1; s >= 0; --s) {
        idx[s] = rem % n;
        rem /= n;
      }
      Jet x = d(T.c[I], a);
      int stride = 1;
      for (int s = r - 1; s >= 0; --s) {
        for (int p = 0; p < n; ++p) {
          int J = I + (p - idx[s]) * stride;
          Jet y = G.at(p, a, idx[s]) * T.c[J];
          x -= y;
        }
        stride *= n;
      }
      out.c[a * M + I] = std::move(x);
    }
  }
  return out;
}

Jet JetFrame::laplacian(const Jet& f) const {
  const JTensor& gi = ginv();
  const auto& Gc = contracted_christoffel();
  Jet x(layout(), f.order() - 2, 0.0);
  std::vector<Jet> df(n_);
  for (int i = 0; i < n_; ++i) df[i] = d(f, i);
  for (int i = 0; i < n_; ++i) {
    x.fma(gi.at(i, i), d(df[i], i));
    for (int j = i + 1; j < n_; ++j) x.fma(2.0 * gi.at(i, j), d(df[j], i));
  }
  for (int k = 0; k < n_; ++k) {
    Jet y = Gc[k] * df[k];
    x -= y;
  }
  return x;
}

Jet JetFrame::divergence(const JTensor& w) const {
  const JTensor& gi = ginv();
  const auto& Gc = contracted_christoffel();
  Jet x(layout(), w.order() - 1, 0.0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) x.fma(gi.at(i, j), d(w.c[j], i));
  for (int k = 0; k < n_; ++k) {
    Jet y = Gc[k] * w.c[k];
    x -= y;
  }
  return x;
}

JTensor JetFrame::gradient(const Jet& f) const {
  JTensor r(n_, 1);
  for (int i = 0; i < n_; ++i) r.c[i] = d(f, i);
  return r;
}

JTensor JetFrame::raise(const JTensor& T, int slot) const {
  const int n = n_, r = T.rank;
  const JTensor& gi = ginv();
  int stride = JTensor::ipow(n, r - 1 - slot);
  JTensor out(n, r);
  const int M = static_cast<int>(T.c.size());
  for (int I = 0; I < M; ++I) {
    int a = (I / stride) % n;
    Jet x(layout(), T.order(), 0.0);
    for (int b = 0; b < n; ++b) x.fma(gi.at(a, b), T.c[I + (b - a) * stride]);
    out.c[I] = std::move(x);
  }
  return out;
}

JTensor JetFrame::raise_all(const JTensor& T) const {
  JTensor r = T;
  for (int s = 0; s < T.rank; ++s) r = raise(r, s);
  return r;
}

Jet JetFrame::dot(const JTensor& A, const JTensor& B) const {
  JTensor Bu = raise_all(B);
  Jet x(layout(), std::min(A.order(), B.order()), 0.0);
  for (std::size_t i = 0; i < A.c.size(); ++i) x.fma(A.c[i], Bu.c[i]);
  return x;
}

Jet JetFrame::trace(const JTensor& T) const {
  const JTensor& gi = ginv();
  Jet x(layout(), T.order(), 0.0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) x.fma(gi.at(i, j), T.at(i, j));
  return x;
}

// ---------------------------------------------------------------- pointwise API

std::shared_ptr<JetFrame> jet_frame(const Chart& chart, std::span<const double> point, int metric_order,
                                    const std::vector<Expr>& extra) {
  JetEvaluator ev(chart, ActiveSet::from_exprs(chart, extra), metric_order, 0);
  ev.set_point(point);
  return std::make_shared<JetFrame>(ev.metric(), ev.active());
}

CurvatureFrame curvature_frame(const Chart& chart, std::span<const double> point, int deriv_order) {
  const int base = chart.n >= 4 ? 4 : 3;
  if (deriv_order < 0 || base + deriv_order > kMaxJetOrder)
    throw JetError("jet order overflow: derivative order " + std::to_string(deriv_order));
  auto jf = jet_frame(chart, point, base + deriv_order);
  CurvatureFrame f;
  f.n = chart.n;
  f.point.assign(point.begin(), point.end());
  f.g = values(jf->g());
  f.ginv = values(jf->ginv());
  f.christoffel = values(jf->christoffel());
  f.riemann = values(jf->riemann());
  f.riemann_mixed = values(jf->raise(jf->riemann(), 2));
  f.ricci = values(jf->ricci());
  f.R = jf->scalar().value();
  f.J = jf->J().value();
  f.volume = jf->volume_density(0).value();
  if (chart.n >= 3) {
    f.P = values(jf->P());
    f.W = values(jf->W());
    f.C = values(jf->C());
  }
  if (chart.n >= 4) {
    f.B = values(jf->B());
    f.has_B = true;
  }
  auto chain = [&](JTensor T, int depth, std::vector<Tensor>& out) {
    for (int d = 1; d <= depth && T.order() >= 1; ++d) {
      T = jf->nabla(T);
      out.push_back(values(T));
    }
  };
  chain(jf->riemann(), deriv_order, f.nabla_Rm);
  if (chart.n >= 3) {
    chain(jf->P(), deriv_order, f.nabla_P);
    chain(jf->W(), deriv_order, f.nabla_W);
    chain(jf->C(), deriv_order, f.nabla_C);
  }
  if (chart.n >= 4) chain(jf->B(), deriv_order, f.nabla_B);
  f.jets = jf;
  return f;
}

Tensor divergence(const Chart& chart, std::span<const double> point, DivergenceSelector sel,
                  const std::vector<Expr>& field) {
  const int n = chart.n;
  switch (sel) {
    case DivergenceSelector::Weyl: {
      auto jf = jet_frame(chart, point, 3);
      JTensor dW = jf->nabla(jf->W().truncated(1));
      const JTensor& gi = jf->ginv();
      Tensor out{n, 3, std::vector<double>(n * n * n, 0.0)};
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int a = 0; a < n; ++a)
              for (int k = 0; k < n; ++k) s += gi.at(a, k).value() * dW.c[(((a * n + i) * n + j) * n + k) * n + l].value();
            out[(i * n + j) * n + l] = s;
          }
      return out;
    }
    case DivergenceSelector::Bach: {
      auto jf = jet_frame(chart, point, 5);
      JTensor dB = jf->nabla(jf->B().truncated(1));
      const JTensor& gi = jf->ginv();
      Tensor out{n, 1, std::vector<double>(n, 0.0)};
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int k = 0; k < n; ++k) s += gi.at(a, k).value() * dB.at(a, j, k).value();
        out[j] = s;
      }
      return out;
    }
    case DivergenceSelector::CottonSchouten:
    case DivergenceSelector::WeylCotton: {
      auto jf = jet_frame(chart, point, 4);
      JTensor V(n, 1);
      JTensor Cu = jf->raise_all(jf->C().truncated(1));
      if (sel == DivergenceSelector::CottonSchouten) {
        JTensor Pu = jf->raise_all(jf->P().truncated(1));
        const JTensor& Ct = jf->C();
        for (int k = 0; k < n; ++k) {
          Jet x(jf->layout(), 1, 0.0);
          for (int s = 0; s < n; ++s)
            for (int t = 0; t < n; ++t) x.fma(Ct.at(s, k, t), Pu.at(s, t));
          V.c[k] = std::move(x);
        }
      } else {
        const JTensor& Wt = jf->W();
        for (int l = 0; l < n; ++l) {
          Jet x(jf->layout(), 1, 0.0);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              for (int k = 0; k < n; ++k) x.fma(Wt.at(i, j, k, l), Cu.at(i, j, k));
          V.c[l] = std::move(x);
        }
      }
      return Tensor{n, 0, {jf->divergence(V).value()}};
    }
    case DivergenceSelector::Field: {
      if (static_cast<int>(field.size()) != n) throw GeometryError("field must have n components");
      JetEvaluator ev(chart, ActiveSet::from_exprs(chart, field), 1, 0);
      ev.set_point(point);
      JetFrame jf(ev.metric(), ev.active());
      JTensor w(n, 1);
      for (int i = 0; i < n; ++i) w.c[i] = ev.eval(field[i]);
      return Tensor{n, 0, {jf.divergence(w).value()}};
    }
  }
  return {};
}

Residual weyl_bianchi_residual(const Chart& chart, std::span<const double> point) {
  const int n = chart.n;
  if (n < 4) throw GeometryError("Weyl-Bianchi check needs n >= 4");
  auto jf = jet_frame(chart, point, 3);
  JTensor dW = jf->nabla(jf->W().truncated(1));
  Tensor C = values(jf->C());
  Tensor g = values(jf->g());
  auto w = [&](int m, int i, int j, int k, int l) { return dW.c[(((m * n + i) * n + j) * n + k) * n + l].value(); };
  auto c = [&](int i, int j, int k) { return C[(i * n + j) * n + k]; };
  auto gg = [&](int i, int j) { return g[i * n + j]; };
  Residual r;
  for (double x : values(dW).v) r.scale = std::max(r.scale, std::abs(x));
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double lhs = w(m, i, j, k, l) + w(i, j, m, k, l) + w(j, m, i, k, l);
            double rhs = c(i, m, k) * gg(j, l) + c(m, j, k) * gg(i, l) + c(j, i, k) * gg(m, l) -
                         c(i, m, l) * gg(j, k) - c(m, j, l) * gg(i, k) - c(j, i, l) * gg(m, k);
            r.residual = std::max(r.residual, std::abs(lhs - rhs));
          }
  return r;
}

}  // namespace cvi
