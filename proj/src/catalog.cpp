#include "cvi/catalog.hpp"

#include <algorithm>
#include <cmath>

namespace cvi {

const std::vector<InvariantEntry>& catalog() {
  // id, name, k, min_dim, metric order, cvi, pointwise conformal, constant at Einstein, Einstein polynomial
  static const std::vector<InvariantEntry> table = {
      {Inv::J, "J", 1, 2, 2, true, false, true, true},
      {Inv::R, "R", 1, 2, 2, true, false, true, true},
      {Inv::Sigma2, "sigma2", 2, 4, 2, true, false, true, true},
      {Inv::Q4, "Q4", 2, 4, 4, true, false, true, true},
      {Inv::W2, "W2", 2, 4, 2, true, true, false, false},
      {Inv::V3, "v3", 3, 6, 4, true, false, true, true},
      {Inv::Q6, "Q6", 3, 6, 6, true, false, true, true},
      {Inv::I1, "I1", 3, 5, 4, true, false, true, true},
      {Inv::I2, "I2", 3, 5, 4, true, false, true, true},
      {Inv::K1, "K1", 3, 5, 4, true, false, true, true},
      {Inv::K2, "K2", 3, 5, 4, true, false, true, true},
      {Inv::K3, "K3", 3, 5, 3, true, false, false, false},
      {Inv::L1, "L1", 3, 5, 2, true, true, false, false},
      {Inv::L2, "L2", 3, 5, 2, true, true, false, false},
      {Inv::L3, "L3", 3, 5, 4, true, true, false, false},
  };
  return table;
}

const InvariantEntry& entry(Inv id) {
  for (const auto& e : catalog())
    if (e.id == id) return e;
  throw CatalogError("unknown invariant");
}

const InvariantEntry& entry(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return e;
  throw CatalogError("unknown invariant '" + name + "'");
}

std::vector<Inv> cvi_ids() {
  return {Inv::J, Inv::Sigma2, Inv::Q4, Inv::W2, Inv::V3, Inv::Q6, Inv::I1,
          Inv::I2, Inv::K1, Inv::K2, Inv::K3, Inv::L1, Inv::L2, Inv::L3};
}

const std::array<std::string, kBasis6>& basis6_names() {
  static const std::array<std::string, kBasis6> names = {
      "J^3",     "J|P|^2",  "trP^3",    "<B,P>",     "-J*LapJ",        "W.P^2",          "J|W|^2",     "L1", "L2",
      "L3",      "-LapJ^2", "-Lap|P|^2", "-Lap|W|^2", "div(P(gradJ))", "div(C_sit P^st)", "div(W_ijkl C^ijk)", "Lap^2J"};
  return names;
}

void check_dimension(Inv id, int n) {
  const auto& e = entry(id);
  if (n < e.min_dim)
    throw CatalogError(e.name + " needs dimension >= " + std::to_string(e.min_dim) + ", got " + std::to_string(n));
}

// ---------------------------------------------------------------- context

InvariantContext::InvariantContext(const JetFrame& F) : F_(F), n_(F.n()) {}

template <class Fn>
Jet InvariantContext::memo(const std::string& key, int q, Fn&& fn) {
  auto k = std::make_pair(key, q);
  auto it = memo_.find(k);
  if (it != memo_.end()) return it->second;
  Jet v = fn();
  memo_.emplace(k, v);
  return v;
}

namespace {
JTensor trunc(const JTensor& T, int q) {
  if (q > T.order()) throw JetError("jet order exhausted: need " + std::to_string(q) + ", have " + std::to_string(T.order()));
  return q == T.order() ? T : T.truncated(q);
}
}  // namespace

const JTensor& InvariantContext::T(const std::string& name, int q) {
  auto k = std::make_pair(name, q);
  auto it = tmemo_.find(k);
  if (it != tmemo_.end()) return it->second;
  const int n = n_;
  JTensor r;
  if (name == "g") {
    r = trunc(F_.g(), q);
  } else if (name == "ginv") {
    r = trunc(F_.ginv(), q);
  } else if (name == "P") {
    r = trunc(F_.P(), q);
  } else if (name == "W") {
    r = trunc(F_.W(), q);
  } else if (name == "C") {
    r = trunc(F_.C(), q);
  } else if (name == "B") {
    r = trunc(F_.B(), q);
  } else if (name == "Pmix") {  // P^i_j
    const JTensor& gi = T("ginv", q);
    const JTensor& P = T("P", q);
    r = JTensor(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Jet x(F_.layout(), q, 0.0);
        for (int a = 0; a < n; ++a) x.fma(gi.at(i, a), P.at(a, j));
        r.at(i, j) = std::move(x);
      }
  } else if (name == "Pu") {
    const JTensor& M = T("Pmix", q);
    const JTensor& gi = T("ginv", q);
    r = JTensor(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Jet x(F_.layout(), q, 0.0);
        for (int a = 0; a < n; ++a) x.fma(M.at(i, a), gi.at(a, j));
        r.at(i, j) = x;
        r.at(j, i) = std::move(x);
      }
  } else if (name == "Wu") {
    r = F_.raise_all(T("W", q));
  } else if (name == "Wmix") {  // W_ij^kl
    r = F_.raise(F_.raise(T("W", q), 2), 3);
  } else if (name == "Wcross") {  // W_i^k_j^l at (i,k,j,l)
    r = F_.raise(F_.raise(T("W", q), 1), 3);
  } else if (name == "Cu") {
    r = F_.raise_all(T("C", q));
  } else {
    throw CatalogError("unknown tensor " + name);
  }
  return tmemo_.emplace(k, std::move(r)).first->second;
}

Jet InvariantContext::lap(const Jet& f) { return F_.laplacian(f); }

Jet InvariantContext::J(int q) {
  return memo("J", q, [&] {
    const Jet& j = F_.J();
    if (q > j.order()) throw JetError("jet order exhausted for J");
    return j.truncated(q);
  });
}

Jet InvariantContext::P2(int q) {
  return memo("P2", q, [&] {
    const JTensor& M = T("Pmix", q);
    Jet x(F_.layout(), q, 0.0);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) x.fma(M.at(i, j), M.at(j, i));
    return x;
  });
}

Jet InvariantContext::trP3(int q) {
  return memo("trP3", q, [&] {
    const JTensor& M = T("Pmix", q);
    Jet x(F_.layout(), q, 0.0);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        Jet mm(F_.layout(), q, 0.0);
        for (int k = 0; k < n_; ++k) mm.fma(M.at(j, k), M.at(k, i));
        x.fma(M.at(i, j), mm);
      }
    return x;
  });
}

Jet InvariantContext::BP(int q) {
  return memo("BP", q, [&] {
    const JTensor& B = T("B", q);
    const JTensor& Pu = T("Pu", q);
    Jet x(F_.layout(), q, 0.0);
    for (int i = 0; i < n_ * n_; ++i) x.fma(B.c[i], Pu.c[i]);
    return x;
  });
}

Jet InvariantContext::W2(int q) {
  return memo("W2", q, [&] {
    const JTensor& W = T("W", q);
    const JTensor& Wu = T("Wu", q);
    Jet x(F_.layout(), q, 0.0);
    for (std::size_t i = 0; i < W.c.size(); ++i) x.fma(W.c[i], Wu.c[i]);
    return x;
  });
}

Jet InvariantContext::WP2(int q) {
  return memo("WP2", q, [&] {
    const JTensor& W = T("W", q);
    const JTensor& Pu = T("Pu", q);
    const int n = n_;
    Jet x(F_.layout(), q, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        Jet y(F_.layout(), q, 0.0);
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) y.fma(W.at(i, j, k, l), Pu.at(j, l));
        x.fma(y, Pu.at(i, k));
      }
    return x;
  });
}

Jet InvariantContext::W2P(int q) {
  return memo("W2P", q, [&] {
    const JTensor& W = T("W", q);
    const JTensor& Wu = T("Wu", q);
    const JTensor& M = T("Pmix", q);
    const int n = n_, n3 = n * n * n;
    Jet x(F_.layout(), q, 0.0);
    for (int m = 0; m < n; ++m)
      for (int r = 0; r < n3; ++r) {
        Jet y(F_.layout(), q, 0.0);
        for (int i = 0; i < n; ++i) y.fma(M.at(i, m), W.c[i * n3 + r]);
        x.fma(y, Wu.c[m * n3 + r]);
      }
    return x;
  });
}

Jet InvariantContext::C2(int q) {
  return memo("C2", q, [&] {
    const JTensor& C = T("C", q);
    const JTensor& Cu = T("Cu", q);
    Jet x(F_.layout(), q, 0.0);
    for (std::size_t i = 0; i < C.c.size(); ++i) x.fma(C.c[i], Cu.c[i]);
    return x;
  });
}

namespace {
// tr(X³) for a square matrix of jets
Jet trace_cube(const std::vector<Jet>& X, int N, const JetLayout& L, int q) {
  Jet x(L, q, 0.0);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      if (X[a * N + b].empty()) continue;
      Jet y(L, q, 0.0);
      for (int c = 0; c < N; ++c) y.fma(X[b * N + c], X[c * N + a]);
      x.fma(X[a * N + b], y);
    }
  return x;
}
}  // namespace

Jet InvariantContext::L1(int q) {
  return memo("L1", q, [&] {
    const JTensor& Wm = T("Wmix", q);
    const int n = n_;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
    const int N = static_cast<int>(pairs.size());
    std::vector<Jet> X(N * N);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) X[a * N + b] = Wm.at(pairs[a].first, pairs[a].second, pairs[b].first, pairs[b].second);
    Jet r = trace_cube(X, N, F_.layout(), q);
    return r * 8.0;
  });
}

Jet InvariantContext::L2(int q) {
  return memo("L2", q, [&] {
    const JTensor& Wc = T("Wcross", q);
    const int n = n_, N = n * n;
    std::vector<Jet> X(N * N);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) X[(i * n + j) * N + k * n + l] = Wc.at(i, k, j, l);
    return trace_cube(X, N, F_.layout(), q);
  });
}

Jet InvariantContext::lapJ(int q) {
  return memo("lapJ", q, [&] { return lap(J(q + 2)); });
}

Jet InvariantContext::lap2J(int q) {
  return memo("lap2J", q, [&] { return lap(lapJ(q + 2)); });
}

Jet InvariantContext::lapJ2(int q) {
  return memo("lapJ2", q, [&] {
    Jet j = J(q + 2);
    return lap(j * j);
  });
}

Jet InvariantContext::lapP2(int q) {
  return memo("lapP2", q, [&] { return lap(P2(q + 2)); });
}

Jet InvariantContext::lapW2(int q) {
  return memo("lapW2", q, [&] { return lap(W2(q + 2)); });
}

Jet InvariantContext::divPdJ(int q) {
  return memo("divPdJ", q, [&] {
    const int n = n_;
    Jet j = J(q + 2);
    const JTensor& gi = T("ginv", q + 1);
    const JTensor& P = T("P", q + 1);
    std::vector<Jet> dj(n);
    for (int k = 0; k < n; ++k) dj[k] = F_.d(j, k);
    std::vector<Jet> up(n);
    for (int a = 0; a < n; ++a) {
      up[a] = Jet(F_.layout(), q + 1, 0.0);
      for (int k = 0; k < n; ++k) up[a].fma(gi.at(a, k), dj[k]);
    }
    JTensor om(n, 1);
    for (int i = 0; i < n; ++i) {
      Jet x(F_.layout(), q + 1, 0.0);
      for (int a = 0; a < n; ++a) x.fma(P.at(i, a), up[a]);
      om.c[i] = std::move(x);
    }
    return F_.divergence(om);
  });
}

Jet InvariantContext::divCP(int q) {
  return memo("divCP", q, [&] {
    const int n = n_;
    const JTensor& C = T("C", q + 1);
    const JTensor& Pu = T("Pu", q + 1);
    JTensor V(n, 1);
    for (int k = 0; k < n; ++k) {
      Jet x(F_.layout(), q + 1, 0.0);
      for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) x.fma(C.at(s, k, t), Pu.at(s, t));
      V.c[k] = std::move(x);
    }
    return F_.divergence(V);
  });
}

Jet InvariantContext::divWC(int q) {
  return memo("divWC", q, [&] {
    const int n = n_;
    const JTensor& W = T("W", q + 1);
    const JTensor& Cu = T("Cu", q + 1);
    JTensor V(n, 1);
    for (int l = 0; l < n; ++l) {
      Jet x(F_.layout(), q + 1, 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) x.fma(W.at(i, j, k, l), Cu.at(i, j, k));
      V.c[l] = std::move(x);
    }
    return F_.divergence(V);
  });
}

Jet InvariantContext::eval(Inv id, int q) {
  const double n = n_;
  check_dimension(id, n_);
  switch (id) {
    case Inv::J: return J(q);
    case Inv::R: return J(q) * (2.0 * (n - 1.0));
    case Inv::Sigma2: {
      Jet j = J(q);
      return 0.5 * (j * j - P2(q));
    }
    case Inv::Q4: {
      Jet j = J(q);
      return -1.0 * lapJ(q) - 2.0 * P2(q) + (n / 2.0) * (j * j);
    }
    case Inv::W2: return W2(q);
    case Inv::V3: {
      Jet j = J(q);
      return (1.0 / 6.0) * (j * j * j) - 0.5 * (j * P2(q)) + (1.0 / 3.0) * trP3(q) + (1.0 / (3.0 * (n - 4.0))) * BP(q);
    }
    case Inv::Q6: {
      Jet j = J(q);
      Jet r = lap2J(q);
      r.axpy(-(n - 6.0) / 2.0, j * lapJ(q));
      r.axpy(-(n + 2.0) / 2.0, lapJ2(q));
      r.axpy(8.0, divPdJ(q));
      r.axpy(4.0, lapP2(q));
      r.axpy((n * n - 4.0) / 4.0, j * j * j);
      r.axpy(-4.0 * n, j * P2(q));
      r.axpy(16.0, trP3(q));
      r.axpy(16.0 / (n - 4.0), BP(q));
      return r;
    }
    case Inv::I1: {
      Jet j = J(q);
      return -1.0 * lapJ2(q) + ((n - 6.0) / 3.0) * (j * j * j);
    }
    case Inv::I2: {
      Jet j = J(q);
      return -1.0 * lapP2(q) - 2.0 * divPdJ(q) - lapJ2(q) + (n - 6.0) * (j * P2(q));
    }
    case Inv::K1: return 3.0 * (n - 4.0) * divCP(q) + (n - 6.0) * BP(q);
    case Inv::K2: return 2.0 * (n - 3.0) * divCP(q) + divWC(q) + (n - 6.0) * WP2(q);
    case Inv::K3: return -1.0 * (W2P(q) - 0.25 * (W2(q) * J(q))) + ((n - 4.0) / 2.0) * C2(q);
    case Inv::L1: return L1(q);
    case Inv::L2: return L2(q);
    case Inv::L3: {
      Jet r = -0.5 * lapW2(q);
      r.axpy(-2.0 * (n - 10.0), divWC(q));
      r.axpy(2.0 * (n - 10.0), W2P(q));
      r.axpy(2.0, J(q) * W2(q));
      r.axpy(-2.0 * (n - 5.0) * (n - 10.0), C2(q));
      return r;
    }
  }
  throw CatalogError("unknown invariant");
}

Jet InvariantContext::basis6(int idx, int q) {
  switch (idx) {
    case 0: {
      Jet j = J(q);
      return j * j * j;
    }
    case 1: return J(q) * P2(q);
    case 2: return trP3(q);
    case 3: return BP(q);
    case 4: return -1.0 * (J(q) * lapJ(q));
    case 5: return WP2(q);
    case 6: return J(q) * W2(q);
    case 7: return L1(q);
    case 8: return L2(q);
    case 9: return eval(Inv::L3, q);
    case 10: return -1.0 * lapJ2(q);
    case 11: return -1.0 * lapP2(q);
    case 12: return -1.0 * lapW2(q);
    case 13: return divPdJ(q);
    case 14: return divCP(q);
    case 15: return divWC(q);
    case 16: return lap2J(q);
  }
  throw CatalogError("basis index out of range");
}

// ---------------------------------------------------------------- pointwise API

double eval_invariant(Inv id, const Chart& chart, std::span<const double> point) {
  check_dimension(id, chart.n);
  auto jf = jet_frame(chart, point, entry(id).metric_order);
  InvariantContext ctx(*jf);
  return ctx.eval(id, 0).value();
}

std::array<double, kBasis6> eval_riem_basis6(const Chart& chart, std::span<const double> point) {
  if (chart.n < 5) throw CatalogError("weight -6 basis needs dimension >= 5");
  auto jf = jet_frame(chart, point, 6);
  InvariantContext ctx(*jf);
  std::array<double, kBasis6> out{};
  for (int i = 0; i < kBasis6; ++i) out[i] = ctx.basis6(i, 0).value();
  return out;
}

Chart scale_metric(const Chart& chart, double s) {
  Chart c = chart;
  for (auto& e : c.g) e = mul(constant(s), e);
  return c;
}

double homogeneity_check(Inv id, const Chart& chart, double c, const std::vector<std::vector<double>>& points) {
  if (!(c > 0)) throw std::invalid_argument("homogeneity_check: c must be positive");
  Chart scaled = scale_metric(chart, c * c);
  const int k = entry(id).k;
  double worst = 0.0;
  for (const auto& p : points) {
    double a = eval_invariant(id, chart, p);
    double b = eval_invariant(id, scaled, p);
    double r = std::abs(b - std::pow(c, -2 * k) * a) / std::max(1.0, std::abs(a));
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace cvi
