#include "cvi/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace cvi {

namespace {

std::uint64_t encode(const MultiIndex& a) {
  std::uint64_t k = 0;
  for (int i = 0; i <= kMaxJetVars; ++i) k = (k << 4) | a[i];
  return k;
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

JetLayout::JetLayout(int nx, int m, int mt) : nx_(nx), m_(m), mt_(mt) {
  // enumerate spatial multi-indices of degree <= m
  std::vector<MultiIndex> spatial;
  MultiIndex cur{};
  auto rec = [&](auto&& self, int var, int left) -> void {
    if (var == nx) {
      spatial.push_back(cur);
      return;
    }
    for (int e = 0; e <= left; ++e) {
      cur[var] = static_cast<std::uint8_t>(e);
      self(self, var + 1, left - e);
    }
    cur[var] = 0;
  };
  rec(rec, 0, m);
  auto deg = [nx](const MultiIndex& a) {
    int d = 0;
    for (int i = 0; i < nx; ++i) d += a[i];
    return d;
  };
  for (const auto& s : spatial) {
    for (int j = 0; j <= mt; ++j) {
      MultiIndex a = s;
      a[kMaxJetVars] = static_cast<std::uint8_t>(j);
      alpha_.push_back(a);
    }
  }
  std::sort(alpha_.begin(), alpha_.end(), [&](const MultiIndex& a, const MultiIndex& b) {
    int da = deg(a), db = deg(b);
    if (da != db) return da < db;
    if (a[kMaxJetVars] != b[kMaxJetVars]) return a[kMaxJetVars] < b[kMaxJetVars];
    return std::lexicographical_compare(b.begin(), b.begin() + nx, a.begin(), a.begin() + nx);
  });
  const int N = static_cast<int>(alpha_.size());
  lookup_.reserve(N);
  for (int i = 0; i < N; ++i) lookup_.emplace_back(encode(alpha_[i]), i);
  std::sort(lookup_.begin(), lookup_.end());

  upto_.assign(m + 1, 0);
  for (int i = 0; i < N; ++i) {
    for (int q = deg(alpha_[i]); q <= m; ++q) upto_[q] = i + 1;
  }

  // Leibniz terms: ∂^γ(fg) = Σ_{β≤γ} C(γ,β) ∂^β f ∂^{γ-β} g
  term_begin_.assign(N + 1, 0);
  for (int o = 0; o < N; ++o) {
    term_begin_[o] = static_cast<int>(terms_.size());
    const MultiIndex& g = alpha_[o];
    MultiIndex b{};
    auto sub = [&](auto&& self, int var) -> void {
      if (var > kMaxJetVars) {
        MultiIndex c{};
        double w = 1.0;
        for (int i = 0; i <= kMaxJetVars; ++i) {
          c[i] = static_cast<std::uint8_t>(g[i] - b[i]);
          w *= binom(g[i], b[i]);
        }
        terms_.push_back({index(b), index(c), w});
        return;
      }
      for (int e = 0; e <= g[var]; ++e) {
        b[var] = static_cast<std::uint8_t>(e);
        self(self, var + 1);
      }
      b[var] = 0;
    };
    sub(sub, 0);
  }
  term_begin_[N] = static_cast<int>(terms_.size());

  shift_.assign(nx, std::vector<int>(N, -1));
  for (int v = 0; v < nx; ++v) {
    for (int i = 0; i < N; ++i) {
      MultiIndex a = alpha_[i];
      if (deg(a) + 1 > m) continue;
      a[v] += 1;
      shift_[v][i] = index(a);
    }
  }
}

int JetLayout::index(const MultiIndex& a) const {
  auto key = encode(a);
  auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(key, -1));
  if (it == lookup_.end() || it->first != key) return -1;
  return it->second;
}

int JetLayout::t_index(int j) const {
  if (j > mt_) return -1;
  MultiIndex a{};
  a[kMaxJetVars] = static_cast<std::uint8_t>(j);
  return index(a);
}

const JetLayout& JetLayout::get(int nx, int m, int mt) {
  if (m < 0 || m > kMaxJetOrder) throw JetError("jet order overflow: requested " + std::to_string(m));
  if (nx < 0 || nx > kMaxJetVars) throw JetError("too many jet variables: " + std::to_string(nx));
  if (mt < 0 || mt > 2) throw JetError("t-order must be 0, 1 or 2");
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::unique_ptr<JetLayout>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{nx, m, mt}];
  if (!slot) slot.reset(new JetLayout(nx, m, mt));
  return *slot;
}

Jet::Jet(const JetLayout& layout, int order, double c) : layout_(&layout), order_(order) {
  if (order > layout.max_order() || order < 0) throw JetError("jet order outside layout");
  v_.assign(layout.size(order), 0.0);
  v_[0] = c;
}

Jet Jet::variable(const JetLayout& layout, int order, int var, double at) {
  Jet j(layout, order, at);
  MultiIndex a{};
  a[var] = 1;
  int idx = layout.index(a);
  if (idx >= 0 && idx < j.size()) j.v_[idx] = 1.0;
  return j;
}

double Jet::deriv(const MultiIndex& a) const {
  int idx = layout_->index(a);
  if (idx < 0 || idx >= size()) return 0.0;
  return v_[idx];
}

double Jet::t_deriv(int j) const {
  int idx = layout_->t_index(j);
  return idx < 0 ? 0.0 : v_[idx];
}

Jet Jet::truncated(int order) const {
  if (order >= order_) return *this;
  Jet r;
  r.layout_ = layout_;
  r.order_ = order;
  r.v_.assign(v_.begin(), v_.begin() + layout_->size(order));
  return r;
}

Jet Jet::dx(int var) const {
  if (order_ == 0) throw JetError("cannot differentiate an order-0 jet");
  Jet r;
  r.layout_ = layout_;
  r.order_ = order_ - 1;
  const int n = layout_->size(order_ - 1);
  r.v_.resize(n);
  for (int i = 0; i < n; ++i) r.v_[i] = v_[layout_->shift(var, i)];
  return r;
}

Jet& Jet::operator+=(const Jet& o) {
  if (o.order_ < order_) *this = truncated(o.order_);
  for (int i = 0; i < size(); ++i) v_[i] += o.v_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  if (o.order_ < order_) *this = truncated(o.order_);
  for (int i = 0; i < size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

void Jet::axpy(double s, const Jet& o) {
  if (o.order_ < order_) *this = truncated(o.order_);
  for (int i = 0; i < size(); ++i) v_[i] += s * o.v_[i];
}

void Jet::fma(const Jet& a, const Jet& b) {
  int q = std::min({order_, a.order_, b.order_});
  if (q < order_) *this = truncated(q);
  const auto& T = layout_->terms();
  const double* A = a.v_.data();
  const double* B = b.v_.data();
  const int n = size();
  for (int o = 0; o < n; ++o) {
    double acc = 0.0;
    for (int t = layout_->term_begin(o), e = layout_->term_begin(o + 1); t < e; ++t) {
      acc += T[t].w * A[T[t].a] * B[T[t].b];
    }
    v_[o] += acc;
  }
}

Jet operator*(const Jet& a, const Jet& b) {
  Jet r(*a.layout_, std::min(a.order_, b.order_), 0.0);
  r.fma(a, b);
  return r;
}

Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

int nilpotency_degree(const Jet& x) { return x.order() + x.layout().t_order(); }

Jet compose(const Jet& x, const std::vector<double>& derivs) {
  const int K = std::min<int>(nilpotency_degree(x), static_cast<int>(derivs.size()) - 1);
  Jet u = x;
  u[0] = 0.0;
  std::vector<double> c(K + 1);
  double fact = 1.0;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    c[k] = derivs[k] / fact;
  }
  Jet r(x.layout(), x.order(), c[K]);
  for (int k = K - 1; k >= 0; --k) {
    r = r * u;
    r[0] += c[k];
  }
  return r;
}

Jet sin(const Jet& x) {
  const int K = nilpotency_degree(x);
  const double s = std::sin(x.value()), c = std::cos(x.value());
  std::vector<double> d(K + 1);
  const double cyc[4] = {s, c, -s, -c};
  for (int k = 0; k <= K; ++k) d[k] = cyc[k % 4];
  return compose(x, d);
}

Jet cos(const Jet& x) {
  const int K = nilpotency_degree(x);
  const double s = std::sin(x.value()), c = std::cos(x.value());
  std::vector<double> d(K + 1);
  const double cyc[4] = {c, -s, -c, s};
  for (int k = 0; k <= K; ++k) d[k] = cyc[k % 4];
  return compose(x, d);
}

Jet exp(const Jet& x) {
  const int K = nilpotency_degree(x);
  return compose(x, std::vector<double>(K + 1, std::exp(x.value())));
}

Jet log(const Jet& x) {
  const double a = x.value();
  if (!(a > 0.0)) throw DomainError("log of non-positive value");
  const int K = nilpotency_degree(x);
  std::vector<double> d(K + 1);
  d[0] = std::log(a);
  double f = 1.0;  // (k-1)!
  for (int k = 1; k <= K; ++k) {
    if (k > 1) f *= (k - 1);
    d[k] = ((k % 2) ? 1.0 : -1.0) * f / std::pow(a, k);
  }
  return compose(x, d);
}

Jet pow(const Jet& x, double p) {
  if (p == std::round(p) && std::abs(p) <= 64) return powi(x, static_cast<int>(p));
  const double a = x.value();
  if (!(a > 0.0)) throw DomainError("non-integer power of non-positive value");
  const int K = nilpotency_degree(x);
  std::vector<double> d(K + 1);
  double coef = 1.0;
  for (int k = 0; k <= K; ++k) {
    d[k] = coef * std::pow(a, p - k);
    coef *= (p - k);
  }
  return compose(x, d);
}

Jet sqrt(const Jet& x) {
  if (!(x.value() > 0.0)) {
    if (x.value() == 0.0 && nilpotency_degree(x) == 0) return x;
    throw DomainError("sqrt of non-positive value");
  }
  return pow(x, 0.5);
}

Jet reciprocal(const Jet& x) {
  const double a = x.value();
  if (a == 0.0) throw DomainError("division by zero");
  const int K = nilpotency_degree(x);
  std::vector<double> d(K + 1);
  double coef = 1.0;
  for (int k = 0; k <= K; ++k) {
    d[k] = coef / std::pow(a, k + 1);
    coef *= -(k + 1);
  }
  return compose(x, d);
}

Jet powi(const Jet& x, int p) {
  if (p < 0) return reciprocal(powi(x, -p));
  Jet r(x.layout(), x.order(), 1.0);
  Jet b = x;
  while (p > 0) {
    if (p & 1) r = r * b;
    p >>= 1;
    if (p) b = b * b;
  }
  return r;
}

std::string to_string(const MultiIndex& a, int nvars) {
  std::string s = "(";
  for (int i = 0; i < nvars; ++i) {
    if (i) s += ",";
    s += std::to_string(a[i]);
  }
  s += ";t" + std::to_string(a[kMaxJetVars]) + ")";
  return s;
}

}  // namespace cvi
