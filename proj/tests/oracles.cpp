#include "oracles.hpp"

#include <cmath>

namespace oracle {

Mat inverse(const Mat& a) {
  const int n = static_cast<int>(a.size());
  Mat m = a, inv(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    std::swap(inv[c], inv[piv]);
    double d = m[c][c];
    for (int k = 0; k < n; ++k) {
      m[c][k] /= d;
      inv[c][k] /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      double f = m[r][c];
      for (int k = 0; k < n; ++k) {
        m[r][k] -= f * m[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

namespace {

template <class F>
auto central(const F& f, std::vector<double> p, int axis, double h) {
  auto at = [&](double s) {
    auto q = p;
    q[axis] += s * h;
    return f(q);
  };
  auto a = at(-2), b = at(-1), c = at(1), d = at(2);
  // (f(-2h) - 8 f(-h) + 8 f(h) - f(2h)) / 12h, applied elementwise
  using T = decltype(a);
  T r = a;
  auto comb = [&](auto& out, const auto& x2m, const auto& x1m, const auto& x1p, const auto& x2p, auto&& self) -> void {
    if constexpr (std::is_same_v<std::decay_t<decltype(out)>, double>) {
      out = (x2m - 8.0 * x1m + 8.0 * x1p - x2p) / (12.0 * h);
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) self(out[i], x2m[i], x1m[i], x1p[i], x2p[i], self);
    }
  };
  comb(r, a, b, c, d, comb);
  return r;
}

using T3 = std::vector<Mat>;  // T3[a][b][c]

T3 christoffel(const MetricFn& g, const std::vector<double>& p, double h) {
  const int n = static_cast<int>(p.size());
  Mat gi = inverse(g(p));
  std::vector<Mat> dg(n);
  for (int k = 0; k < n; ++k) dg[k] = central(g, p, k, h);
  T3 G(n, Mat(n, std::vector<double>(n, 0.0)));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += gi[a][l] * (dg[b][l][c] + dg[c][l][b] - dg[l][b][c]);
        G[a][b][c] = 0.5 * s;
      }
  return G;
}

}  // namespace

Curvature curvature_fd(const MetricFn& g, const std::vector<double>& p, double h) {
  const int n = static_cast<int>(p.size());
  T3 G = christoffel(g, p, h);
  auto Gf = [&](const std::vector<double>& q) { return christoffel(g, q, h); };
  std::vector<T3> dG(n);
  for (int k = 0; k < n; ++k) dG[k] = central(Gf, p, k, h);
  Curvature out;
  out.ricci.assign(n, std::vector<double>(n, 0.0));
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) {
        // R^a_{bad}
        s += dG[a][a][d][b] - dG[d][a][a][b];
        for (int e = 0; e < n; ++e) s += G[a][a][e] * G[e][d][b] - G[a][d][e] * G[e][a][b];
      }
      out.ricci[b][d] = s;
    }
  Mat gi = inverse(g(p));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out.scalar += gi[a][b] * out.ricci[a][b];
  return out;
}

double poly_deriv(const std::vector<double>& coef, const std::vector<std::vector<int>>& expo,
                  const std::vector<int>& alpha, const std::vector<double>& p) {
  double total = 0.0;
  for (std::size_t t = 0; t < coef.size(); ++t) {
    double v = coef[t];
    for (std::size_t i = 0; i < p.size() && v != 0.0; ++i) {
      int e = expo[t][i], a = alpha[i];
      if (a > e) {
        v = 0.0;
        break;
      }
      double f = 1.0;
      for (int k = 0; k < a; ++k) f *= (e - k);
      v *= f * std::pow(p[i], e - a);
    }
    total += v;
  }
  return total;
}

}  // namespace oracle
