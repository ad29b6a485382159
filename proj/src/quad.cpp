#include "cvi/quad.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace cvi {

Profile parse_profile(const std::string& s) {
  if (s == "smoke") return Profile::Smoke;
  if (s == "standard") return Profile::Standard;
  if (s == "deep") return Profile::Deep;
  throw std::invalid_argument("unknown profile '" + s + "'");
}

std::string to_string(Profile p) {
  switch (p) {
    case Profile::Smoke: return "smoke";
    case Profile::Standard: return "standard";
    case Profile::Deep: return "deep";
  }
  return "?";
}

Rule1D gauss_legendre(int m, double a, double b) {
  Rule1D r;
  r.x.resize(m);
  r.w.resize(m);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (z * p1 - p0) / (z * z - 1.0);
    }
    // ascending order in x
    r.x[m - 1 - i] = 0.5 * (a + b) + 0.5 * (b - a) * z;
    r.w[m - 1 - i] = (b - a) / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

Rule1D trapezoid(int m, double a, double b) {
  Rule1D r;
  double h = (b - a) / m;
  for (int i = 0; i < m; ++i) {
    r.x.push_back(a + i * h);
    r.w.push_back(h);
  }
  return r;
}

int profile_nodes(const AxisRule& r, Profile p) {
  switch (p) {
    case Profile::Smoke: return std::max(2, r.nodes / 2);
    case Profile::Standard: return r.nodes;
    case Profile::Deep: return 2 * r.nodes;
  }
  return r.nodes;
}

Rule1D axis_rule(const Chart& c, int axis, Profile p, int refine) {
  const AxisRule& ar = c.quadrature.at(axis);
  int m = profile_nodes(ar, p) * refine;
  double a = c.domain[axis][0], b = c.domain[axis][1];
  return ar.kind == AxisRule::Gauss ? gauss_legendre(m, a, b) : trapezoid(m, a, b);
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  std::size_t h = v.size() / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

namespace {

struct Plan {
  std::vector<int> full, sym;
  std::vector<Rule1D> rules;  // per axis
  double collapsed_weight = 1.0;
  std::vector<double> rep;  // representative coordinate per axis
};

Plan make_plan(const Chart& c, const QuadOptions& opt) {
  Plan pl;
  if (c.quadrature.size() != static_cast<std::size_t>(c.n)) throw QuadratureError("chart has no quadrature rule");
  std::vector<int> kind(c.n, 0);  // 0 full, 1 collapsed, 2 symmetric
  if (!opt.depends.empty()) {
    std::fill(kind.begin(), kind.end(), 1);
    for (int a : opt.depends) kind.at(a) = 0;
  }
  for (int a : opt.symmetric)
    if (kind.at(a) == 0) kind[a] = 2;
  for (int a = 0; a < c.n; ++a) {
    pl.rules.push_back(axis_rule(c, a, opt.profile, opt.refine));
    pl.rep.push_back(0.5 * (c.domain[a][0] + c.domain[a][1]));
    if (kind[a] == 0) pl.full.push_back(a);
    if (kind[a] == 2) pl.sym.push_back(a);
    if (kind[a] == 1) {
      double s = 0.0;
      for (double w : pl.rules[a].w) s += w;
      pl.collapsed_weight *= s;
    }
  }
  return pl;
}

// iterate the tensor grid over `axes`, calling fn(point, weight)
template <class F>
void for_grid(const Plan& pl, const std::vector<int>& axes, std::vector<double>& point, F&& fn) {
  const int m = static_cast<int>(axes.size());
  std::vector<int> idx(m, 0);
  if (m == 0) {
    fn(point, 1.0);
    return;
  }
  for (;;) {
    double w = 1.0;
    for (int q = 0; q < m; ++q) {
      point[axes[q]] = pl.rules[axes[q]].x[idx[q]];
      w *= pl.rules[axes[q]].w[idx[q]];
    }
    fn(point, w);
    int q = m - 1;
    while (q >= 0 && ++idx[q] == static_cast<int>(pl.rules[axes[q]].x.size())) idx[q--] = 0;
    if (q < 0) break;
  }
}

struct DensityEval {
  const Chart& c;
  std::vector<Program> prog;
  explicit DensityEval(const Chart& c) : c(c) {
    auto syms = c.symbols();
    for (const auto& e : c.g) prog.emplace_back(e, syms);
  }
  double operator()(std::span<const double> p) const {
    std::vector<double> slots(p.begin(), p.end());
    for (double v : c.param_values()) slots.push_back(v);
    Eigen::MatrixXd G(c.n, c.n);
    for (int i = 0; i < c.n; ++i)
      for (int j = 0; j < c.n; ++j) G(i, j) = prog[i * c.n + j].eval(slots);
    return std::sqrt(std::abs(G.determinant()));
  }
};

}  // namespace

long count_nodes(const Chart& c, const QuadOptions& opt) {
  Plan pl = make_plan(c, opt);
  long k = 1;
  for (int a : pl.full) k *= static_cast<long>(pl.rules[a].x.size());
  return k;
}

std::vector<double> integrate_nodes(const Chart& c, const QuadOptions& opt, int nvals, const NodeFn& f) {
  Plan pl = make_plan(c, opt);
  std::vector<std::vector<double>> terms(nvals);
  std::vector<double> out(nvals);
  std::vector<double> point = pl.rep;
  std::unique_ptr<DensityEval> dens;
  if (!pl.sym.empty()) dens = std::make_unique<DensityEval>(c);
  // The block factor ∫ρ(p,·)/ρ(p,rep) is reused while the density separates as
  // (full axes) × (symmetric axes), which is checked at probe points of the block.
  std::vector<std::vector<double>> probes;
  std::vector<double> probe_ratio;
  double cached = -1.0;
  if (dens) {
    std::vector<double> q = pl.rep;
    int k = 0;
    for_grid(pl, pl.sym, q, [&](std::vector<double>& qq, double) {
      if (k++ % 97 == 0 && probes.size() < 8) probes.push_back(qq);
    });
  }
  auto block_ratio = [&](const std::vector<double>& p, const std::vector<double>& at) {
    std::vector<double> q = p, r = p;
    for (int a : pl.sym) {
      q[a] = pl.rep[a];
      r[a] = at[a];
    }
    return (*dens)(r) / (*dens)(q);
  };
  for_grid(pl, pl.full, point, [&](std::vector<double>& p, double w) {
    double factor = 1.0;
    if (dens) {
      bool reuse = cached > 0.0;
      for (std::size_t i = 0; reuse && i < probes.size(); ++i) {
        double r = block_ratio(p, probes[i]);
        reuse = std::abs(r - probe_ratio[i]) <= 1e-13 * std::abs(probe_ratio[i]);
      }
      if (reuse) {
        factor = cached;
      } else {
        std::vector<double> q = p;
        for (int a : pl.sym) q[a] = pl.rep[a];
        double rho0 = (*dens)(q);
        double s = 0.0;
        for_grid(pl, pl.sym, q, [&](std::vector<double>& qq, double ws) { s += ws * (*dens)(qq); });
        factor = s / rho0;
        if (cached < 0.0) {
          cached = factor;
          for (auto& pr : probes) probe_ratio.push_back(block_ratio(p, pr));
        }
      }
      for (int a : pl.sym) p[a] = pl.rep[a];
    }
    std::fill(out.begin(), out.end(), 0.0);
    f(p, out);
    for (int v = 0; v < nvals; ++v) terms[v].push_back(w * factor * out[v]);
  });
  std::vector<double> res(nvals);
  for (int v = 0; v < nvals; ++v) res[v] = pl.collapsed_weight * pairwise_sum(terms[v]);
  return res;
}

std::vector<std::vector<double>> all_nodes(const Chart& c, Profile p) {
  QuadOptions opt;
  opt.profile = p;
  Plan pl = make_plan(c, opt);
  std::vector<std::vector<double>> nodes;
  std::vector<double> point = pl.rep;
  for_grid(pl, pl.full, point, [&](std::vector<double>& q, double) { nodes.push_back(q); });
  return nodes;
}

double volume_density(const Chart& c, std::span<const double> point) { return DensityEval(c)(point); }

Integral integrate(const Chart& c, const Expr& field, Profile p, bool estimate) {
  DensityEval dens(c);
  Program prog(field, c.symbols());
  std::vector<int> dep;
  for (int a = 0; a < c.n; ++a) {
    bool used = references(field, c.coords[a]);
    for (const auto& e : c.g) used = used || references(e, c.coords[a]);
    if (used) dep.push_back(a);
  }
  if (dep.empty()) dep.push_back(0);
  auto run = [&](int refine) {
    QuadOptions opt;
    opt.profile = p;
    opt.depends = dep;
    opt.refine = refine;
    return integrate_nodes(c, opt, 1, [&](std::span<const double> x, std::span<double> out) {
      std::vector<double> slots(x.begin(), x.end());
      for (double v : c.param_values()) slots.push_back(v);
      out[0] = prog.eval(slots) * dens(x);
    })[0];
  };
  Integral r;
  r.value = run(1);
  r.error = -1.0;
  if (estimate) {
    double fine = run(2);
    r.error = std::abs(fine - r.value);
    if (r.error > 1e-6 * std::max(std::abs(fine), 1e-300) && r.error > 1e-14)
      throw QuadratureError("quadrature not converged: relative change " +
                            std::to_string(r.error / std::abs(fine)));
    r.value = fine;
  }
  return r;
}

// ---------------------------------------------------------------- Fourier fields

FourierField FourierField::scalar(int n) { return FourierField{n, 0, {}}; }
FourierField FourierField::vector(int n) { return FourierField{n, 1, {}}; }
FourierField FourierField::sym2(int n) { return FourierField{n, 2, {}}; }

void FourierField::add_cos(std::vector<int> k, std::vector<double> amp) {
  if (static_cast<int>(amp.size()) != width() || static_cast<int>(k.size()) != n)
    throw std::invalid_argument("Fourier mode shape mismatch");
  modes.push_back({std::move(k), std::move(amp), std::vector<double>(width(), 0.0)});
}

void FourierField::add_sin(std::vector<int> k, std::vector<double> amp) {
  if (static_cast<int>(amp.size()) != width() || static_cast<int>(k.size()) != n)
    throw std::invalid_argument("Fourier mode shape mismatch");
  modes.push_back({std::move(k), std::vector<double>(width(), 0.0), std::move(amp)});
}

FourierField FourierField::canonical() const {
  std::map<std::vector<int>, FourierMode> acc;
  for (const auto& m : modes) {
    std::vector<int> k = m.k;
    double sgn = 1.0;
    auto nz = std::find_if(k.begin(), k.end(), [](int x) { return x != 0; });
    if (nz != k.end() && *nz < 0) {
      for (int& x : k) x = -x;
      sgn = -1.0;  // sin(−θ) = −sin θ
    }
    bool zero = nz == k.end();
    auto [it, fresh] = acc.try_emplace(k, FourierMode{k, std::vector<double>(width(), 0.0),
                                                      std::vector<double>(width(), 0.0)});
    for (int i = 0; i < width(); ++i) {
      it->second.a[i] += m.a[i];
      if (!zero) it->second.b[i] += sgn * m.b[i];
    }
  }
  FourierField out{n, rank, {}};
  for (auto& [k, m] : acc) out.modes.push_back(m);
  return out;
}

std::vector<double> FourierField::eval(std::span<const double> x) const {
  std::vector<double> v(width(), 0.0);
  for (const auto& m : modes) {
    double ph = 0.0;
    for (int i = 0; i < n; ++i) ph += m.k[i] * x[i];
    double c = std::cos(ph), s = std::sin(ph);
    for (int i = 0; i < width(); ++i) v[i] += m.a[i] * c + m.b[i] * s;
  }
  return v;
}

std::string FourierField::expr(const std::vector<std::string>& coords, int i, int j) const {
  int slot = rank == 2 ? i * n + j : rank == 1 ? i : 0;
  std::ostringstream os;
  os.precision(17);
  os << "0";
  for (const auto& m : modes) {
    std::ostringstream ph;
    ph.precision(17);
    bool any = false;
    for (int q = 0; q < n; ++q) {
      if (m.k[q] == 0) continue;
      ph << (any ? " + " : "") << "(" << m.k[q] << ")*" << coords[q];
      any = true;
    }
    std::string phase = any ? ph.str() : "0";
    if (m.a[slot] != 0.0) os << " + (" << m.a[slot] << ")*cos(" << phase << ")";
    if (m.b[slot] != 0.0 && any) os << " + (" << m.b[slot] << ")*sin(" << phase << ")";
  }
  return os.str();
}

double FourierField::max_abs_amplitude() const {
  double m = 0.0;
  for (const auto& md : modes)
    for (int i = 0; i < width(); ++i) m = std::max({m, std::abs(md.a[i]), std::abs(md.b[i])});
  return m;
}

FourierField operator+(const FourierField& a, const FourierField& b) {
  if (a.n != b.n || a.rank != b.rank) throw std::invalid_argument("Fourier field shape mismatch");
  FourierField r = a;
  r.modes.insert(r.modes.end(), b.modes.begin(), b.modes.end());
  return r.canonical();
}

FourierField operator*(double s, const FourierField& a) {
  FourierField r = a;
  for (auto& m : r.modes) {
    for (double& x : m.a) x *= s;
    for (double& x : m.b) x *= s;
  }
  return r;
}

FourierField operator-(const FourierField& a, const FourierField& b) { return a + (-1.0) * b; }

namespace {
double k2(const std::vector<int>& k) {
  double s = 0.0;
  for (int x : k) s += double(x) * x;
  return s;
}
}  // namespace

FourierField poisson_solve_torus(const FourierField& u, int n) {
  if (u.rank != 0) throw std::invalid_argument("poisson_solve_torus needs a scalar field");
  FourierField f = FourierField::scalar(u.n);
  for (const auto& m : u.canonical().modes) {
    double kk = k2(m.k);
    if (kk == 0.0) continue;
    f.modes.push_back({m.k, {m.a[0] / ((n - 1) * kk)}, {m.b[0] / ((n - 1) * kk)}});
  }
  return f;
}

FourierField e_map(const FourierField& u, int n) {
  if (u.rank != 0) throw std::invalid_argument("e_map needs a scalar field");
  const int d = u.n;
  FourierField E = FourierField::sym2(d);
  FourierField f = poisson_solve_torus(u, n);
  // ∇²f on cos/sin modes is −k_ik_j times the same mode; Δf = −|k|² f
  for (const auto& m : f.modes) {
    double kk = k2(m.k);
    std::vector<double> A(d * d), B(d * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double t = -m.k[i] * m.k[j] + (i == j ? kk / n : 0.0);
        A[i * d + j] = t * m.a[0];
        B[i * d + j] = t * m.b[0];
      }
    E.modes.push_back({m.k, A, B});
  }
  for (const auto& m : u.canonical().modes) {
    std::vector<double> A(d * d, 0.0), B(d * d, 0.0);
    for (int i = 0; i < d; ++i) {
      A[i * d + i] = m.a[0] / n;
      B[i * d + i] = m.b[0] / n;
    }
    E.modes.push_back({m.k, A, B});
  }
  return E.canonical();
}

FourierField trace(const FourierField& h) {
  FourierField t = FourierField::scalar(h.n);
  for (const auto& m : h.modes) {
    double a = 0.0, b = 0.0;
    for (int i = 0; i < h.n; ++i) {
      a += m.a[i * h.n + i];
      b += m.b[i * h.n + i];
    }
    t.modes.push_back({m.k, {a}, {b}});
  }
  return t.canonical();
}

FourierField divergence(const FourierField& h) {
  const int d = h.n;
  FourierField v = FourierField::vector(d);
  for (const auto& m : h.modes) {
    // ∂_i (A cos + B sin) = −k_i A sin + k_i B cos
    std::vector<double> a(d, 0.0), b(d, 0.0);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        a[j] += m.k[i] * m.b[i * d + j];
        b[j] -= m.k[i] * m.a[i * d + j];
      }
    v.modes.push_back({m.k, a, b});
  }
  return v.canonical();
}

bool is_divergence_free(const FourierField& h, double tol) {
  FourierField v = divergence(h);
  return v.max_abs_amplitude() <= tol * std::max(1.0, h.max_abs_amplitude());
}

FourierField tt_project(const FourierField& h) {
  if (h.rank != 2) throw std::invalid_argument("tt_project needs a symmetric 2-tensor");
  if (!is_divergence_free(h, 1e-12)) throw QuadratureError("tt_project input is not divergence-free");
  return h - e_map(trace(h), h.n);
}

double l2_inner(const FourierField& a, const FourierField& b) {
  if (a.n != b.n || a.rank != b.rank) throw std::invalid_argument("Fourier field shape mismatch");
  FourierField A = a.canonical(), B = b.canonical();
  const double vol = std::pow(2.0 * std::numbers::pi, a.n);
  double s = 0.0;
  for (const auto& ma : A.modes)
    for (const auto& mb : B.modes) {
      if (ma.k != mb.k) continue;
      bool zero = k2(ma.k) == 0.0;
      for (int i = 0; i < a.width(); ++i) {
        if (zero)
          s += vol * ma.a[i] * mb.a[i];
        else
          s += 0.5 * vol * (ma.a[i] * mb.a[i] + ma.b[i] * mb.b[i]);
      }
    }
  return s;
}

double sobolev_norm2(const FourierField& f, int k) {
  FourierField F = f.canonical();
  const double vol = std::pow(2.0 * std::numbers::pi, f.n);
  double s = 0.0;
  for (const auto& m : F.modes) {
    double kk = k2(m.k);
    if (kk == 0.0) {
      if (k == 0)
        for (int i = 0; i < f.width(); ++i) s += vol * m.a[i] * m.a[i];
      continue;
    }
    double fac = std::pow(kk, k);
    for (int i = 0; i < f.width(); ++i) s += 0.5 * vol * fac * (m.a[i] * m.a[i] + m.b[i] * m.b[i]);
  }
  return s;
}

}  // namespace cvi
