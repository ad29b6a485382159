#include "cvi/models.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "cvi/quad.hpp"

namespace cvi {

namespace {

std::string num(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return "(" + os.str() + ")";
}

std::vector<std::vector<std::string>> zeros(int n) {
  return std::vector<std::vector<std::string>>(n, std::vector<std::string>(n, "0"));
}

}  // namespace

Chart round_sphere(int n, double radius) {
  if (n < 2 || n > 7) throw ModelError("round_sphere: dimension out of range");
  if (!(radius > 0)) throw ModelError("round_sphere: radius must be positive");
  std::vector<std::string> coords;
  for (int i = 1; i < n; ++i) coords.push_back("th" + std::to_string(i));
  coords.push_back("phi");
  auto g = zeros(n);
  std::string prefix = num(radius * radius);
  for (int i = 0; i < n; ++i) {
    g[i][i] = prefix;
    prefix += "*sin(" + coords[i] + ")^2";
  }
  std::vector<std::array<double, 2>> dom(n, {0.0, std::numbers::pi});
  dom[n - 1] = {0.0, 2 * std::numbers::pi};
  std::vector<bool> per(n, false);
  per[n - 1] = true;
  std::vector<AxisRule> q(n, AxisRule{AxisRule::Gauss, 24});
  q[n - 1] = AxisRule{AxisRule::Trapezoid, 24};
  std::ostringstream nm;
  nm << "S" << n << "(" << radius << ")";
  return make_chart(nm.str(), coords, {}, g, dom, per, q);
}

Chart flat_torus(int n, double period) {
  if (n < 2 || n > 8) throw ModelError("flat_torus: dimension out of range");
  if (!(period > 0)) throw ModelError("flat_torus: period must be positive");
  std::vector<std::string> coords;
  for (int i = 1; i <= n; ++i) coords.push_back("x" + std::to_string(i));
  auto g = zeros(n);
  for (int i = 0; i < n; ++i) g[i][i] = "1";
  int nodes = n <= 5 ? 12 : 8;
  return make_chart("T" + std::to_string(n), coords, {}, g, std::vector<std::array<double, 2>>(n, {0.0, period}),
                    std::vector<bool>(n, true), std::vector<AxisRule>(n, AxisRule{AxisRule::Trapezoid, nodes}));
}

Chart product(const Chart& a, const Chart& b) {
  const int n = a.n + b.n;
  if (n > 8) throw ModelError("product: combined dimension exceeds 8");
  std::set<std::string> used(a.coords.begin(), a.coords.end());
  for (auto& [p, v] : a.params) used.insert(p);
  // rename clashing coordinates of b by suffixing "b"
  std::vector<std::string> bc = b.coords;
  std::vector<std::pair<std::string, Expr>> rename;
  for (auto& c : bc) {
    std::string nc = c;
    while (used.count(nc)) nc += "b";
    used.insert(nc);
    if (nc != c) rename.push_back({c, symbol(nc)});
    c = nc;
  }
  for (auto& [p, v] : b.params)
    if (used.count(p)) throw ModelError("product: parameter name clash '" + p + "'");
  std::function<Expr(const Expr&)> subst = [&](const Expr& e) -> Expr {
    switch (e->op) {
      case Op::Const: return e;
      case Op::Sym:
        for (auto& [from, to] : rename)
          if (e->name == from) return to;
        return e;
      case Op::Add: return add(subst(e->a), subst(e->b));
      case Op::Sub: return sub(subst(e->a), subst(e->b));
      case Op::Mul: return mul(subst(e->a), subst(e->b));
      case Op::Div: return div(subst(e->a), subst(e->b));
      case Op::Pow: return power(subst(e->a), subst(e->b));
      case Op::Neg: return neg(subst(e->a));
      default: return func(e->op, subst(e->a));
    }
  };
  Chart c;
  c.name = a.name + "x" + b.name;
  c.n = n;
  c.coords = a.coords;
  c.coords.insert(c.coords.end(), bc.begin(), bc.end());
  c.params = a.params;
  c.params.insert(c.params.end(), b.params.begin(), b.params.end());
  c.g.assign(n * n, constant(0.0));
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) c.g[i * n + j] = a.metric(i, j);
  for (int i = 0; i < b.n; ++i)
    for (int j = 0; j < b.n; ++j) c.g[(a.n + i) * n + a.n + j] = subst(b.metric(i, j));
  c.domain = a.domain;
  c.domain.insert(c.domain.end(), b.domain.begin(), b.domain.end());
  c.periodic = a.periodic;
  c.periodic.insert(c.periodic.end(), b.periodic.begin(), b.periodic.end());
  c.quadrature = a.quadrature;
  c.quadrature.insert(c.quadrature.end(), b.quadrature.begin(), b.quadrature.end());
  c.pointwise_only = a.pointwise_only || b.pointwise_only;
  return c;
}

Chart conformal_perturb(const Chart& c, const std::string& upsilon) {
  return conformal_perturb(c, parse_expr(upsilon, c.symbols()));
}

Chart conformal_perturb(const Chart& c, const Expr& u) {
  Chart out = c;
  double v = 0.0;
  if (is_const(u, &v) && v == 0.0) return out;
  Expr f = func(Op::Exp, mul(constant(2.0), u));
  for (auto& e : out.g) e = mul(f, e);
  out.name = "e^{2u}" + c.name;
  return out;
}

Chart generic_metric(int n, unsigned seed, double eps, int active) {
  if (eps > 0.1) throw ModelError("generic_metric: eps must be <= 0.1");
  if (active <= 0 || active > n) active = n;
  Chart base = flat_torus(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-0.5, 0.5), phase(0.0, 2 * std::numbers::pi);
  std::uniform_int_distribution<int> freq(-1, 1);
  auto g = zeros(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      std::string s = i == j ? "1" : "0";
      int terms = i == j ? 2 : 1;
      for (int t = 0; t < terms; ++t) {
        std::vector<int> k(n, 0);
        bool nz = false;
        while (!nz) {
          for (int q = 0; q < active; ++q) {
            k[q] = freq(rng);
            nz = nz || k[q] != 0;
          }
        }
        std::string ph;
        for (int q = 0; q < active; ++q)
          if (k[q] != 0) ph += (k[q] > 0 ? (ph.empty() ? "" : " + ") : " - ") + base.coords[q];
        double a = amp(rng), p = phase(rng);
        s += " + " + num(eps * a) + "*cos(" + ph + " + " + num(p) + ")";
      }
      g[i][j] = s;
    }
  }
  std::vector<AxisRule> q = base.quadrature;
  Chart c = make_chart("generic" + std::to_string(n) + "_" + std::to_string(seed), base.coords, {}, g, base.domain,
                       base.periodic, q);
  return c;
}

PageParameters page_parameters() {
  PageParameters p;
  double nu = 0.28;
  for (int it = 0; it < 100; ++it) {
    double f = (((nu + 4) * nu - 6) * nu + 12) * nu - 3;
    double df = ((4 * nu + 12) * nu - 12) * nu + 12;
    double d = f / df;
    nu -= d;
    if (std::abs(d) < 1e-13) break;
  }
  p.nu = nu;
  p.quartic_residual = std::abs((((nu + 4) * nu - 6) * nu + 12) * nu - 3);
  p.c = 1.0 / (3 + 6 * nu * nu - nu * nu * nu * nu);
  p.beta2 = "c^2*(nu^2 - r^2)*(3 - nu^2 - (1 + nu^2)*r^2)/(1 - r^2)";
  p.alpha2 = "c^2/(" + p.beta2 + ")";
  p.gamma2 = "c*(1 - r^2)";
  return p;
}

Chart page_metric() {
  PageParameters pp = page_parameters();
  std::vector<std::string> coords{"r", "tau", "rho", "theta"};
  auto g = zeros(4);
  const std::string s2 = "sin(rho/2)^2";
  g[0][0] = pp.alpha2;
  g[1][1] = pp.beta2;
  g[1][3] = "-4*" + s2 + "*(" + pp.beta2 + ")";
  g[2][2] = pp.gamma2;
  g[3][3] = "16*" + s2 + "^2*(" + pp.beta2 + ") + (" + pp.gamma2 + ")*sin(rho)^2";
  const double tp = 2 * std::numbers::pi;
  Chart c = make_chart("page", coords, {{"nu", pp.nu}, {"c", pp.c}}, g,
                       {{0.05 * pp.nu, 0.95 * pp.nu}, {0.0, tp}, {0.1, std::numbers::pi - 0.1}, {0.0, tp}},
                       {false, true, false, true},
                       {AxisRule{AxisRule::Gauss, 12}, AxisRule{AxisRule::Trapezoid, 12}, AxisRule{AxisRule::Gauss, 12},
                        AxisRule{AxisRule::Trapezoid, 12}});
  c.pointwise_only = true;
  return c;
}

PageFrameCheck page_frame_check(std::span<const double> x) {
  const Chart c = page_metric();
  const PageParameters pp = page_parameters();
  const int n = 4;
  auto f = curvature_frame(c, x, 0);
  const double r = x[0], rho = x[2];
  const std::vector<std::string> rs{"r", "nu", "c"};
  const std::vector<double> rv{r, pp.nu, pp.c};
  Expr b2 = parse_expr(pp.beta2, rs), g2 = parse_expr(pp.gamma2, rs);
  const double beta2 = Program(b2, rs).eval(rv), gamma2 = Program(g2, rs).eval(rv);
  const double db2 = Program(diff_expr(b2, "r"), rs).eval(rv);
  const double beta = std::sqrt(beta2), gamma = std::sqrt(gamma2), alpha = pp.c / beta;
  const double dbeta = db2 / (2 * beta);
  const double s = std::sin(rho / 2);
  // coframe rows E[a][i]; coordinates (r, τ, ρ, θ)
  Eigen::Matrix4d E = Eigen::Matrix4d::Zero();
  E(0, 0) = alpha;
  E(1, 1) = beta;
  E(1, 3) = -4 * s * s * beta;
  E(2, 2) = gamma;
  E(3, 3) = gamma * std::sin(rho);
  Eigen::Matrix4d F = E.inverse();  // column a is the dual vector e_a
  auto W = [&](int a, int b, int cc, int d) {
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            v += f.W[((i * n + j) * n + k) * n + l] * F(i, a) * F(j, b) * F(k, cc) * F(l, d);
    return v;
  };
  PageFrameCheck out;
  out.W0101 = W(0, 1, 0, 1);
  out.W0123 = W(0, 1, 2, 3);
  out.W0202 = W(0, 2, 0, 2);
  out.W0303 = W(0, 3, 0, 3);
  out.W1212 = W(1, 2, 1, 2);
  out.W1313 = W(1, 3, 1, 3);
  out.W0231 = W(0, 2, 3, 1);
  out.W0312 = W(0, 3, 1, 2);
  const double g4 = gamma2 * gamma2, nu = pp.nu;
  out.W0101_ref = (gamma2 - (1 + nu) * (1 + nu) * g4 - (3 + r * r) * beta2) / g4;
  out.W0123_ref = 2 * g4 * (gamma2 * beta * dbeta / pp.c + r * beta2);
  out.W0101_alt = (gamma2 - (1 + nu * nu) * g4 - (3 + r * r) * beta2) / g4;
  out.W0123_alt = 2 / g4 * (gamma2 * beta * dbeta / pp.c + r * beta2);
  for (int i = 0; i < n * n * n * n; ++i) {
    double wu = 0.0;
    int l = i % n, k = (i / n) % n, j = (i / (n * n)) % n, ii = i / (n * n * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc)
          for (int d = 0; d < n; ++d)
            wu += f.ginv[ii * n + a] * f.ginv[j * n + b] * f.ginv[k * n + cc] * f.ginv[l * n + d] *
                  f.W[((a * n + b) * n + cc) * n + d];
    out.W2 += wu * f.W[i];
  }
  const double lam = 3 * (1 + nu * nu);
  double res = 0.0, gs = 0.0;
  for (int i = 0; i < n * n; ++i) {
    res = std::max(res, std::abs(f.ricci[i] - lam * f.g[i]));
    gs = std::max(gs, std::abs(f.g[i]));
  }
  out.ricci_residual = res / gs;
  return out;
}

Chart page_times_sphere() {
  PageParameters pp = page_parameters();
  // Ric(S²(ρ)) = ρ^{-2} g must match 3(1+ν²)
  double rho = 1.0 / std::sqrt(3.0 * (1.0 + pp.nu * pp.nu));
  Chart c = product(page_metric(), round_sphere(2, rho));
  c.name = "page x S2";
  return c;
}

std::string sphere_harmonic(int n, int degree) {
  switch (degree) {
    case 0: return "1";
    case 1: return "cos(th1)";
    case 2: return "cos(th1)^2 - 1/" + std::to_string(n + 1);
    case 3: return "cos(th1)^3 - 3/" + std::to_string(n + 3) + "*cos(th1)";
  }
  throw ModelError("sphere_harmonic: degree must be 0..3");
}

void check_positive_on_nodes(const Chart& c, double floor) {
  for (const auto& p : all_nodes(c, Profile::Standard)) {
    double lam = min_metric_eigenvalue(c, p);
    if (!(lam > floor)) throw ModelError("positivity violated at a quadrature node: eigenvalue " + std::to_string(lam));
  }
}

}  // namespace cvi
