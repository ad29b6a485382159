#include "cvi/spectra.hpp"

#include <algorithm>
#include <cmath>

namespace cvi {

namespace {

constexpr double kTol = 1e-12;

double horner(const std::vector<double>& q, double x) {
  double s = 0.0;
  for (auto it = q.rbegin(); it != q.rend(); ++it) s = s * x + *it;
  return s;
}

// magnitude used to judge "zero" at λ
double poly_scale(const std::vector<double>& q, double x) {
  double s = 0.0, p = 1.0;
  for (double c : q) {
    s += std::abs(c) * p;
    p *= std::abs(x);
  }
  return std::max(s, 1e-300);
}

}  // namespace

double OperatorPolynomial::eval_q(double lambda) const { return horner(q, lambda); }

double OperatorPolynomial::eval(double lambda) const {
  double v = eval_q(lambda);
  return stability_factor ? v * (lambda - 2.0 * J) : v;
}

int OperatorPolynomial::degree() const {
  for (int i = static_cast<int>(q.size()) - 1; i >= 0; --i)
    if (q[i] != 0.0) return i;
  return -1;
}

bool OperatorPolynomial::identically_zero() const { return degree() < 0; }

double OperatorPolynomial::leading() const {
  int d = degree();
  return d < 0 ? 0.0 : q[d];
}

OperatorPolynomial einstein_operator(Inv id, int n, double J) {
  if (n < 3) throw SpectraError("einstein_operator needs n >= 3");
  OperatorPolynomial op;
  op.name = entry(id).name;
  op.n = n;
  op.J = J;
  const double N = n;
  switch (id) {
    case Inv::J:
      op.q = {1.0};
      break;
    case Inv::R:
      op.q = {2.0 * (N - 1)};
      break;
    case Inv::Sigma2:
      op.q = {(N - 1) / N * J};
      break;
    case Inv::Q4:
      op.q = {(N * N - 4) / N * J, 1.0};
      break;
    case Inv::V3:
      op.q = {(N - 1) * (N - 2) / (2 * N * N) * J * J};
      break;
    case Inv::Q6:
      // Δ² − aJΔ + bJ² with Δ ↦ −λ. b = 3(n²−16)(n²−4)/(4n²): from DQ₆ = P₆ − ((n+6)/2)Q₆,
      // and forced by 2J·q(0) = 6Q₆ (scaling by constants); a denominator 2n² breaks both
      op.q = {3 * (N * N - 16) * (N * N - 4) / (4 * N * N) * J * J, (3 * N * N - 2 * N - 32) / (2 * N) * J, 1.0};
      break;
    case Inv::I1:
      op.q = {(N - 6) * J * J, 2 * J};
      break;
    case Inv::I2:
      op.q = {3 * (N - 6) / N * J * J, 2 * (N + 2) / N * J};
      break;
    case Inv::K1:
      op.q = {0.0};
      break;
    case Inv::K2:
      // −δ(W²∇Υ) vanishes only where W = 0
      op.q = {0.0};
      op.stability_factor = false;
      op.sphere_only = true;
      break;
    default:
      throw SpectraError("no Einstein operator polynomial for " + entry(id).name);
  }
  if (id == Inv::K1) op.stability_factor = false;
  return op;
}

OperatorPolynomial gjms_operator(int k, int n, double J) {
  if (k < 1) throw SpectraError("gjms_operator needs k >= 1");
  OperatorPolynomial op;
  op.name = "P" + std::to_string(2 * k);
  op.n = n;
  op.J = J;
  op.stability_factor = false;
  op.q = {1.0};
  for (int j = 1; j <= k; ++j) {
    double c = (n + 2.0 * j - 2) * (n - 2.0 * j) * J / (2.0 * n);
    std::vector<double> r(op.q.size() + 1, 0.0);
    for (std::size_t i = 0; i < op.q.size(); ++i) {
      r[i] += c * op.q[i];
      r[i + 1] += op.q[i];
    }
    op.q = r;
  }
  return op;
}

double sphere_q_curvature(int k, int n, double radius) {
  const double J = n / (2.0 * radius * radius);
  // (2/(n−2k))∏_j c_j with c_k = (n+2k−2)(n−2k)J/(2n)
  double v = 2.0 * (n + 2.0 * k - 2) * J / (2.0 * n);
  for (int j = 1; j < k; ++j) v *= (n + 2.0 * j - 2) * (n - 2.0 * j) * J / (2.0 * n);
  return v;
}

std::vector<SpectrumRow> sphere_spectrum_table(const OperatorPolynomial& op, double radius, int k_max) {
  if (radius <= 0.0) throw SpectraError("radius must be positive");
  std::vector<SpectrumRow> rows;
  for (int k = 0; k <= k_max; ++k) {
    double lam = k * (k + op.n - 1.0) / (radius * radius);
    rows.push_back({k, lam, op.eval(lam)});
  }
  return rows;
}

std::vector<SpectrumRow> sphere_spectrum_table(Inv id, int n, double radius, int k_max) {
  return sphere_spectrum_table(einstein_operator(id, n, n / (2.0 * radius * radius)), radius, k_max);
}

std::vector<double> real_roots(const std::vector<double>& q) {
  int d = static_cast<int>(q.size()) - 1;
  while (d >= 0 && q[d] == 0.0) --d;
  if (d <= 0) return {};
  if (d == 1) return {-q[0] / q[1]};
  if (d > 2) throw SpectraError("real_roots: degree above 2");
  double a = q[2], b = q[1], c = q[0];
  double disc = b * b - 4 * a * c;
  if (disc < -kTol * (b * b + std::abs(4 * a * c))) return {};
  disc = std::max(disc, 0.0);
  double s = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  std::vector<double> r;
  if (s != 0.0) {
    r.push_back(s / a);
    r.push_back(c / s);
  } else {
    r.push_back(0.0);
    r.push_back(0.0);
  }
  std::sort(r.begin(), r.end());
  return r;
}

bool nonnegative_from(const std::vector<double>& q, double a, bool strict) {
  int d = static_cast<int>(q.size()) - 1;
  while (d >= 0 && q[d] == 0.0) --d;
  if (d < 0) return !strict;
  double at = horner(q, a), sc = poly_scale(q, a);
  if (d == 0) return strict ? q[0] > 0.0 : q[0] >= 0.0;
  if (q[d] < 0.0) return false;
  if (strict ? at <= kTol * sc : at < -kTol * sc) return false;
  auto r = real_roots(q);
  if (r.empty()) return true;
  // a double root is harmless for ≥ 0
  if (!strict && r.size() == 2 && std::abs(r[0] - r[1]) <= 1e-9 * std::max(1.0, std::abs(r[0]))) return true;
  for (double x : r)
    if (x > a + 1e-12 * std::max(1.0, std::abs(a))) return false;
  return true;
}

StabilityVerdict stability_verdict(const OperatorPolynomial& op, double radius, int k_max) {
  StabilityVerdict v;
  auto rows = sphere_spectrum_table(op, radius, k_max);
  v.k0_eigenvalue = rows[0].eigenvalue;
  if (op.identically_zero()) {
    v.kernel_is_everything = true;
    for (int k = 1; k <= k_max; ++k) v.kernel_modes.push_back(k);
    return v;
  }
  bool nonneg = true;
  double gap = 1e300;
  for (int k = 1; k <= k_max; ++k) {
    double lam = rows[k].lambda, e = rows[k].eigenvalue;
    double tol = kTol * poly_scale(op.q, lam) * std::max(1.0, lam);
    if (std::abs(e) <= tol)
      v.kernel_modes.push_back(k);
    else if (e < 0)
      nonneg = false;
    else
      gap = std::min(gap, e);
  }
  v.min_positive_gap = gap < 1e300 ? gap : 0.0;
  // q > 0 on (λ₁, ∞) rules out zeros and sign changes beyond k_max, so raising k_max cannot change the verdict
  const double lam1 = op.n / (radius * radius);
  v.tail_nonnegative = op.stability_factor ? nonnegative_from(op.q, lam1 * (1 + 1e-9), true)
                                           : nonnegative_from(op.q, lam1, false);
  v.stable = nonneg && v.tail_nonnegative && v.kernel_modes == std::vector<int>{1};
  return v;
}

StabilityVerdict stability_verdict(Inv id, int n, double radius, int k_max) {
  return stability_verdict(einstein_operator(id, n, n / (2.0 * radius * radius)), radius, k_max);
}

EinsteinGenericVerdict einstein_generic_verdict(Inv id, int n, double J) {
  EinsteinGenericVerdict v;
  OperatorPolynomial op = einstein_operator(id, n, J);
  v.q_at_2J = op.eval_q(2 * J);
  if (op.sphere_only) {
    v.indeterminate = true;
    return v;
  }
  v.stable = op.stability_factor && nonnegative_from(op.q, 2 * J, true);
  return v;
}

OperatorPolynomial cone_operator(double alpha, double beta, int n, double J) {
  OperatorPolynomial a = einstein_operator(Inv::Q4, n, J), b = einstein_operator(Inv::Sigma2, n, J);
  OperatorPolynomial op = a;
  op.name = "alpha*Q4+beta*sigma2";
  op.q = {alpha * a.q[0] + beta * b.q[0], alpha * a.q[1]};
  return op;
}

ConeVerdict cone_classify(double alpha, double beta, int n) {
  if (n < 3) throw SpectraError("cone_classify needs n >= 3");
  ConeVerdict v;
  v.alpha = alpha;
  v.beta = beta;
  v.n = n;
  const double N = n, sc = kTol * (std::abs(alpha) + std::abs(beta)) * N * N;
  auto ge = [&](double x) { return x >= -sc; };
  auto gt = [&](double x) { return x > sc; };
  v.witness_V = (N * N + 2 * N - 4) * alpha + (N - 1) * beta;
  v.witness_SV = (N * N - 4) * alpha + (N - 1) * beta;
  v.in_E = gt(alpha) || (std::abs(alpha) <= sc && gt(beta));
  v.in_V = ge(alpha) && ge(v.witness_V);
  v.in_SV = ge(alpha) && gt(v.witness_SV);
  // unit sphere: J = n/2
  const double J = N / 2;
  OperatorPolynomial op = cone_operator(alpha, beta, n, J);
  std::vector<double> q = op.q;
  for (double& c : q)
    if (std::abs(c) <= sc * std::max(1.0, J)) c = 0.0;
  int d = q[1] != 0.0 ? 1 : (q[0] != 0.0 ? 0 : -1);
  v.spec_E = d >= 0 && q[d] > 0.0;
  v.spec_V = d >= 0 && nonnegative_from(q, 2 * J, false);
  v.spec_SV = d >= 0 && nonnegative_from(q, 0.0, true);
  v.routes_agree = v.spec_E == v.in_E && v.spec_V == v.in_V && v.spec_SV == v.in_SV;
  auto st = stability_verdict(op, 1.0, 50);
  bool nonneg = true;
  for (auto& r : sphere_spectrum_table(op, 1.0, 50))
    if (r.k >= 1 && r.eigenvalue < -kTol * std::max(1.0, std::abs(r.lambda) * std::abs(r.lambda))) nonneg = false;
  bool kernel_ok = true;
  for (int k : st.kernel_modes) kernel_ok = kernel_ok && k == 1;
  v.sphere_route_V = !op.identically_zero() && nonneg && kernel_ok;
  return v;
}

ConeVerdict det_gradient_membership(double gamma2, double gamma3, int n) {
  ConeVerdict v = cone_classify(gamma2 + gamma3, -4.0 * gamma3, n);
  v.has_gamma = true;
  v.gamma2 = gamma2;
  v.gamma3 = gamma3;
  const double sc = kTol * (std::abs(gamma2) + std::abs(gamma3)) * 10;
  v.gamma_V = 5 * gamma2 + 2 * gamma3 >= -sc && gamma2 + gamma3 >= -sc;
  v.gamma_SV = gamma2 > sc && gamma2 + gamma3 >= -sc;
  v.gamma_agree = v.gamma_V == v.in_V && v.gamma_SV == v.in_SV;
  return v;
}

}  // namespace cvi
