#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cvi/geometry.hpp"

namespace cvi {

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Profile { Smoke, Standard, Deep };
Profile parse_profile(const std::string& s);
std::string to_string(Profile p);

struct Rule1D {
  std::vector<double> x, w;
};
Rule1D gauss_legendre(int m, double a, double b);
Rule1D trapezoid(int m, double a, double b);  // periodic: left endpoints, equal weights

// node count for an axis after applying the profile (smoke halves, deep doubles)
int profile_nodes(const AxisRule& r, Profile p);
Rule1D axis_rule(const Chart& c, int axis, Profile p, int refine = 1);

struct QuadOptions {
  Profile profile = Profile::Standard;
  // Axes the integrand may depend on. Any other axis is integrated in closed form
  // (its weights just sum). Empty means every axis.
  std::vector<int> depends;
  // Axes along which integrand/√det g is constant; evaluated at one representative
  // node and reweighted by the exact density sum over the axis block.
  std::vector<int> symmetric;
  int refine = 1;  // node multiplier
};

using NodeFn = std::function<void(std::span<const double> point, std::span<double> out)>;

// Σ_nodes w·f(node), f already including the volume density. Pairwise summation
// over a fixed node order, so totals are reproducible.
std::vector<double> integrate_nodes(const Chart& c, const QuadOptions& opt, int nvals, const NodeFn& f);

// number of integrand evaluations integrate_nodes would make
long count_nodes(const Chart& c, const QuadOptions& opt);

// all quadrature node coordinates (no collapsing)
std::vector<std::vector<double>> all_nodes(const Chart& c, Profile p);

struct Integral {
  double value = 0.0;
  double error = 0.0;  // |I(2N) − I(N)| when estimated, else −1
};

// ∫ field dvol for a scalar Expr over coords+params, density from the metric.
// With estimate=true the node-doubled value is reported and a relative change
// above 1e−6 raises QuadratureError.
Integral integrate(const Chart& c, const Expr& field, Profile p = Profile::Standard, bool estimate = true);

double pairwise_sum(std::span<const double> v);

// √|det g| at a point
double volume_density(const Chart& c, std::span<const double> point);

// ---------------------------------------------------------------- flat tori

// Σ_modes A cos(k·x) + B sin(k·x) on the 2π-periodic torus. Scalars use 1×1 amplitudes.
struct FourierMode {
  std::vector<int> k;
  std::vector<double> a, b;  // width() amplitudes, row-major for 2-tensors
};

struct FourierField {
  int n = 0;
  int rank = 0;  // 0 scalar, 1 vector, 2 symmetric 2-tensor
  std::vector<FourierMode> modes;

  static FourierField scalar(int n);
  static FourierField vector(int n);
  static FourierField sym2(int n);
  int width() const { return rank == 0 ? 1 : rank == 1 ? n : n * n; }
  void add_cos(std::vector<int> k, std::vector<double> amp);
  void add_sin(std::vector<int> k, std::vector<double> amp);
  // merge ±k and duplicate frequencies; canonical k has first nonzero entry positive
  FourierField canonical() const;
  std::vector<double> eval(std::span<const double> x) const;
  // Expr text of component (i,j) in coordinates named by coords (i for vectors)
  std::string expr(const std::vector<std::string>& coords, int i = 0, int j = 0) const;
  double max_abs_amplitude() const;
};

FourierField operator+(const FourierField& a, const FourierField& b);
FourierField operator-(const FourierField& a, const FourierField& b);
FourierField operator*(double s, const FourierField& a);

// Δf = −(Υ − Ῡ)/(n−1), mean zero
FourierField poisson_solve_torus(const FourierField& upsilon, int n);
// E(Υ) = ∇²f − (Δf/n) g + (Υ/n) g
FourierField e_map(const FourierField& upsilon, int n);
// h − E(tr h); throws QuadratureError unless δh = 0
FourierField tt_project(const FourierField& h);

FourierField trace(const FourierField& h);
FourierField divergence(const FourierField& h);  // (δh)_j
bool is_divergence_free(const FourierField& h, double tol = 1e-14);

// exact L² products on the 2π torus
double l2_inner(const FourierField& a, const FourierField& b);
// ∫|∇^k F|² dvol
double sobolev_norm2(const FourierField& f, int k);

}  // namespace cvi
