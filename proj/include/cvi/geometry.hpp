#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvi/dsl.hpp"
#include "cvi/jet.hpp"

namespace cvi {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AxisRule {
  enum Kind { Trapezoid, Gauss } kind = Trapezoid;
  int nodes = 12;
};

struct Chart {
  std::string name;
  int n = 0;
  std::vector<std::string> coords;
  std::vector<std::pair<std::string, double>> params;
  std::vector<Expr> g;  // row-major n*n
  std::vector<std::array<double, 2>> domain;
  std::vector<bool> periodic;
  std::vector<AxisRule> quadrature;
  bool pointwise_only = false;

  const Expr& metric(int i, int j) const { return g[i * n + j]; }
  // coords followed by parameter names: the vocabulary for field expressions
  std::vector<std::string> symbols() const;
  std::vector<double> param_values() const;
  std::vector<double> center() const;
};

// Builds the chart, parsing each upper-triangle component against coords+params.
Chart make_chart(std::string name, std::vector<std::string> coords,
                 std::vector<std::pair<std::string, double>> params,
                 const std::vector<std::vector<std::string>>& metric_text,
                 std::vector<std::array<double, 2>> domain, std::vector<bool> periodic,
                 std::vector<AxisRule> quadrature);

// symmetry, positivity at sampled points, periodicity bookkeeping
void validate_chart(const Chart& c, int samples = 16, unsigned seed = 1);
double min_metric_eigenvalue(const Chart& c, std::span<const double> point);

// Which coordinates carry jet variables. Coordinates no input depends on are constant.
struct ActiveSet {
  std::vector<int> vars;           // coordinate index of jet variable v
  std::vector<int> coord_to_var;   // -1 when inactive
  static ActiveSet all(int n);
  static ActiveSet from_exprs(const Chart& c, const std::vector<Expr>& extra = {});
};

// Evaluates expressions over a chart at a point as jets in the active variables.
class JetEvaluator {
 public:
  JetEvaluator(const Chart& c, ActiveSet active, int order, int t_order);
  const JetLayout& layout() const { return *layout_; }
  const ActiveSet& active() const { return active_; }
  int order() const { return order_; }
  int n() const { return chart_->n; }
  const Chart& chart() const { return *chart_; }

  void set_point(std::span<const double> p);
  Jet eval(const Program& p) const;
  Jet eval(const Expr& e) const;
  std::vector<Jet> metric() const;
  Jet t_variable() const;
  Jet constant(double c) const { return Jet(*layout_, order_, c); }
  Program compile(const Expr& e) const { return Program(e, chart_->symbols()); }

 private:
  const Chart* chart_;
  ActiveSet active_;
  int order_;
  const JetLayout* layout_;
  std::vector<Program> metric_prog_;
  std::vector<Jet> slots_;
};

// Dense tensor of jets, all indices covariant unless stated; row-major.
struct JTensor {
  int n = 0;
  int rank = 0;
  std::vector<Jet> c;
  JTensor() = default;
  JTensor(int n, int rank) : n(n), rank(rank), c(ipow(n, rank)) {}
  static int ipow(int b, int e) {
    int r = 1;
    while (e--) r *= b;
    return r;
  }
  Jet& operator[](int i) { return c[i]; }
  const Jet& operator[](int i) const { return c[i]; }
  Jet& at(int i, int j) { return c[i * n + j]; }
  const Jet& at(int i, int j) const { return c[i * n + j]; }
  Jet& at(int i, int j, int k) { return c[(i * n + j) * n + k]; }
  const Jet& at(int i, int j, int k) const { return c[(i * n + j) * n + k]; }
  Jet& at(int i, int j, int k, int l) { return c[((i * n + j) * n + k) * n + l]; }
  const Jet& at(int i, int j, int k, int l) const { return c[((i * n + j) * n + k) * n + l]; }
  int order() const { return c.empty() ? 0 : c[0].order(); }
  JTensor truncated(int q) const;
};

// All curvature quantities as jets around one point, computed lazily from metric jets.
class JetFrame {
 public:
  JetFrame(std::vector<Jet> g, ActiveSet active);

  int n() const { return n_; }
  int order() const { return m_; }
  const JetLayout& layout() const { return g_[0].layout(); }

  Jet d(const Jet& f, int coord) const;  // coordinate partial derivative

  const JTensor& g() const { return g_; }
  const JTensor& ginv() const;
  const JTensor& christoffel() const;        // Γ^k_ij at (k,i,j)
  const JTensor& christoffel_lower() const;  // Γ_{k,ij} at (k,i,j)
  const std::vector<Jet>& contracted_christoffel() const;  // g^ij Γ^k_ij
  const JTensor& riemann() const;            // R_ijkl
  const JTensor& ricci() const;
  const Jet& scalar() const;
  const Jet& J() const;
  const JTensor& P() const;
  const JTensor& W() const;
  const JTensor& C() const;
  const JTensor& B() const;
  const JTensor& nabla_P() const;
  Jet volume_density(int order) const;

  JTensor nabla(const JTensor& T) const;  // derivative index first
  Jet laplacian(const Jet& f) const;
  Jet divergence(const JTensor& omega) const;  // δω = g^ij ∇_i ω_j for a 1-form
  JTensor gradient(const Jet& f) const;        // df as a 1-form
  JTensor raise(const JTensor& T, int slot) const;
  JTensor raise_all(const JTensor& T) const;
  Jet dot(const JTensor& A, const JTensor& B) const;  // full contraction
  Jet trace(const JTensor& T) const;                  // g^ij T_ij

 private:
  int n_, m_;
  ActiveSet active_;
  JTensor g_;
  mutable std::optional<JTensor> ginv_, dg_, gam_low_, gam_, riem_, ric_, P_, W_, C_, B_, dP_;
  mutable std::optional<std::vector<Jet>> gam_con_;
  mutable std::optional<Jet> R_, J_;
  const JTensor& dg() const;
};

// Double-valued tensor (row-major, covariant unless stated).
struct Tensor {
  int n = 0;
  int rank = 0;
  std::vector<double> v;
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  double max_abs() const;
};
Tensor values(const JTensor& T);

struct CurvatureFrame {
  int n = 0;
  std::vector<double> point;
  Tensor g, ginv, christoffel, riemann, riemann_mixed, ricci, P, W, C, B;
  double R = 0.0, J = 0.0, volume = 0.0;
  bool has_B = false;
  // covariant derivatives: nabla_X[d-1] holds ∇^d X
  std::vector<Tensor> nabla_P, nabla_W, nabla_C, nabla_B, nabla_Rm;
  std::shared_ptr<const JetFrame> jets;
};

CurvatureFrame curvature_frame(const Chart& chart, std::span<const double> point, int deriv_order);

// Builds the jet frame of the chart metric at a point with the given metric order.
std::shared_ptr<JetFrame> jet_frame(const Chart& chart, std::span<const double> point, int metric_order,
                                    const std::vector<Expr>& extra = {});

enum class DivergenceSelector { Weyl, Bach, CottonSchouten, WeylCotton, Field };

// ∇^k W_ijkl (rank 3), ∇^k B_jk (rank 1), ∇^k(C_skt P^st), ∇^l(W_ijkl C^ijk), or δω for a field ω.
Tensor divergence(const Chart& chart, std::span<const double> point, DivergenceSelector sel,
                  const std::vector<Expr>& field = {});

struct Residual {
  double residual = 0.0;
  double scale = 0.0;
  double relative() const { return residual / (scale > 0.0 ? scale : 1.0); }
};

Residual weyl_bianchi_residual(const Chart& chart, std::span<const double> point);

}  // namespace cvi
