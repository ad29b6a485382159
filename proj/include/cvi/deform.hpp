#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cvi/catalog.hpp"
#include "cvi/quad.hpp"

namespace cvi {

struct DeformError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FamilyKind { Conformal, Path, Lie, VolumeNormalizedConformal };

// One-parameter metric family through the base chart metric at t = 0.
//   conformal:  e^{2tΥ} g
//   path:       g + t h
//   lie:        g + t 𝓛_X g
//   volume-normalized conformal: c(t)² e^{2tΥ} g with Vol constant to second order
// `power` raises the conformal factor to a power s (used by the critical primitive).
struct MetricFamily {
  Chart base;
  FamilyKind kind = FamilyKind::Conformal;
  Expr upsilon;
  std::vector<Expr> h;  // n×n, symmetric
  std::vector<Expr> X;  // vector field components X^i
  int t_order = 1;
  double power = 1.0;
  // t-derivatives of log c(t)² at 0
  double log_scale_d1 = 0.0, log_scale_d2 = 0.0;

  static MetricFamily conformal(const Chart& c, const Expr& upsilon, int t_order = 1);
  static MetricFamily conformal(const Chart& c, const std::string& upsilon, int t_order = 1);
  static MetricFamily path(const Chart& c, const std::vector<Expr>& h, int t_order = 1);
  static MetricFamily lie(const Chart& c, const std::vector<Expr>& X);
  static MetricFamily volume_normalized(const Chart& c, const Expr& upsilon, int t_order, const QuadOptions& q);

  std::vector<Expr> exprs() const;
};

// Evaluates the family metric, invariants, and auxiliary fields at a point.
// Spatial jet order is `metric_order`; t is adjoined with the family's t-order.
class FamilyEvaluator {
 public:
  FamilyEvaluator(const MetricFamily& f, int metric_order, std::vector<Expr> fields = {});
  void set_point(std::span<const double> p);
  const JetFrame& frame() const { return *frame_; }
  InvariantContext& context() { return *ctx_; }
  const Jet& field(int i) const { return fields_[i]; }
  Jet density() const { return frame_->volume_density(0); }
  const JetEvaluator& evaluator() const { return ev_; }

 private:
  MetricFamily fam_;
  int order_;
  JetEvaluator ev_;
  std::vector<Program> field_prog_, h_prog_, x_prog_;
  Program u_prog_;
  std::vector<Jet> fields_;
  std::unique_ptr<JetFrame> frame_;
  std::unique_ptr<InvariantContext> ctx_;
};

struct DeformationJet {
  double value = 0.0, d1 = 0.0, d2 = 0.0;
  bool has_d2 = false;
};

DeformationJet d_dt_invariant(Inv id, const MetricFamily& f, std::span<const double> point);

// closed-form conformal linearizations: DP = −∇²Υ, DC_ijk = W_ij^s_k Υ_s,
// DB = −2ΥB − (n−4)Υ^s(C_isj + C_jsi), DJ = −2JΥ − ΔΥ, DR = −2RΥ − 2(n−1)ΔΥ
enum class Comparator { P, C, B, J, R };
Residual conformal_comparator(Comparator which, const Chart& c, const Expr& upsilon, std::span<const double> point);
// DR[h] = −⟨Ric,h⟩ + δ²h − Δ tr h
Residual metric_comparator_R(const Chart& c, const std::vector<Expr>& h, std::span<const double> point);
// DL(Υ) against DL[2Υg]
Residual relate_derivatives_residual(Inv id, const Chart& c, const Expr& upsilon, std::span<const double> point);
// DL[𝓛_X g] against X(L)
Residual diffeo_identity_residual(Inv id, const Chart& c, const std::vector<Expr>& X, std::span<const double> point);
// d/dt dvol_{g+th} against ½ tr_g h dvol
Residual volume_variation_residual(const Chart& c, const std::vector<Expr>& h, std::span<const double> point);

// ---------------------------------------------------------------- integrated checks

// depends = axes referenced by the metric or any of the fields
QuadOptions quad_options(const Chart& c, const std::vector<Expr>& fields, Profile p = Profile::Standard);

struct WeakResidual {
  double lhs = 0.0, rhs = 0.0;
  double scale = 0.0;  // absolute integrals of the integrands
  double residual() const { return std::abs(lhs - rhs); }
  double relative() const;
};

// ∫Υ₁DL(Υ₂) against ∫Υ₂DL(Υ₁)
WeakResidual self_adjointness_residual(Inv id, const Chart& c, const Expr& u1, const Expr& u2, const QuadOptions& q);
// d/dt ∫L dvol against (n−2k)∫LΥ dvol
WeakResidual conformal_gradient_residual(Inv id, const Chart& c, const Expr& u, const QuadOptions& q);
// the seven weight −6 gradient formulas; basis index 0..6 of basis6_names()
WeakResidual weight6_gradient_residual(int basis_idx, const Chart& c, const Expr& u, const QuadOptions& q);
// ½D∫J² = ∫(−ΔJ + (n−4)J²/2)Υ (which = 0) and ½D∫|P|² = ∫(−ΔJ + (n−4)|P|²/2)Υ (which = 1)
WeakResidual weight4_gradient_residual(int which, const Chart& c, const Expr& u, const QuadOptions& q);

// d/dt and d²/dt² of the volume along the volume-normalized family, relative to V
std::pair<double, double> volume_normalization_residual(const Chart& c, const Expr& u, const QuadOptions& q);

// mean-zero part Υ − Ῡ
Expr mean_zero(const Chart& c, const Expr& u, const QuadOptions& q);

// d²/dt² 𝒮(ĝ_t) against ∫Υ₀DL(Υ₀); base metric must have constant L
WeakResidual second_variation_residual(Inv id, const Chart& c, const Expr& u, const QuadOptions& q);

// ∫₀¹∫ u L(e^{2su}g₀) dvol ds with Gauss–Legendre in s
double critical_primitive(Inv id, const Chart& c, const Expr& u, const QuadOptions& q, int s_nodes = 8);
// d/dε 𝒮(e^{2(u+εv)}g₀) against ∫v L dvol at e^{2u}g₀
WeakResidual critical_primitive_gradient_residual(Inv id, const Chart& c, const Expr& u, const Expr& v,
                                                  const QuadOptions& q, int s_nodes = 8);

struct GammaResiduals {
  WeakResidual trace;       // ∫f DL(u)/2 against ∫f DL[ug]
  WeakResidual divergence;  // ∫f DL[𝓛_X g] against ∫f X(L)
  WeakResidual dual_R;      // ∫⟨Γ*(f),h⟩ against ∫f DR[h] (L = R only)
  bool has_dual = false;
};
GammaResiduals gamma_pairing_residuals(Inv id, const Chart& c, const Expr& f, const Expr& u, const std::vector<Expr>& X,
                                       const std::vector<Expr>& h, const QuadOptions& q);

struct AlmostSchur {
  double lhs = 0.0, rhs = 0.0, ric_min = 0.0;
  bool pass = false;
  double ratio() const { return rhs > 0 ? lhs / rhs : 0.0; }
};
// ∫(R − R̄)² ≤ 4n(n−1)/(n−2)² ∫|Ric − (R/n)g|²; Ricci floor checked at every node
AlmostSchur almost_schur_check(const Chart& c, double ricci_floor, const QuadOptions& q);

}  // namespace cvi
