#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cvi/catalog.hpp"
#include "cvi/quad.hpp"

namespace cvi {

struct RigidityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scalar built from an invariant context; lets the flat-metric machinery run on
// basis entries as well as catalog ids.
struct FlatScalar {
  std::string name;
  int k = 1;
  int metric_order = 2;
  std::function<Jet(InvariantContext&)> eval;
  static FlatScalar of(Inv id);
  static FlatScalar basis6(int idx);
};

// ∫D²L[h,h] dvol_g on the flat 2π torus along g + t h, volume element frozen at g.
// Throws RigidityError unless δh = 0.
double d2_flat_form(Inv id, int n, const FourierField& h);
// same without the divergence-free precondition
double d2_flat_form_general(const FlatScalar& L, int n, const FourierField& h);

struct RigidityProbe {
  std::string kind;  // "TT" or "E"
  std::vector<int> k;
  double d2 = 0.0;
  double grad_h = 0.0;   // ∫|∇^k h|²
  double grad_tr = 0.0;  // ∫|∇^k tr h|²
};

struct RigidityFit {
  std::string id;
  int n = 0;
  int k = 1;
  double A = 0.0, B = 0.0;
  double trace_combo = 0.0;  // A/(n−1) + B
  double C = 0.0;            // min{−A, −A−(n−1)B}, set only when both inequalities hold
  double fit_residual = 0.0;  // max relative misfit of the two-term form over the probes
  double consistency = 0.0;   // spread of per-probe A and A/(n−1)+B estimates
  int distinct_frequencies = 0;
  bool A_negative = false, trace_combo_negative = false, infinitesimally_rigid = false;
  double linear_c = 0.0;  // DL[h] = c(−Δ)^k tr h on ker δ
  std::vector<RigidityProbe> probes;
};

// TT probes h = cos(k·x) on a block orthogonal to k; E probes h = E(cos(k·x)).
// Least squares for (A, B); spread above 1e−5 throws RigidityError.
RigidityFit fit_AB(Inv id, int n);

struct FlatBound {
  double lhs = 0.0;    // ∫D²L[h,h]
  double bound = 0.0;  // −C∫|∇^k h|²
  double scale = 0.0;
  bool holds = false;
};
FlatBound flat_spectrum_bound(const RigidityFit& fit, const FourierField& h);

struct LinearTerm {
  std::string id;
  double c = 0.0;
  std::vector<double> per_mode;
  double spread = 0.0;            // max |c_mode − c| / max(1e−300, |c|) (absolute when c = 0)
  double pointwise_residual = 0.0;  // max |DL[h] − c(−Δ)^k tr h| / max|DL[h]|
  double integral = 0.0;          // ∫DL[h] for a generic h (S = 0 on flat metrics)
  double integral_scale = 0.0;
};
// Throws RigidityError when the per-mode values disagree beyond 1e−8.
LinearTerm linear_term_probe(const FlatScalar& L, int n);
LinearTerm linear_term_probe(Inv id, int n);

struct RiemannLinearization {
  double closed_form = 0.0;      // jets against −½(∇_i∇_k h_jl + ∇_j∇_l h_ik − ∇_j∇_k h_il − ∇_i∇_l h_jk)
  double e_map_literal = 0.0;    // DRm[E(Υ)] against n/(2(n−1))·DRm(Υ)
  double e_map_measured = 0.0;   // DRm[E(Υ)] against 1/(2(n−1))·DRm(Υ)
  double measured_factor = 0.0;  // least-squares ratio DRm[E(Υ)] / DRm(Υ)
};
// relative residuals maximized over sample points; Υ must have mean zero
RiemannLinearization flat_riemann_linearization_residual(int n, const FourierField& h, const FourierField& upsilon);

struct SingularIdentity {
  double lhs = 0.0;         // ∫D²R[h,h]
  double dgamma = 0.0;      // ∫⟨D(Γ*(1))[h], h⟩ = −∫⟨DRic[h], h⟩
  double trace_term = 0.0;  // −½∫⟨Γ*(tr h), h⟩
  double scale = 0.0;
  double residual() const;  // |lhs − dgamma − trace_term| / max(1, scale)
};
SingularIdentity singular_identity_check_R(int n, const FourierField& h);

}  // namespace cvi
