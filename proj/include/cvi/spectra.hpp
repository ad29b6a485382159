#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cvi/catalog.hpp"

namespace cvi {

struct SpectraError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// DL at an Einstein metric as a polynomial in the eigenvalue λ of −Δ.
// With the stability factor set the operator is q(λ)·(λ − 2J).
struct OperatorPolynomial {
  std::string name;
  int n = 0;
  double J = 0.0;
  std::vector<double> q;  // q(λ) = Σ q[i] λ^i
  bool stability_factor = true;
  bool sphere_only = false;  // valid only where W = 0

  double eval_q(double lambda) const;
  double eval(double lambda) const;
  bool identically_zero() const;
  int degree() const;  // -1 for the zero polynomial
  double leading() const;
};

OperatorPolynomial einstein_operator(Inv id, int n, double J);
// GJMS operator P_{2k} = ∏_{j=1}^k (−Δ + (n+2j−2)(n−2j)J/(2n)); no stability factor
OperatorPolynomial gjms_operator(int k, int n, double J);
// Q_{2k} on a round sphere of radius r from the constant term of P_{2k}, with the
// (n−2k) factor cancelled so the critical case is the analytic continuation
double sphere_q_curvature(int k, int n, double radius = 1.0);

struct SpectrumRow {
  int k = 0;
  double lambda = 0.0;
  double eigenvalue = 0.0;
};
std::vector<SpectrumRow> sphere_spectrum_table(const OperatorPolynomial& op, double radius, int k_max);
std::vector<SpectrumRow> sphere_spectrum_table(Inv id, int n, double radius, int k_max);

struct StabilityVerdict {
  bool stable = false;
  std::vector<int> kernel_modes;  // k ≥ 1 with zero eigenvalue, up to k_max
  bool kernel_is_everything = false;
  double min_positive_gap = 0.0;
  double k0_eigenvalue = 0.0;  // constants, reported only
  bool tail_nonnegative = false;  // q ≥ 0 on [λ₁, ∞) by root analysis
};
StabilityVerdict stability_verdict(const OperatorPolynomial& op, double radius, int k_max = 50);
StabilityVerdict stability_verdict(Inv id, int n, double radius = 1.0, int k_max = 50);

// Einstein metrics other than the sphere have λ₁ > 2J, so stability means q > 0 on [2J, ∞)
struct EinsteinGenericVerdict {
  bool stable = false;
  bool indeterminate = false;  // sphere-only operators
  double q_at_2J = 0.0;
};
EinsteinGenericVerdict einstein_generic_verdict(Inv id, int n, double J);

// real roots of a polynomial of degree ≤ 2 (higher degrees throw)
std::vector<double> real_roots(const std::vector<double>& q);
// q(λ) ≥ 0 (strict = false) or > 0 (strict = true) for all λ ≥ a
bool nonnegative_from(const std::vector<double>& q, double a, bool strict);

// αQ₄ + βσ₂
struct ConeVerdict {
  double alpha = 0.0, beta = 0.0;
  int n = 0;
  bool in_E = false, in_V = false, in_SV = false;
  double witness_V = 0.0;   // (n²+2n−4)α + (n−1)β
  double witness_SV = 0.0;  // (n²−4)α + (n−1)β
  // spectrum of the Einstein operator: leading sign, q ≥ 0 on [2J,∞), q > 0 on [0,∞)
  bool spec_E = false, spec_V = false, spec_SV = false;
  bool routes_agree = false;
  // unit-sphere spectrum k = 1..50 nonnegative with kernel ⊆ {k = 1}
  bool sphere_route_V = false;
  // direct (γ₂, γ₃) conditions when built by det_gradient_membership
  bool has_gamma = false;
  double gamma2 = 0.0, gamma3 = 0.0;
  bool gamma_V = false, gamma_SV = false, gamma_agree = false;
};

OperatorPolynomial cone_operator(double alpha, double beta, int n, double J);
ConeVerdict cone_classify(double alpha, double beta, int n);
// L = (γ₂+γ₃)Q₄ − 4γ₃σ₂
ConeVerdict det_gradient_membership(double gamma2, double gamma3, int n = 4);

}  // namespace cvi
