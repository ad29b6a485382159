#pragma once

#include <string>

#include "cvi/geometry.hpp"

namespace cvi {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// coords th1..th{n-1} (polar, Gauss) and phi (azimuth, periodic)
Chart round_sphere(int n, double radius = 1.0);
Chart flat_torus(int n, double period = 2.0 * 3.141592653589793);
Chart product(const Chart& a, const Chart& b);

// e^{2Υ} g
Chart conformal_perturb(const Chart& c, const std::string& upsilon);
Chart conformal_perturb(const Chart& c, const Expr& upsilon);

// δ + ε·(seeded trig polynomial) on a 2π torus. Only the first `active` coordinates
// (all when active <= 0) appear in the perturbation.
Chart generic_metric(int n, unsigned seed, double eps, int active = 0);

// ν solves ν⁴+4ν³−6ν²+12ν−3 = 0 in (0,1)
struct PageParameters {
  double nu = 0.0;
  double c = 0.0;
  double quartic_residual = 0.0;
  std::string alpha2, beta2, gamma2;  // Expr text in r, nu, c
};
PageParameters page_parameters();
Chart page_metric();

// Weyl components of the Page metric in the frame ê₀ = α dr, ê₁ = β(dτ − 4sin²(ρ/2)dθ),
// ê₂ = γ dρ, ê₃ = γ sinρ dθ, next to the closed-form references
struct PageFrameCheck {
  double W0101 = 0, W0101_ref = 0, W0101_alt = 0;  // alt: (1+ν²) in place of (1+ν)²
  double W0123 = 0, W0123_ref = 0, W0123_alt = 0;  // alt: γ^{-4} in place of γ⁴
  double W0202 = 0, W0303 = 0, W1212 = 0, W1313 = 0;
  double W0231 = 0, W0312 = 0;
  double W2 = 0;            // |W|²
  double ricci_residual = 0;  // max |Ric − 3(1+ν²)g| / max |g|
};
PageFrameCheck page_frame_check(std::span<const double> point);

// Page × S²(ρ*) with ρ* chosen so the product is Einstein
Chart page_times_sphere();

// zonal spherical harmonics in th1 of degree 1, 2 (unnormalized)
std::string sphere_harmonic(int n, int degree);

// positivity at every quadrature node, else ModelError
void check_positive_on_nodes(const Chart& c, double floor = 0.1);

}  // namespace cvi
