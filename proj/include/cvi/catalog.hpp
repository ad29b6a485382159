#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "cvi/geometry.hpp"

namespace cvi {

struct CatalogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Inv { J, R, Sigma2, Q4, W2, V3, Q6, I1, I2, K1, K2, K3, L1, L2, L3 };

struct InvariantEntry {
  Inv id;
  std::string name;
  int k = 1;             // weight −2k
  int min_dim = 2;
  int metric_order = 2;  // metric derivatives consumed
  bool is_cvi = true;
  bool pointwise_conformal = false;
  bool constant_at_einstein = true;
  bool has_einstein_polynomial = false;
};

const std::vector<InvariantEntry>& catalog();
const InvariantEntry& entry(Inv id);
const InvariantEntry& entry(const std::string& name);  // throws CatalogError
// J, σ₂, Q₄, |W|², v₃, Q₆, I₁, I₂, K₁, K₂, K₃, L₁, L₂, L₃
std::vector<Inv> cvi_ids();

// the 17 weight −6 Riemannian invariants, in this order
inline constexpr int kBasis6 = 17;
const std::array<std::string, kBasis6>& basis6_names();

// Scalar invariants over one JetFrame, with shared intermediate quantities.
// eval(id, q) returns a jet of spatial order q; it needs frame order ≥ q + metric_order.
// t-derivatives carried by the frame pass through unchanged.
class InvariantContext {
 public:
  explicit InvariantContext(const JetFrame& F);
  const JetFrame& frame() const { return F_; }

  Jet eval(Inv id, int q = 0);
  Jet basis6(int idx, int q = 0);

  // building blocks
  Jet J(int q);
  Jet P2(int q);    // |P|²
  Jet trP3(int q);
  Jet BP(int q);    // ⟨B,P⟩
  Jet W2(int q);    // |W|²
  Jet WP2(int q);   // W_ijkl P^ik P^jl
  Jet W2P(int q);   // ⟨W², P⟩ = P_i^s W_sjkl W^ijkl
  Jet C2(int q);    // |C|²
  Jet L1(int q);
  Jet L2(int q);
  Jet lapJ(int q);
  Jet lap2J(int q);
  Jet lapJ2(int q);  // Δ(J²)
  Jet lapP2(int q);
  Jet lapW2(int q);
  Jet divPdJ(int q);  // δ(P(∇J))
  Jet divCP(int q);   // ∇^k(C_skt P^st)
  Jet divWC(int q);   // ∇^l(W_ijkl C^ijk)

 private:
  const JetFrame& F_;
  int n_;
  std::map<std::pair<std::string, int>, Jet> memo_;
  std::map<std::pair<std::string, int>, JTensor> tmemo_;

  const JTensor& T(const std::string& name, int q);  // truncated tensors
  template <class Fn>
  Jet memo(const std::string& key, int q, Fn&& fn);
  Jet lap(const Jet& f);
};

void check_dimension(Inv id, int n);

// pointwise value at a chart point
double eval_invariant(Inv id, const Chart& chart, std::span<const double> point);
std::array<double, kBasis6> eval_riem_basis6(const Chart& chart, std::span<const double> point);

// |L(c²g) − c^{−2k}L(g)| / max(1, |L(g)|), maximized over the points
double homogeneity_check(Inv id, const Chart& chart, double c, const std::vector<std::vector<double>>& points);

// Chart with every metric component multiplied by s
Chart scale_metric(const Chart& chart, double s);

}  // namespace cvi
