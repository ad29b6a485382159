#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvi {

inline constexpr int kMaxJetOrder = 7;
inline constexpr int kMaxJetVars = 8;

struct JetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using MultiIndex = std::array<std::uint8_t, kMaxJetVars + 1>;

// Monomial bookkeeping shared by every jet with the same number of spatial
// variables, spatial order and t-order. The t variable (if any) sits at slot nx.
// Monomials are sorted by (spatial degree, t degree, lex) so a jet of lower
// spatial order is a prefix of the table.
class JetLayout {
 public:
  struct Term {
    int a;
    int b;
    double w;
  };

  static const JetLayout& get(int nx, int m, int mt);

  int nx() const { return nx_; }
  int max_order() const { return m_; }
  int t_order() const { return mt_; }
  int size(int order) const { return upto_[order]; }
  const MultiIndex& alpha(int idx) const { return alpha_[idx]; }
  int index(const MultiIndex& a) const;  // -1 if absent
  int t_index(int j) const;
  int shift(int var, int idx) const { return shift_[var][idx]; }
  const std::vector<Term>& terms() const { return terms_; }
  int term_begin(int out) const { return term_begin_[out]; }

 private:
  JetLayout(int nx, int m, int mt);
  int nx_, m_, mt_;
  std::vector<MultiIndex> alpha_;
  std::vector<int> upto_;
  std::vector<Term> terms_;
  std::vector<int> term_begin_;
  std::vector<std::vector<int>> shift_;
  std::vector<std::pair<std::uint64_t, int>> lookup_;
};

// Truncated jet holding partial-derivative values (not Taylor coefficients).
class Jet {
 public:
  Jet() = default;
  Jet(const JetLayout& layout, int order, double c = 0.0);

  static Jet variable(const JetLayout& layout, int order, int var, double at);

  const JetLayout& layout() const { return *layout_; }
  int order() const { return order_; }
  bool empty() const { return layout_ == nullptr; }
  double value() const { return v_[0]; }
  double operator[](int idx) const { return v_[idx]; }
  double& operator[](int idx) { return v_[idx]; }
  int size() const { return static_cast<int>(v_.size()); }
  const std::vector<double>& data() const { return v_; }

  // value of ∂^α at the base point; zero beyond the stored order
  double deriv(const MultiIndex& a) const;
  // ∂_t^j of the spatial value
  double t_deriv(int j) const;
  Jet truncated(int order) const;
  Jet dx(int var) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(double s);
  Jet& operator+=(double s) {
    v_[0] += s;
    return *this;
  }
  // this += s * o  (orders: result keeps min order)
  void axpy(double s, const Jet& o);
  // this += a * b
  void fma(const Jet& a, const Jet& b);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a += -s; }
  friend Jet operator-(double s, Jet a) {
    a *= -1.0;
    return a += s;
  }
  friend Jet operator-(Jet a) { return a *= -1.0; }

 private:
  const JetLayout* layout_ = nullptr;
  int order_ = 0;
  std::vector<double> v_;
};

// f(a + u) = Σ f^(k)(a)/k! u^k with derivs[k] = f^(k)(a).
Jet compose(const Jet& x, const std::vector<double>& derivs);
int nilpotency_degree(const Jet& x);

Jet sin(const Jet& x);
Jet cos(const Jet& x);
Jet exp(const Jet& x);
Jet log(const Jet& x);
Jet sqrt(const Jet& x);
Jet reciprocal(const Jet& x);
Jet pow(const Jet& x, double p);
Jet powi(const Jet& x, int p);

std::string to_string(const MultiIndex& a, int nvars);

}  // namespace cvi
