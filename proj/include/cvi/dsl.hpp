#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvi/jet.hpp"

namespace cvi {

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset(offset) {}
  std::size_t offset;
};

struct UnknownSymbolError : std::runtime_error {
  explicit UnknownSymbolError(const std::string& name)
      : std::runtime_error("unknown symbol '" + name + "'"), name(name) {}
  std::string name;
};

enum class Op { Const, Sym, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log, Sqrt };

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
  Op op;
  double value = 0.0;  // Const
  std::string name;    // Sym
  Expr a, b;
};

// smart constructors (constant folding only)
Expr constant(double v);
Expr symbol(const std::string& name);
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr mul(Expr a, Expr b);
Expr div(Expr a, Expr b);
Expr neg(Expr a);
Expr power(Expr a, Expr b);
Expr func(Op f, Expr a);

bool is_const(const Expr& e, double* v = nullptr);

Expr parse_expr(const std::string& text, const std::vector<std::string>& declared);
Expr diff_expr(const Expr& e, const std::string& symbol);
std::string to_string(const Expr& e);
bool references(const Expr& e, const std::string& symbol);
bool structurally_equal(const Expr& a, const Expr& b);

// Symbols are resolved once into slots; slots are bound per evaluation.
class Program {
 public:
  Program() = default;
  Program(const Expr& e, const std::vector<std::string>& slots);

  double eval(std::span<const double> slot_values) const;
  Jet eval(std::span<const Jet> slot_values, const JetLayout& layout, int order) const;

 private:
  struct Ins {
    Op op;
    int slot;
    double c;
  };
  std::vector<Ins> code_;
};

// Partial derivatives of e at point w.r.t. all listed coordinates, up to order.
Jet eval_jet(const Expr& e, const std::vector<std::string>& coords, std::span<const double> point,
             int order);

}  // namespace cvi
