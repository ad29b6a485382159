#include "cvi/dsl.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>

namespace cvi {

namespace {

Expr make(Op op, Expr a = nullptr, Expr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

double apply_func(Op f, double x) {
  switch (f) {
    case Op::Sin: return std::sin(x);
    case Op::Cos: return std::cos(x);
    case Op::Exp: return std::exp(x);
    case Op::Log:
      if (!(x > 0.0)) throw DomainError("log of non-positive value");
      return std::log(x);
    case Op::Sqrt:
      if (x < 0.0) throw DomainError("sqrt of negative value");
      return std::sqrt(x);
    default: throw std::logic_error("not a function");
  }
}

double apply_pow(double a, double p) {
  if (p != std::round(p) && a < 0.0) throw DomainError("non-integer power of negative value");
  if (a == 0.0 && p < 0.0) throw DomainError("division by zero");
  return std::pow(a, p);
}

const char* func_name(Op f) {
  switch (f) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    default: return "?";
  }
}

}  // namespace

Expr constant(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

Expr symbol(const std::string& name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Sym;
  n->name = name;
  return n;
}

bool is_const(const Expr& e, double* v) {
  if (e->op != Op::Const) return false;
  if (v) *v = e->value;
  return true;
}

Expr add(Expr a, Expr b) {
  double x, y;
  bool ca = is_const(a, &x), cb = is_const(b, &y);
  if (ca && cb) return constant(x + y);
  if (ca && x == 0.0) return b;
  if (cb && y == 0.0) return a;
  return make(Op::Add, std::move(a), std::move(b));
}

Expr sub(Expr a, Expr b) {
  double x, y;
  bool ca = is_const(a, &x), cb = is_const(b, &y);
  if (ca && cb) return constant(x - y);
  if (cb && y == 0.0) return a;
  if (ca && x == 0.0) return neg(std::move(b));
  return make(Op::Sub, std::move(a), std::move(b));
}

Expr mul(Expr a, Expr b) {
  double x, y;
  bool ca = is_const(a, &x), cb = is_const(b, &y);
  if (ca && cb) return constant(x * y);
  if ((ca && x == 0.0) || (cb && y == 0.0)) return constant(0.0);
  if (ca && x == 1.0) return b;
  if (cb && y == 1.0) return a;
  return make(Op::Mul, std::move(a), std::move(b));
}

Expr div(Expr a, Expr b) {
  double x, y;
  bool ca = is_const(a, &x), cb = is_const(b, &y);
  if (cb && y == 0.0) throw DomainError("division by zero");
  if (ca && cb) return constant(x / y);
  if (ca && x == 0.0) return constant(0.0);
  if (cb && y == 1.0) return a;
  return make(Op::Div, std::move(a), std::move(b));
}

Expr neg(Expr a) {
  double x;
  if (is_const(a, &x)) return constant(-x);
  if (a->op == Op::Neg) return a->a;
  return make(Op::Neg, std::move(a));
}

Expr power(Expr a, Expr b) {
  double x, y;
  bool ca = is_const(a, &x), cb = is_const(b, &y);
  if (ca && cb) return constant(apply_pow(x, y));
  if (cb && y == 1.0) return a;
  if (cb && y == 0.0) return constant(1.0);
  return make(Op::Pow, std::move(a), std::move(b));
}

Expr func(Op f, Expr a) {
  double x;
  if (is_const(a, &x)) return constant(apply_func(f, x));
  return make(f, std::move(a));
}

// ---------------------------------------------------------------- parser

namespace {

class Parser {
 public:
  Parser(const std::string& s, const std::vector<std::string>& declared) : s_(s), declared_(declared) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) throw ParseError("unexpected character '" + std::string(1, s_[pos_]) + "'", pos_);
    return e;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (eat('+')) e = add(e, term());
      else if (eat('-')) e = sub(e, term());
      else return e;
    }
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (eat('*')) e = mul(e, unary());
      else if (eat('/')) e = div(e, unary());
      else return e;
    }
  }

  Expr unary() {
    if (eat('-')) return neg(unary());
    return pow_level();
  }

  Expr pow_level() {
    Expr base = primary();
    if (eat('^')) return power(base, unary());
    return base;
  }

  Expr primary() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      std::string id = s_.substr(start, pos_ - start);
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        static const std::pair<const char*, Op> fns[] = {
            {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}};
        for (auto& [nm, op] : fns) {
          if (id == nm) {
            ++pos_;
            Expr arg = expr();
            if (!eat(')')) throw ParseError("expected ')'", pos_);
            return func(op, arg);
          }
        }
        throw ParseError("unknown function '" + id + "'", start);
      }
      if (std::find(declared_.begin(), declared_.end(), id) == declared_.end()) throw UnknownSymbolError(id);
      return symbol(id);
    }
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  Expr number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) throw ParseError("malformed number", start);
    return constant(v);
  }

  const std::string& s_;
  const std::vector<std::string>& declared_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(const std::string& text, const std::vector<std::string>& declared) {
  return Parser(text, declared).parse();
}

// ---------------------------------------------------------------- calculus

Expr diff_expr(const Expr& e, const std::string& x) {
  switch (e->op) {
    case Op::Const: return constant(0.0);
    case Op::Sym: return constant(e->name == x ? 1.0 : 0.0);
    case Op::Add: return add(diff_expr(e->a, x), diff_expr(e->b, x));
    case Op::Sub: return sub(diff_expr(e->a, x), diff_expr(e->b, x));
    case Op::Neg: return neg(diff_expr(e->a, x));
    case Op::Mul:
      return add(mul(diff_expr(e->a, x), e->b), mul(e->a, diff_expr(e->b, x)));
    case Op::Div: {
      Expr da = diff_expr(e->a, x), db = diff_expr(e->b, x);
      if (is_const(db)) return div(da, e->b);
      return div(sub(mul(da, e->b), mul(e->a, db)), power(e->b, constant(2.0)));
    }
    case Op::Pow: {
      double p;
      Expr da = diff_expr(e->a, x);
      if (is_const(e->b, &p)) return mul(mul(constant(p), power(e->a, constant(p - 1.0))), da);
      Expr db = diff_expr(e->b, x);
      return mul(e, add(mul(db, func(Op::Log, e->a)), div(mul(e->b, da), e->a)));
    }
    case Op::Sin: return mul(func(Op::Cos, e->a), diff_expr(e->a, x));
    case Op::Cos: return neg(mul(func(Op::Sin, e->a), diff_expr(e->a, x)));
    case Op::Exp: return mul(e, diff_expr(e->a, x));
    case Op::Log: return div(diff_expr(e->a, x), e->a);
    case Op::Sqrt: return div(diff_expr(e->a, x), mul(constant(2.0), e));
  }
  return constant(0.0);
}

bool references(const Expr& e, const std::string& s) {
  if (!e) return false;
  if (e->op == Op::Sym) return e->name == s;
  return references(e->a, s) || references(e->b, s);
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (!a || !b) return a == b;
  if (a->op != b->op) return false;
  if (a->op == Op::Const) return std::bit_cast<std::uint64_t>(a->value) == std::bit_cast<std::uint64_t>(b->value);
  if (a->op == Op::Sym) return a->name == b->name;
  return structurally_equal(a->a, b->a) && structurally_equal(a->b, b->b);
}

// ---------------------------------------------------------------- printing

namespace {

int prec(const Expr& e) {
  switch (e->op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return e->value < 0.0 || std::signbit(e->value) ? 3 : 5;
    default: return 5;
  }
}

std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void print(const Expr& e, std::string& out);

void wrap(const Expr& e, bool paren, std::string& out) {
  if (paren) out += '(';
  print(e, out);
  if (paren) out += ')';
}

void print(const Expr& e, std::string& out) {
  switch (e->op) {
    case Op::Const: out += num(e->value); break;
    case Op::Sym: out += e->name; break;
    case Op::Add:
    case Op::Sub:
      wrap(e->a, prec(e->a) < 1, out);
      out += e->op == Op::Add ? " + " : " - ";
      wrap(e->b, prec(e->b) <= 1, out);
      break;
    case Op::Mul:
    case Op::Div:
      wrap(e->a, prec(e->a) < 2, out);
      out += e->op == Op::Mul ? "*" : "/";
      wrap(e->b, prec(e->b) <= 2, out);
      break;
    case Op::Neg:
      out += "-";
      wrap(e->a, prec(e->a) < 3, out);
      break;
    case Op::Pow:
      wrap(e->a, prec(e->a) < 5, out);
      out += "^";
      wrap(e->b, prec(e->b) < 3, out);
      break;
    default:
      out += func_name(e->op);
      out += '(';
      print(e->a, out);
      out += ')';
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string s;
  print(e, s);
  return s;
}

// ---------------------------------------------------------------- programs

Program::Program(const Expr& e, const std::vector<std::string>& slots) {
  auto emit = [&](auto&& self, const Expr& x) -> void {
    switch (x->op) {
      case Op::Const: code_.push_back({Op::Const, 0, x->value}); return;
      case Op::Sym: {
        auto it = std::find(slots.begin(), slots.end(), x->name);
        if (it == slots.end()) throw UnknownSymbolError(x->name);
        code_.push_back({Op::Sym, static_cast<int>(it - slots.begin()), 0.0});
        return;
      }
      case Op::Pow: {
        double p;
        self(self, x->a);
        if (is_const(x->b, &p)) {
          code_.push_back({Op::Pow, -1, p});
        } else {
          self(self, x->b);
          code_.push_back({Op::Pow, 1, 0.0});
        }
        return;
      }
      default:
        self(self, x->a);
        if (x->b) self(self, x->b);
        code_.push_back({x->op, 0, 0.0});
    }
  };
  emit(emit, e);
}

double Program::eval(std::span<const double> sv) const {
  std::vector<double> st;
  st.reserve(16);
  for (const Ins& in : code_) {
    switch (in.op) {
      case Op::Const: st.push_back(in.c); break;
      case Op::Sym: st.push_back(sv[in.slot]); break;
      case Op::Neg: st.back() = -st.back(); break;
      case Op::Sin:
      case Op::Cos:
      case Op::Exp:
      case Op::Log:
      case Op::Sqrt: st.back() = apply_func(in.op, st.back()); break;
      case Op::Pow:
        if (in.slot < 0) {
          st.back() = apply_pow(st.back(), in.c);
        } else {
          double b = st.back();
          st.pop_back();
          double a = st.back();
          if (!(a > 0.0)) throw DomainError("general power of non-positive value");
          st.back() = std::exp(b * std::log(a));
        }
        break;
      default: {
        double b = st.back();
        st.pop_back();
        double& a = st.back();
        if (in.op == Op::Add) a += b;
        else if (in.op == Op::Sub) a -= b;
        else if (in.op == Op::Mul) a *= b;
        else {
          if (b == 0.0) throw DomainError("division by zero");
          a /= b;
        }
      }
    }
  }
  return st.back();
}

Jet Program::eval(std::span<const Jet> sv, const JetLayout& layout, int order) const {
  std::vector<Jet> st;
  st.reserve(16);
  for (const Ins& in : code_) {
    switch (in.op) {
      case Op::Const: st.emplace_back(layout, order, in.c); break;
      case Op::Sym: st.push_back(sv[in.slot]); break;
      case Op::Neg: st.back() *= -1.0; break;
      case Op::Sin: st.back() = sin(st.back()); break;
      case Op::Cos: st.back() = cos(st.back()); break;
      case Op::Exp: st.back() = exp(st.back()); break;
      case Op::Log: st.back() = log(st.back()); break;
      case Op::Sqrt: st.back() = sqrt(st.back()); break;
      case Op::Pow:
        if (in.slot < 0) {
          st.back() = pow(st.back(), in.c);
        } else {
          Jet b = std::move(st.back());
          st.pop_back();
          st.back() = exp(b * log(st.back()));
        }
        break;
      default: {
        Jet b = std::move(st.back());
        st.pop_back();
        Jet& a = st.back();
        if (in.op == Op::Add) a += b;
        else if (in.op == Op::Sub) a -= b;
        else if (in.op == Op::Mul) a = a * b;
        else a = a / b;
      }
    }
  }
  return st.back();
}

Jet eval_jet(const Expr& e, const std::vector<std::string>& coords, std::span<const double> point, int order) {
  if (order > kMaxJetOrder) throw JetError("jet order overflow: requested " + std::to_string(order));
  const JetLayout& L = JetLayout::get(static_cast<int>(coords.size()), order, 0);
  std::vector<Jet> slots;
  for (std::size_t i = 0; i < coords.size(); ++i) slots.push_back(Jet::variable(L, order, static_cast<int>(i), point[i]));
  return Program(e, coords).eval(slots, L, order);
}

}  // namespace cvi
