#include "nnpde/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "nnpde/errors.hpp"

namespace nnpde {

struct Expression::Node {
  enum class Op { Const, VarT, VarX, VarY, VarU, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Tanh, Log, Sqrt };
  Op op;
  double value = 0.0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using Node = Expression::Node;
using Op = Node::Op;
using Ptr = std::shared_ptr<const Node>;

Ptr leaf(double v) { return std::make_shared<const Node>(Node{Op::Const, v, nullptr, nullptr}); }
Ptr var(Op op) { return std::make_shared<const Node>(Node{op, 0.0, nullptr, nullptr}); }

bool is_const(const Ptr& p, double v) { return p->op == Op::Const && p->value == v; }

Ptr make(Op op, Ptr a, Ptr b = nullptr) {
  // Light folding keeps derivatives of polynomials small.
  switch (op) {
    case Op::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::Sub:
      if (is_const(b, 0.0)) return a;
      break;
    case Op::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return leaf(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Op::Div:
      if (is_const(a, 0.0)) return leaf(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Op::Pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return leaf(1.0);
      break;
    case Op::Neg:
      if (a->op == Op::Const) return leaf(-a->value);
      break;
    default: break;
  }
  if (a && a->op == Op::Const && (!b || b->op == Op::Const) && op != Op::Const) {
    const double x = a->value, y = b ? b->value : 0.0;
    switch (op) {
      case Op::Add: return leaf(x + y);
      case Op::Sub: return leaf(x - y);
      case Op::Mul: return leaf(x * y);
      case Op::Div: return leaf(x / y);
      case Op::Pow: return leaf(std::pow(x, y));
      default: break;
    }
  }
  return std::make_shared<const Node>(Node{op, 0.0, std::move(a), std::move(b)});
}

double eval(const Node& n, double t, double x, double y, double u) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::VarT: return t;
    case Op::VarX: return x;
    case Op::VarY: return y;
    case Op::VarU: return u;
    case Op::Add: return eval(*n.a, t, x, y, u) + eval(*n.b, t, x, y, u);
    case Op::Sub: return eval(*n.a, t, x, y, u) - eval(*n.b, t, x, y, u);
    case Op::Mul: return eval(*n.a, t, x, y, u) * eval(*n.b, t, x, y, u);
    case Op::Div: return eval(*n.a, t, x, y, u) / eval(*n.b, t, x, y, u);
    case Op::Pow: {
      const double base = eval(*n.a, t, x, y, u);
      if (n.b->op == Op::Const && n.b->value == std::round(n.b->value) && std::abs(n.b->value) <= 16) {
        const int e = static_cast<int>(n.b->value);
        double r = 1.0;
        for (int k = 0; k < std::abs(e); ++k) r *= base;
        return e < 0 ? 1.0 / r : r;
      }
      return std::pow(base, eval(*n.b, t, x, y, u));
    }
    case Op::Neg: return -eval(*n.a, t, x, y, u);
    case Op::Sin: return std::sin(eval(*n.a, t, x, y, u));
    case Op::Cos: return std::cos(eval(*n.a, t, x, y, u));
    case Op::Exp: return std::exp(eval(*n.a, t, x, y, u));
    case Op::Tanh: return std::tanh(eval(*n.a, t, x, y, u));
    case Op::Log: return std::log(eval(*n.a, t, x, y, u));
    case Op::Sqrt: return std::sqrt(eval(*n.a, t, x, y, u));
  }
  return 0.0;
}

bool depends(const Node& n, Op v) {
  if (n.op == v) return true;
  return (n.a && depends(*n.a, v)) || (n.b && depends(*n.b, v));
}

Ptr diff_u(const Ptr& p) {
  const Node& n = *p;
  switch (n.op) {
    case Op::Const:
    case Op::VarT:
    case Op::VarX:
    case Op::VarY: return leaf(0.0);
    case Op::VarU: return leaf(1.0);
    case Op::Add: return make(Op::Add, diff_u(n.a), diff_u(n.b));
    case Op::Sub: return make(Op::Sub, diff_u(n.a), diff_u(n.b));
    case Op::Mul:
      return make(Op::Add, make(Op::Mul, diff_u(n.a), n.b), make(Op::Mul, n.a, diff_u(n.b)));
    case Op::Div:
      return make(Op::Div,
                  make(Op::Sub, make(Op::Mul, diff_u(n.a), n.b), make(Op::Mul, n.a, diff_u(n.b))),
                  make(Op::Pow, n.b, leaf(2.0)));
    case Op::Pow: {
      if (!depends(*n.b, Op::VarU)) {
        // b a^(b-1) a'
        return make(Op::Mul, make(Op::Mul, n.b, make(Op::Pow, n.a, make(Op::Sub, n.b, leaf(1.0)))),
                    diff_u(n.a));
      }
      // a^b (b' log a + b a' / a)
      return make(Op::Mul, p,
                  make(Op::Add, make(Op::Mul, diff_u(n.b), make(Op::Log, n.a)),
                       make(Op::Div, make(Op::Mul, n.b, diff_u(n.a)), n.a)));
    }
    case Op::Neg: return make(Op::Neg, diff_u(n.a));
    case Op::Sin: return make(Op::Mul, make(Op::Cos, n.a), diff_u(n.a));
    case Op::Cos: return make(Op::Neg, make(Op::Mul, make(Op::Sin, n.a), diff_u(n.a)));
    case Op::Exp: return make(Op::Mul, p, diff_u(n.a));
    case Op::Tanh:
      return make(Op::Mul, make(Op::Sub, leaf(1.0), make(Op::Pow, p, leaf(2.0))), diff_u(n.a));
    case Op::Log: return make(Op::Div, diff_u(n.a), n.a);
    case Op::Sqrt: return make(Op::Div, diff_u(n.a), make(Op::Mul, leaf(2.0), p));
  }
  return leaf(0.0);
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  Ptr parse() {
    Ptr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("expression '" + s_ + "' at position " + std::to_string(pos_) + ": " + msg);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Ptr expr() {
    Ptr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Op::Add, lhs, term());
      } else if (accept('-')) {
        lhs = make(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Ptr term() {
    Ptr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Op::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make(Op::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  Ptr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  Ptr power() {
    Ptr base = primary();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }

  Ptr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (accept('(')) {
      Ptr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      return leaf(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (id == "t") return var(Op::VarT);
      if (id == "x") return var(Op::VarX);
      if (id == "y") return var(Op::VarY);
      if (id == "u") return var(Op::VarU);
      if (id == "pi") return leaf(std::numbers::pi);
      static const std::vector<std::pair<std::string, Op>> funcs = {
          {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp},
          {"tanh", Op::Tanh}, {"log", Op::Log}, {"sqrt", Op::Sqrt}};
      for (const auto& [name, op] : funcs) {
        if (id == name) {
          expect('(');
          Ptr arg = expr();
          expect(')');
          return make(op, arg);
        }
      }
      pos_ = start;
      fail("unknown identifier '" + id + "'");
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(std::shared_ptr<const Node> root, std::string source)
    : root_(std::move(root)), source_(std::move(source)) {}

Expression Expression::parse(const std::string& text) { return {Parser(text).parse(), text}; }

Expression Expression::constant(double value) { return {leaf(value), std::to_string(value)}; }

double Expression::operator()(double t, double x, double y, double u) const {
  return eval(*root_, t, x, y, u);
}

Expression Expression::derivative_u() const { return {diff_u(root_), "d/du(" + source_ + ")"}; }

bool Expression::depends_on(char variable) const {
  switch (variable) {
    case 't': return depends(*root_, Op::VarT);
    case 'x': return depends(*root_, Op::VarX);
    case 'y': return depends(*root_, Op::VarY);
    case 'u': return depends(*root_, Op::VarU);
    default: return false;
  }
}

}  // namespace nnpde
