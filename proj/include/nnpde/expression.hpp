#pragma once

#include <memory>
#include <string>

namespace nnpde {

// Arithmetic expression over the variables t, x, y, u and the constant pi.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | variable | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | tanh | log | sqrt
//
// Parse failures throw ConfigError with the offending position.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text);
  static Expression constant(double value);

  double operator()(double t, double x, double y, double u = 0.0) const;

  // Symbolic derivative with respect to u.
  Expression derivative_u() const;

  // True when the variable ('t', 'x', 'y' or 'u') occurs.
  bool depends_on(char variable) const;

  const std::string& source() const { return source_; }

 private:
  Expression(std::shared_ptr<const Node> root, std::string source);

  std::shared_ptr<const Node> root_;
  std::string source_;
};

}  // namespace nnpde
