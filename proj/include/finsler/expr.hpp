#pragma once

// Closed-form expressions in the chart coordinates x1..x3 and direction
// components y1..y3. Grammar:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'pi' | x1..x3 | y1..y3
//            | fn '(' expr ')' | '(' expr ')'
//   fn      := sin | cos | exp | ln | sqrt
//
// Expressions are immutable DAGs. Evaluation is generic in the scalar type,
// so the same tree serves doubles and jets.

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>

namespace finsler {

enum class ExprOp { Constant, X, Y, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Ln, Sqrt };

class Expr {
 public:
  struct Node {
    ExprOp op = ExprOp::Constant;
    double value = 0.0;  // Constant
    int index = 0;       // X, Y
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  Expr() : Expr(0.0) {}
  Expr(double c);  // NOLINT(google-explicit-constructor)

  static Expr x(int i);
  static Expr y(int i);

  ExprOp op() const { return node_->op; }
  bool is_constant() const { return node_->op == ExprOp::Constant; }
  double constant_value() const { return node_->value; }
  bool uses_x() const;
  bool uses_y() const;

  /// Replaces y by y/|y| (Euclidean), making the expression 0-homogeneous in y.
  Expr on_unit_direction() const;

  /// Fully parenthesized canonical text (stable; used for hashing and reports).
  std::string to_string() const;

  const Node& node() const { return *node_; }

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& a, const Expr& b);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr exp(const Expr& a);
  friend Expr log(const Expr& a);
  friend Expr sqrt(const Expr& a);

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make(ExprOp op, const Expr& a, const Expr& b = Expr());

  std::shared_ptr<const Node> node_;
};

/// Throws Error(ParseError) with the offending column on malformed input.
Expr parse_expression(std::string_view text);

namespace expr_detail {

template <class T>
T integer_power(const T& base, int n) {
  if (n == 0) return T(1.0);
  if (n < 0) return T(1.0) / integer_power(base, -n);
  T result = base;
  T b = base;
  int e = n - 1;
  while (e > 0) {
    if (e & 1) result = result * b;
    e >>= 1;
    if (e > 0) b = b * b;
  }
  return result;
}

template <class T>
T eval_node(const Expr::Node& n, const std::array<T, 3>& x, const std::array<T, 3>& y) {
  using std::cos;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sin;
  using std::sqrt;
  switch (n.op) {
    case ExprOp::Constant: return T(n.value);
    case ExprOp::X: return x[static_cast<std::size_t>(n.index)];
    case ExprOp::Y: return y[static_cast<std::size_t>(n.index)];
    case ExprOp::Neg: return -eval_node(*n.lhs, x, y);
    case ExprOp::Add: return eval_node(*n.lhs, x, y) + eval_node(*n.rhs, x, y);
    case ExprOp::Sub: return eval_node(*n.lhs, x, y) - eval_node(*n.rhs, x, y);
    case ExprOp::Mul: {
      // Constant factors scale instead of multiplying full jets.
      if (n.lhs->op == ExprOp::Constant) return eval_node(*n.rhs, x, y) * n.lhs->value;
      if (n.rhs->op == ExprOp::Constant) return eval_node(*n.lhs, x, y) * n.rhs->value;
      return eval_node(*n.lhs, x, y) * eval_node(*n.rhs, x, y);
    }
    case ExprOp::Div: {
      if (n.rhs->op == ExprOp::Constant) return eval_node(*n.lhs, x, y) * (1.0 / n.rhs->value);
      return eval_node(*n.lhs, x, y) / eval_node(*n.rhs, x, y);
    }
    case ExprOp::Pow: {
      if (n.rhs->op == ExprOp::Constant) {
        const double e = n.rhs->value;
        if (e == std::round(e) && std::abs(e) <= 16.0) {
          return integer_power(eval_node(*n.lhs, x, y), static_cast<int>(e));
        }
        return pow(eval_node(*n.lhs, x, y), e);
      }
      return exp(eval_node(*n.rhs, x, y) * log(eval_node(*n.lhs, x, y)));
    }
    case ExprOp::Sin: return sin(eval_node(*n.lhs, x, y));
    case ExprOp::Cos: return cos(eval_node(*n.lhs, x, y));
    case ExprOp::Exp: return exp(eval_node(*n.lhs, x, y));
    case ExprOp::Ln: return log(eval_node(*n.lhs, x, y));
    case ExprOp::Sqrt: return sqrt(eval_node(*n.lhs, x, y));
  }
  return T(0.0);
}

}  // namespace expr_detail

template <class T>
T evaluate(const Expr& e, const std::array<T, 3>& x, const std::array<T, 3>& y) {
  return expr_detail::eval_node(e.node(), x, y);
}

inline double evaluate(const Expr& e, const std::array<double, 3>& x, const std::array<double, 3>& y) {
  return expr_detail::eval_node<double>(e.node(), x, y);
}

}  // namespace finsler
