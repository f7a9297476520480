#include "finsler/expr.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "finsler/error.hpp"

namespace finsler {

namespace {

bool is_const(const Expr& e, double v) { return e.is_constant() && e.constant_value() == v; }

bool node_uses(const Expr::Node& n, ExprOp var) {
  if (n.op == var) return true;
  if (n.lhs && node_uses(*n.lhs, var)) return true;
  if (n.rhs && node_uses(*n.rhs, var)) return true;
  return false;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_node(const Expr::Node& n, std::ostringstream& os) {
  auto unary = [&](const char* name) {
    os << name << '(';
    write_node(*n.lhs, os);
    os << ')';
  };
  auto binary = [&](const char* sym) {
    os << '(';
    write_node(*n.lhs, os);
    os << sym;
    write_node(*n.rhs, os);
    os << ')';
  };
  switch (n.op) {
    case ExprOp::Constant: os << format_number(n.value); break;
    case ExprOp::X: os << 'x' << (n.index + 1); break;
    case ExprOp::Y: os << 'y' << (n.index + 1); break;
    case ExprOp::Neg: unary("-"); break;
    case ExprOp::Add: binary("+"); break;
    case ExprOp::Sub: binary("-"); break;
    case ExprOp::Mul: binary("*"); break;
    case ExprOp::Div: binary("/"); break;
    case ExprOp::Pow: binary("^"); break;
    case ExprOp::Sin: unary("sin"); break;
    case ExprOp::Cos: unary("cos"); break;
    case ExprOp::Exp: unary("exp"); break;
    case ExprOp::Ln: unary("ln"); break;
    case ExprOp::Sqrt: unary("sqrt"); break;
  }
}

}  // namespace

Expr::Expr(double c) {
  auto n = std::make_shared<Node>();
  n->op = ExprOp::Constant;
  n->value = c;
  node_ = std::move(n);
}

Expr Expr::x(int i) {
  auto n = std::make_shared<Node>();
  n->op = ExprOp::X;
  n->index = i;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::y(int i) {
  auto n = std::make_shared<Node>();
  n->op = ExprOp::Y;
  n->index = i;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::make(ExprOp op, const Expr& a, const Expr& b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = a.node_;
  n->rhs = b.node_;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

bool Expr::uses_x() const { return node_uses(*node_, ExprOp::X); }
bool Expr::uses_y() const { return node_uses(*node_, ExprOp::Y); }

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() + b.constant_value());
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  return Expr::make(ExprOp::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() - b.constant_value());
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return -b;
  return Expr::make(ExprOp::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() * b.constant_value());
  if (is_const(a, 0.0) || is_const(b, 0.0)) return Expr(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  return Expr::make(ExprOp::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() / b.constant_value());
  if (is_const(a, 0.0)) return Expr(0.0);
  if (is_const(b, 1.0)) return a;
  return Expr::make(ExprOp::Div, a, b);
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr(-a.constant_value());
  return Expr::make(ExprOp::Neg, a);
}

Expr pow(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(std::pow(a.constant_value(), b.constant_value()));
  if (is_const(b, 0.0)) return Expr(1.0);
  if (is_const(b, 1.0)) return a;
  return Expr::make(ExprOp::Pow, a, b);
}

Expr sin(const Expr& a) {
  if (a.is_constant()) return Expr(std::sin(a.constant_value()));
  return Expr::make(ExprOp::Sin, a);
}

Expr cos(const Expr& a) {
  if (a.is_constant()) return Expr(std::cos(a.constant_value()));
  return Expr::make(ExprOp::Cos, a);
}

Expr exp(const Expr& a) {
  if (a.is_constant()) return Expr(std::exp(a.constant_value()));
  return Expr::make(ExprOp::Exp, a);
}

Expr log(const Expr& a) {
  if (a.is_constant()) return Expr(std::log(a.constant_value()));
  return Expr::make(ExprOp::Ln, a);
}

Expr sqrt(const Expr& a) {
  if (a.is_constant()) return Expr(std::sqrt(a.constant_value()));
  return Expr::make(ExprOp::Sqrt, a);
}

namespace {

Expr rebuild_unit(const Expr::Node& n, const std::array<Expr, 3>& unit) {
  switch (n.op) {
    case ExprOp::Constant: return Expr(n.value);
    case ExprOp::X: return Expr::x(n.index);
    case ExprOp::Y: return unit[static_cast<std::size_t>(n.index)];
    default: break;
  }
  const Expr a = rebuild_unit(*n.lhs, unit);
  switch (n.op) {
    case ExprOp::Neg: return -a;
    case ExprOp::Sin: return sin(a);
    case ExprOp::Cos: return cos(a);
    case ExprOp::Exp: return exp(a);
    case ExprOp::Ln: return log(a);
    case ExprOp::Sqrt: return sqrt(a);
    default: break;
  }
  const Expr b = rebuild_unit(*n.rhs, unit);
  switch (n.op) {
    case ExprOp::Add: return a + b;
    case ExprOp::Sub: return a - b;
    case ExprOp::Mul: return a * b;
    case ExprOp::Div: return a / b;
    case ExprOp::Pow: return pow(a, b);
    default: break;
  }
  return Expr(0.0);
}

}  // namespace

Expr Expr::on_unit_direction() const {
  if (!uses_y()) return *this;
  const Expr norm = sqrt(pow(Expr::y(0), 2.0) + pow(Expr::y(1), 2.0) + pow(Expr::y(2), 2.0));
  const std::array<Expr, 3> unit{Expr::y(0) / norm, Expr::y(1) / norm, Expr::y(2) / norm};
  return rebuild_unit(*node_, unit);
}

std::string Expr::to_string() const {
  std::ostringstream os;
  write_node(*node_, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Expr parse() {
    Expr e = expression();
    skip_space();
    if (pos_ != s_.size()) error("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::ParseError, what + " at column " + std::to_string(pos_ + 1) + " in '" + std::string(s_) + "'");
  }

  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool accept_utf8(std::string_view seq) {
    skip_space();
    if (s_.substr(pos_, seq.size()) == seq) {
      pos_ += seq.size();
      return true;
    }
    return false;
  }

  Expr expression() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + term();
      } else if (accept('-') || accept_utf8("\xE2\x88\x92")) {
        lhs = lhs - term();
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*') || accept_utf8("\xC3\x97")) {
        lhs = lhs * unary();
      } else if (accept('/') || accept_utf8("\xC3\xB7")) {
        lhs = lhs / unary();
      } else {
        return lhs;
      }
    }
  }

  Expr unary() {
    if (accept('-') || accept_utf8("\xE2\x88\x92")) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) return pow(base, unary());
    return base;
  }

  Expr primary() {
    skip_space();
    if (pos_ >= s_.size()) error("unexpected end of expression");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (accept('(')) {
      Expr e = expression();
      if (!accept(')')) error("expected ')'");
      return e;
    }
    if (accept_utf8("\xCF\x80")) return Expr(std::numbers::pi);
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view id = s_.substr(start, pos_ - start);
      if (id == "pi") return Expr(std::numbers::pi);
      if (id.size() == 2 && (id[0] == 'x' || id[0] == 'y') && id[1] >= '1' && id[1] <= '3') {
        const int idx = id[1] - '1';
        return id[0] == 'x' ? Expr::x(idx) : Expr::y(idx);
      }
      auto call = [&](Expr (*fn)(const Expr&)) {
        if (!accept('(')) error("expected '(' after " + std::string(id));
        Expr arg = expression();
        if (!accept(')')) error("expected ')'");
        return fn(arg);
      };
      if (id == "sin") return call(static_cast<Expr (*)(const Expr&)>(&sin));
      if (id == "cos") return call(static_cast<Expr (*)(const Expr&)>(&cos));
      if (id == "exp") return call(static_cast<Expr (*)(const Expr&)>(&exp));
      if (id == "ln") return call(static_cast<Expr (*)(const Expr&)>(&log));
      if (id == "sqrt") return call(static_cast<Expr (*)(const Expr&)>(&sqrt));
      pos_ = start;
      error("unknown identifier '" + std::string(id) + "'");
    }
    error(std::string("unexpected character '") + c + "'");
  }

  Expr number() {
    const std::string rest(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) error("malformed number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return Expr(v);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expression(std::string_view text) { return Parser(text).parse(); }

}  // namespace finsler
