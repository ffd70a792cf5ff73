#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>

#include "switchsynth/interval.hpp"

namespace switchsynth {

enum class ExprKind { Constant, Variable, Neg, Sin, Cos, Exp, Sqrt, Add, Sub, Mul, Div, Pow };

/// Immutable expression tree. Copies share structure.
class Expr {
public:
  static Expr constant(double value, std::string name = {});
  static Expr variable(std::string name);
  static Expr unary(ExprKind kind, Expr operand);
  static Expr binary(ExprKind kind, Expr lhs, Expr rhs);
  /// Throws DomainError unless exponent >= 1.
  static Expr power(Expr base, int exponent);

  ExprKind kind() const noexcept { return node_->kind; }
  double value() const noexcept { return node_->value; }
  /// Variable name, or the name of a named constant (empty for literals).
  const std::string& name() const noexcept { return node_->name; }
  int exponent() const noexcept { return node_->exponent; }
  const Expr& lhs() const noexcept { return *node_->lhs; }
  const Expr& rhs() const noexcept { return *node_->rhs; }
  const Expr& operand() const noexcept { return *node_->lhs; }

  bool is_unary() const noexcept;
  bool is_binary() const noexcept;

  friend bool structurally_equal(const Expr& a, const Expr& b);

private:
  struct Node {
    ExprKind kind = ExprKind::Constant;
    double value = 0.0;
    std::string name;
    int exponent = 0;
    std::shared_ptr<const Expr> lhs;
    std::shared_ptr<const Expr> rhs;
  };
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

bool structurally_equal(const Expr& a, const Expr& b);

/// Names an expression may refer to.
struct Symbols {
  std::set<std::string> variables;
  std::map<std::string, double> constants;
};

/// Precedence, tightest first: `^` (right-associative, positive integer
/// exponents), prefix `-`, then `*` `/`, then `+` `-`. A leading minus
/// negates the whole product that follows it, so `-a*b` is `-(a*b)`.
/// Functions: sin cos exp sqrt. Positions in errors are offset by
/// (line, first_col).
Expr parse_expr(std::string_view text, const Symbols& symbols, int line = 1, int first_col = 1);

/// Fully parenthesised rendering that parse_expr reads back to a
/// structurally identical tree.
std::string to_string(const Expr& e);

/// Natural interval extension. Throws UndeclaredVariable if env lacks a
/// variable, DivisionByZeroInterval or DomainError from the elementaries.
Interval eval_interval(const Expr& e, const std::map<std::string, Interval>& env);

/// Pointwise evaluation in binary64 (no rounding control).
double eval_point(const Expr& e, const std::map<std::string, double>& env);

}  // namespace switchsynth
