#include "switchsynth/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <vector>

#include "switchsynth/errors.hpp"
#include "switchsynth/tape.hpp"

namespace switchsynth {

Expr Expr::constant(double value, std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Constant;
  n->value = value;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Variable;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::unary(ExprKind kind, Expr operand) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::make_shared<const Expr>(std::move(operand));
  Expr e(std::move(n));
  if (!e.is_unary()) throw DomainError("not a unary operator");
  return e;
}

Expr Expr::binary(ExprKind kind, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::make_shared<const Expr>(std::move(lhs));
  n->rhs = std::make_shared<const Expr>(std::move(rhs));
  Expr e(std::move(n));
  if (!e.is_binary()) throw DomainError("not a binary operator");
  return e;
}

Expr Expr::power(Expr base, int exponent) {
  if (exponent < 1) throw DomainError("pow exponent must be a positive integer");
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Pow;
  n->exponent = exponent;
  n->lhs = std::make_shared<const Expr>(std::move(base));
  return Expr(std::move(n));
}

bool Expr::is_unary() const noexcept {
  switch (kind()) {
    case ExprKind::Neg:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp:
    case ExprKind::Sqrt:
      return true;
    default:
      return false;
  }
}

bool Expr::is_binary() const noexcept {
  switch (kind()) {
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::Div:
      return true;
    default:
      return false;
  }
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case ExprKind::Constant:
      return a.value() == b.value() && a.name() == b.name();
    case ExprKind::Variable:
      return a.name() == b.name();
    case ExprKind::Pow:
      return a.exponent() == b.exponent() && structurally_equal(a.lhs(), b.lhs());
    default:
      break;
  }
  if (a.is_unary()) return structurally_equal(a.operand(), b.operand());
  return structurally_equal(a.lhs(), b.lhs()) && structurally_equal(a.rhs(), b.rhs());
}

namespace {

class ExprParser {
public:
  ExprParser(std::string_view text, const Symbols& symbols, int line, int first_col)
      : text_(text), symbols_(symbols), line_(line), first_col_(first_col) {}

  Expr parse() {
    Expr e = additive();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(line_, first_col_ + static_cast<int>(pos_), msg);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr additive() {
    Expr e = signed_term();
    for (;;) {
      if (accept('+'))
        e = Expr::binary(ExprKind::Add, std::move(e), signed_term());
      else if (accept('-'))
        e = Expr::binary(ExprKind::Sub, std::move(e), signed_term());
      else
        return e;
    }
  }

  Expr signed_term() {
    if (accept('-')) return Expr::unary(ExprKind::Neg, signed_term());
    return product();
  }

  Expr product() {
    Expr e = power();
    for (;;) {
      if (accept('*'))
        e = Expr::binary(ExprKind::Mul, std::move(e), operand());
      else if (accept('/'))
        e = Expr::binary(ExprKind::Div, std::move(e), operand());
      else
        return e;
    }
  }

  Expr operand() {
    if (accept('-')) return Expr::unary(ExprKind::Neg, operand());
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (!accept('^')) return base;
    return Expr::power(std::move(base), exponent());
  }

  // Right-associative chain of positive integer literals, folded.
  int exponent() {
    skip_ws();
    const std::size_t start = pos_;
    bool paren = accept('(');
    skip_ws();
    const std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == digits) {
      pos_ = start;
      fail("exponent must be a positive integer literal");
    }
    long v = 0;
    std::from_chars(text_.data() + digits, text_.data() + pos_, v);
    if (paren && !accept(')')) fail("expected ')'");
    if (v < 1 || v > 64) {
      pos_ = start;
      fail("exponent must be between 1 and 64");
    }
    if (accept('^')) {
      const int rest = exponent();
      long r = 1;
      for (int i = 0; i < rest; ++i) {
        r *= v;
        if (r > 64) {
          pos_ = start;
          fail("exponent must be between 1 and 64");
        }
      }
      v = r;
    }
    return static_cast<int>(v);
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = additive();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
      ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_ || !std::isfinite(v)) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::constant(v);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    static const std::map<std::string, ExprKind> functions{
        {"sin", ExprKind::Sin}, {"cos", ExprKind::Cos}, {"exp", ExprKind::Exp}, {"sqrt", ExprKind::Sqrt}};
    if (auto f = functions.find(name); f != functions.end()) {
      if (!accept('(')) fail("expected '(' after " + name);
      Expr arg = additive();
      if (!accept(')')) fail("expected ')'");
      return Expr::unary(f->second, std::move(arg));
    }
    if (symbols_.variables.count(name)) return Expr::variable(std::move(name));
    if (auto k = symbols_.constants.find(name); k != symbols_.constants.end())
      return Expr::constant(k->second, std::move(name));
    throw UndeclaredVariable(name);
  }

  std::string_view text_;
  const Symbols& symbols_;
  int line_;
  int first_col_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, const Symbols& symbols, int line, int first_col) {
  return ExprParser(text, symbols, line, first_col).parse();
}

std::string to_string(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Constant:
      if (!e.name().empty()) return e.name();
      if (std::signbit(e.value())) return "(-" + format_double(-e.value()) + ")";
      return format_double(e.value());
    case ExprKind::Variable:
      return e.name();
    case ExprKind::Neg:
      return "(-" + to_string(e.operand()) + ")";
    case ExprKind::Sin:
      return "sin(" + to_string(e.operand()) + ")";
    case ExprKind::Cos:
      return "cos(" + to_string(e.operand()) + ")";
    case ExprKind::Exp:
      return "exp(" + to_string(e.operand()) + ")";
    case ExprKind::Sqrt:
      return "sqrt(" + to_string(e.operand()) + ")";
    case ExprKind::Pow:
      return "(" + to_string(e.lhs()) + ")^" + std::to_string(e.exponent());
    case ExprKind::Add:
      return "(" + to_string(e.lhs()) + " + " + to_string(e.rhs()) + ")";
    case ExprKind::Sub:
      return "(" + to_string(e.lhs()) + " - " + to_string(e.rhs()) + ")";
    case ExprKind::Mul:
      return "(" + to_string(e.lhs()) + " * " + to_string(e.rhs()) + ")";
    case ExprKind::Div:
      return "(" + to_string(e.lhs()) + " / " + to_string(e.rhs()) + ")";
  }
  return {};
}

namespace {

void collect_variables(const Expr& e, std::set<std::string>& out) {
  if (e.kind() == ExprKind::Variable) {
    out.insert(e.name());
  } else if (e.kind() == ExprKind::Pow || e.is_unary()) {
    collect_variables(e.lhs(), out);
  } else if (e.is_binary()) {
    collect_variables(e.lhs(), out);
    collect_variables(e.rhs(), out);
  }
}

}  // namespace

Interval eval_interval(const Expr& e, const std::map<std::string, Interval>& env) {
  std::set<std::string> used;
  collect_variables(e, used);
  std::vector<std::string> slots;
  std::vector<Interval> values;
  for (const auto& name : used) {
    auto it = env.find(name);
    if (it == env.end()) throw UndeclaredVariable(name);
    slots.push_back(name);
    values.push_back(it->second);
  }
  const Tape tape = Tape::compile(std::span<const Expr>(&e, 1), slots);
  std::vector<Interval> work(tape.size());
  tape.eval(values, work);
  return work[tape.output(0)];
}

double eval_point(const Expr& e, const std::map<std::string, double>& env) {
  std::set<std::string> used;
  collect_variables(e, used);
  std::vector<std::string> slots;
  std::vector<double> values;
  for (const auto& name : used) {
    auto it = env.find(name);
    if (it == env.end()) throw UndeclaredVariable(name);
    slots.push_back(name);
    values.push_back(it->second);
  }
  const Tape tape = Tape::compile(std::span<const Expr>(&e, 1), slots);
  std::vector<double> work(tape.size());
  tape.eval(values, work);
  return work[tape.output(0)];
}

}  // namespace switchsynth
