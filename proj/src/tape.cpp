#include "switchsynth/tape.hpp"

#include <cmath>
#include <map>

#include "switchsynth/errors.hpp"

namespace switchsynth {

namespace {

class Compiler {
public:
  explicit Compiler(std::span<const std::string> slots) {
    for (std::size_t i = 0; i < slots.size(); ++i) slot_index_[slots[i]] = static_cast<int>(i);
  }

  int emit(const Expr& e) {
    using Op = Tape::Op;
    switch (e.kind()) {
      case ExprKind::Constant:
        return push({Op::Const, -1, -1, 0, e.value()});
      case ExprKind::Variable: {
        auto it = slot_index_.find(e.name());
        if (it == slot_index_.end()) throw UndeclaredVariable(e.name());
        return push({Op::Var, it->second, -1, 0, 0.0});
      }
      case ExprKind::Neg:
        return push({Op::Neg, emit(e.operand()), -1, 0, 0.0});
      case ExprKind::Exp:
        return push({Op::Exp, emit(e.operand()), -1, 0, 0.0});
      case ExprKind::Sqrt:
        return push({Op::Sqrt, emit(e.operand()), -1, 0, 0.0});
      case ExprKind::Sin:
      case ExprKind::Cos: {
        const int a = emit(e.operand());
        const int s = push({Op::Sin, a, -1, 0, 0.0});
        const int c = push({Op::Cos, a, s, 0, 0.0});
        code_[s].b = c;
        return e.kind() == ExprKind::Sin ? s : c;
      }
      case ExprKind::Pow: {
        const int a = emit(e.lhs());
        const int chain = product_chain(a, e.exponent());
        return push({Op::Pow, a, chain, e.exponent(), 0.0});
      }
      case ExprKind::Add:
      case ExprKind::Sub:
      case ExprKind::Mul:
      case ExprKind::Div: {
        const int a = emit(e.lhs());
        const int b = emit(e.rhs());
        const Op op = e.kind() == ExprKind::Add   ? Op::Add
                      : e.kind() == ExprKind::Sub ? Op::Sub
                      : e.kind() == ExprKind::Mul ? Op::Mul
                                                  : Op::Div;
        return push({op, a, b, 0, 0.0});
      }
    }
    throw DomainError("unknown expression node");
  }

  std::vector<Tape::Instr> take() { return std::move(code_); }

private:
  int push(Tape::Instr i) {
    code_.push_back(i);
    return static_cast<int>(code_.size()) - 1;
  }

  // a^n as a sequence of products; Taylor coefficients of order >= 1 come from here.
  int product_chain(int a, int n) {
    if (n == 1) return a;
    if (n % 2 == 0) {
      const int half = product_chain(a, n / 2);
      return push({Tape::Op::Mul, half, half, 0, 0.0});
    }
    return push({Tape::Op::Mul, product_chain(a, n - 1), a, 0, 0.0});
  }

  std::map<std::string, int> slot_index_;
  std::vector<Tape::Instr> code_;
};

}  // namespace

Tape Tape::compile(std::span<const Expr> outputs, std::span<const std::string> slots) {
  Compiler c(slots);
  Tape t;
  for (const auto& e : outputs) t.outputs_.push_back(c.emit(e));
  t.code_ = c.take();
  for (auto& in : t.code_) {
    switch (in.op) {
      case Op::Const: in.constant = true; break;
      case Op::Var: in.constant = false; break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
        in.constant = t.code_[static_cast<std::size_t>(in.a)].constant && t.code_[static_cast<std::size_t>(in.b)].constant;
        break;
      default:  // b is a product chain or a companion, both functions of a
        in.constant = t.code_[static_cast<std::size_t>(in.a)].constant;
    }
  }
  t.num_slots_ = slots.size();
  return t;
}

void Tape::eval_node(const Instr& in, std::span<Interval> w, std::size_t i) {
  switch (in.op) {
    case Op::Const: w[i] = Interval(in.c); break;
    case Op::Var: break;
    case Op::Neg: w[i] = -w[in.a]; break;
    case Op::Add: w[i] = w[in.a] + w[in.b]; break;
    case Op::Sub: w[i] = w[in.a] - w[in.b]; break;
    case Op::Mul: w[i] = w[in.a] * w[in.b]; break;
    case Op::Div: w[i] = w[in.a] / w[in.b]; break;
    case Op::Pow: w[i] = in.n == 1 ? w[in.a] : intersect(pow(w[in.a], in.n), w[in.b]); break;
    case Op::Sin: w[i] = sin(w[in.a]); break;
    case Op::Cos: w[i] = cos(w[in.a]); break;
    case Op::Exp: w[i] = exp(w[in.a]); break;
    case Op::Sqrt: w[i] = sqrt(w[in.a]); break;
  }
}

void Tape::eval(std::span<const Interval> slots, std::span<Interval> w) const {
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    if (in.op == Op::Var)
      w[i] = slots[in.a];
    else
      eval_node(in, w, i);
  }
}

void Tape::eval(std::span<const double> slots, std::span<double> w) const {
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    switch (in.op) {
      case Op::Const: w[i] = in.c; break;
      case Op::Var: w[i] = slots[in.a]; break;
      case Op::Neg: w[i] = -w[in.a]; break;
      case Op::Add: w[i] = w[in.a] + w[in.b]; break;
      case Op::Sub: w[i] = w[in.a] - w[in.b]; break;
      case Op::Mul: w[i] = w[in.a] * w[in.b]; break;
      case Op::Div: w[i] = w[in.a] / w[in.b]; break;
      case Op::Pow: w[i] = w[in.b]; break;
      case Op::Sin: w[i] = std::sin(w[in.a]); break;
      case Op::Cos: w[i] = std::cos(w[in.a]); break;
      case Op::Exp: w[i] = std::exp(w[in.a]); break;
      case Op::Sqrt: w[i] = std::sqrt(w[in.a]); break;
    }
  }
}

void Tape::eval_jacobian(std::span<const Interval> slots, std::span<const Interval> slot_grad,
                         std::size_t ndir, std::span<Interval> val, std::span<Interval> grad) const {
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    Interval* g = &grad[i * ndir];
    const Interval* ga = in.a >= 0 ? &grad[static_cast<std::size_t>(in.a) * ndir] : nullptr;
    const Interval* gb = in.b >= 0 ? &grad[static_cast<std::size_t>(in.b) * ndir] : nullptr;
    if (in.constant && in.op != Op::Const) {
      val[i] = Interval(0.0);
      eval_node(in, val, i);
      for (std::size_t j = 0; j < ndir; ++j) g[j] = Interval(0.0);
      continue;
    }
    switch (in.op) {
      case Op::Const:
        val[i] = Interval(in.c);
        for (std::size_t j = 0; j < ndir; ++j) g[j] = Interval(0.0);
        break;
      case Op::Var:
        val[i] = slots[in.a];
        for (std::size_t j = 0; j < ndir; ++j) g[j] = slot_grad[static_cast<std::size_t>(in.a) * ndir + j];
        break;
      case Op::Neg:
        val[i] = -val[in.a];
        for (std::size_t j = 0; j < ndir; ++j) g[j] = -ga[j];
        break;
      case Op::Add:
        val[i] = val[in.a] + val[in.b];
        for (std::size_t j = 0; j < ndir; ++j) g[j] = ga[j] + gb[j];
        break;
      case Op::Sub:
        val[i] = val[in.a] - val[in.b];
        for (std::size_t j = 0; j < ndir; ++j) g[j] = ga[j] - gb[j];
        break;
      case Op::Mul:
        val[i] = val[in.a] * val[in.b];
        if (code_[static_cast<std::size_t>(in.a)].constant)
          for (std::size_t j = 0; j < ndir; ++j) g[j] = val[in.a] * gb[j];
        else if (code_[static_cast<std::size_t>(in.b)].constant)
          for (std::size_t j = 0; j < ndir; ++j) g[j] = ga[j] * val[in.b];
        else
          for (std::size_t j = 0; j < ndir; ++j) g[j] = ga[j] * val[in.b] + val[in.a] * gb[j];
        break;
      case Op::Div:
        val[i] = val[in.a] / val[in.b];
        for (std::size_t j = 0; j < ndir; ++j) g[j] = (ga[j] - val[i] * gb[j]) / val[in.b];
        break;
      case Op::Pow: {
        if (in.n == 1) {
          val[i] = val[in.a];
          for (std::size_t j = 0; j < ndir; ++j) g[j] = ga[j];
          break;
        }
        val[i] = intersect(pow(val[in.a], in.n), val[in.b]);
        const Interval dp = Interval(static_cast<double>(in.n)) * pow(val[in.a], in.n - 1);
        for (std::size_t j = 0; j < ndir; ++j) g[j] = dp * ga[j];
        break;
      }
      case Op::Sin: {
        val[i] = sin(val[in.a]);
        const Interval d = cos(val[in.a]);
        for (std::size_t j = 0; j < ndir; ++j) g[j] = d * ga[j];
        break;
      }
      case Op::Cos: {
        val[i] = cos(val[in.a]);
        const Interval d = -sin(val[in.a]);
        for (std::size_t j = 0; j < ndir; ++j) g[j] = d * ga[j];
        break;
      }
      case Op::Exp:
        val[i] = exp(val[in.a]);
        for (std::size_t j = 0; j < ndir; ++j) g[j] = val[i] * ga[j];
        break;
      case Op::Sqrt: {
        val[i] = sqrt(val[in.a]);
        const Interval twice = Interval(2.0) * val[i];
        for (std::size_t j = 0; j < ndir; ++j) g[j] = ga[j] / twice;
        break;
      }
    }
  }
}

void Tape::taylor_coefficient(int k, std::span<const Interval> slot_series,
                              std::span<Interval> s, std::size_t stride) const {
  const std::size_t kk = static_cast<std::size_t>(k);
  auto at = [&](int node, std::size_t j) -> Interval& { return s[static_cast<std::size_t>(node) * stride + j]; };
  const Interval zero(0.0);
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    Interval& out = s[i * stride + kk];
    if (in.constant && k > 0) {
      out = zero;
      continue;
    }
    switch (in.op) {
      case Op::Const:
        out = k == 0 ? Interval(in.c) : zero;
        break;
      case Op::Var:
        out = slot_series[static_cast<std::size_t>(in.a) * stride + kk];
        break;
      case Op::Neg:
        out = -at(in.a, kk);
        break;
      case Op::Add:
        out = at(in.a, kk) + at(in.b, kk);
        break;
      case Op::Sub:
        out = at(in.a, kk) - at(in.b, kk);
        break;
      case Op::Mul: {
        if (code_[static_cast<std::size_t>(in.a)].constant) {
          out = at(in.a, 0) * at(in.b, kk);
          break;
        }
        if (code_[static_cast<std::size_t>(in.b)].constant) {
          out = at(in.a, kk) * at(in.b, 0);
          break;
        }
        Interval acc = zero;
        for (std::size_t j = 0; j <= kk; ++j) acc += at(in.a, j) * at(in.b, kk - j);
        out = acc;
        break;
      }
      case Op::Div: {
        Interval acc = at(in.a, kk);
        for (std::size_t j = 0; j < kk; ++j) acc -= s[i * stride + j] * at(in.b, kk - j);
        out = acc / at(in.b, 0);
        break;
      }
      case Op::Pow:
        if (in.n == 1)
          out = at(in.a, kk);
        else
          out = k == 0 ? intersect(pow(at(in.a, 0), in.n), at(in.b, 0)) : at(in.b, kk);
        break;
      case Op::Exp: {
        if (k == 0) {
          out = exp(at(in.a, 0));
          break;
        }
        Interval acc = zero;
        for (std::size_t j = 1; j <= kk; ++j)
          acc += Interval(static_cast<double>(j)) * at(in.a, j) * s[i * stride + kk - j];
        out = acc / Interval(static_cast<double>(k));
        break;
      }
      case Op::Sin:
      case Op::Cos: {
        if (k == 0) {
          out = in.op == Op::Sin ? sin(at(in.a, 0)) : cos(at(in.a, 0));
          break;
        }
        // Companion b holds the other member of the (sin, cos) pair.
        Interval acc = zero;
        for (std::size_t j = 1; j <= kk; ++j)
          acc += Interval(static_cast<double>(j)) * at(in.a, j) * at(in.b, kk - j);
        acc = acc / Interval(static_cast<double>(k));
        out = in.op == Op::Sin ? acc : -acc;
        break;
      }
      case Op::Sqrt: {
        if (k == 0) {
          out = sqrt(at(in.a, 0));
          break;
        }
        Interval acc = at(in.a, kk);
        for (std::size_t j = 1; j < kk; ++j) acc -= s[i * stride + j] * s[i * stride + kk - j];
        out = acc / (Interval(2.0) * s[i * stride]);
        break;
      }
    }
  }
}

}  // namespace switchsynth
