#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "switchsynth/expr.hpp"
#include "switchsynth/interval.hpp"

namespace switchsynth {

/// Straight-line form of one or more expressions over a fixed list of
/// variable slots. Evaluation writes one value per instruction into a
/// caller-owned workspace, so a Tape itself is immutable and shareable.
class Tape {
public:
  enum class Op : std::uint8_t { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt };

  struct Instr {
    Op op = Op::Const;
    int a = -1;      // operand, or slot index for Var
    int b = -1;      // second operand; for Pow the product chain, for Sin/Cos the companion
    int n = 0;       // Pow exponent
    double c = 0.0;  // Const value
    bool constant = false;  // depends on no slot
  };

  Tape() = default;
  /// Throws UndeclaredVariable for names missing from slots.
  static Tape compile(std::span<const Expr> outputs, std::span<const std::string> slots);

  std::size_t size() const noexcept { return code_.size(); }
  std::size_t num_slots() const noexcept { return num_slots_; }
  std::size_t num_outputs() const noexcept { return outputs_.size(); }
  int output(std::size_t i) const noexcept { return outputs_[i]; }
  const std::vector<Instr>& code() const noexcept { return code_; }

  /// Interval evaluation; work.size() >= size().
  void eval(std::span<const Interval> slots, std::span<Interval> work) const;

  /// Binary64 evaluation, for reference simulation.
  void eval(std::span<const double> slots, std::span<double> work) const;

  /// Forward-mode interval Jacobian. slot_grad holds num_slots() rows of
  /// ndir directional seeds; val has size() entries, grad size()*ndir.
  void eval_jacobian(std::span<const Interval> slots, std::span<const Interval> slot_grad,
                     std::size_t ndir, std::span<Interval> val, std::span<Interval> grad) const;

  /// Taylor coefficient k of every node, given coefficients 0..k-1 already
  /// stored. Series are laid out row-major with the given stride:
  /// slot_series[s*stride + j], node_series[i*stride + j].
  void taylor_coefficient(int k, std::span<const Interval> slot_series,
                          std::span<Interval> node_series, std::size_t stride) const;

private:
  static void eval_node(const Instr& in, std::span<Interval> w, std::size_t i);

  std::vector<Instr> code_;
  std::vector<int> outputs_;
  std::size_t num_slots_ = 0;
};

}  // namespace switchsynth
