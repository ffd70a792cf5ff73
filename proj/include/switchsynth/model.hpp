#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "switchsynth/expr.hpp"
#include "switchsynth/interval.hpp"
#include "switchsynth/tape.hpp"

namespace switchsynth {

/// Highest time-derivative order lie_derivative supports.
inline constexpr int kMaxLieOrder = 8;

/// Sampled switched system x' = f_mode(x, d), closed-loop per mode.
///
/// Modes are numbered 1..N in the file format and in patterns; the
/// accessors below take the 1-based mode index as well.
class SwitchedSystem {
public:
  SwitchedSystem(std::string name, std::size_t n, double tau, Box dist_box,
                 std::map<std::string, double> constants, std::vector<std::vector<Expr>> modes);

  const std::string& name() const noexcept { return name_; }
  std::size_t state_dim() const noexcept { return n_; }
  std::size_t dist_dim() const noexcept { return dist_box_.dim(); }
  std::size_t num_modes() const noexcept { return modes_.size(); }
  double tau() const noexcept { return tau_; }
  const Box& dist_box() const noexcept { return dist_box_; }
  const std::map<std::string, double>& constants() const noexcept { return constants_; }
  const std::vector<Expr>& rhs(int mode) const { return modes_.at(static_cast<std::size_t>(mode - 1)); }
  /// Slots are x1..xn followed by d1..dm.
  const Tape& tape(int mode) const { return tapes_->at(static_cast<std::size_t>(mode - 1)); }
  const std::vector<std::string>& slot_names() const noexcept { return slots_; }

  /// Throws DomainError for a mode outside 1..N.
  void check_mode(int mode) const;

  /// Interval enclosure of f_mode over (x, d).
  Box eval(int mode, const Box& x, const Box& d) const;
  /// Binary64 right-hand side for reference simulation.
  void eval_point(int mode, std::span<const double> x, std::span<const double> d,
                  std::span<double> dx) const;

private:
  std::string name_;
  std::size_t n_;
  double tau_;
  Box dist_box_;
  std::map<std::string, double> constants_;
  std::vector<std::vector<Expr>> modes_;
  std::vector<std::string> slots_;
  std::shared_ptr<const std::vector<Tape>> tapes_;
};

/// Reads the line-oriented model format:
///
///     system <name>
///     dim <n>
///     dist <m> in <box>      (omitted when m = 0)
///     tau <real>
///     const <name> = <real>  (repeatable)
///     mode <k>:              (k = 1..N, contiguous)
///       x1' = <expr>
///       ...
///
/// `#` starts a comment. Throws SyntaxError, UndeclaredVariable or
/// ArityMismatch.
SwitchedSystem parse_model(std::string_view text);
SwitchedSystem load_model(const std::string& path);

/// Taylor coefficients of the solution of x' = f(x, d) through a box, with d
/// held constant. Owns its workspace; reuse one instance per thread.
class OdeTaylor {
public:
  OdeTaylor(const SwitchedSystem& sys, int mode, int max_order);

  /// Computes solution coefficients x_[0..order] at x0 (order <= max_order).
  void expand(std::span<const Interval> x0, std::span<const Interval> d, int order);
  /// k-th Taylor coefficient of x(t), i.e. x^(k)(0)/k!.
  const Interval& state(std::size_t i, int k) const {
    return slot_series_[i * stride_ + static_cast<std::size_t>(k)];
  }

private:
  const Tape* tape_;
  std::size_t n_;
  std::size_t m_;
  std::size_t stride_;
  std::vector<Interval> slot_series_;
  std::vector<Interval> node_series_;
};

/// Enclosure of the p-th total time derivative of f_mode along
/// x' = f_mode(x, d), over the given state and disturbance boxes.
/// Throws UnsupportedOrder outside 0..kMaxLieOrder.
Box lie_derivative(const SwitchedSystem& sys, int mode, int order, const Box& x, const Box& d);

/// Same, with the environment given by variable name (x1.., d1..).
Box lie_derivative(const SwitchedSystem& sys, int mode, int order,
                   const std::map<std::string, Interval>& env);

}  // namespace switchsynth
