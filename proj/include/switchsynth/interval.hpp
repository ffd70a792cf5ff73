#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace switchsynth {

// Directed rounding of the basic operations. Results are computed in
// round-to-nearest and corrected with error-free transformations (TwoSum,
// FMA residuals), so no floating-point environment state is touched.
namespace rounding {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kMax = std::numeric_limits<double>::max();
// Below this magnitude FMA residuals may underflow; fall back to one-ulp widening.
inline constexpr double kTiny = 0x1p-900;

inline double next_up(double x) noexcept {
  if (!(x < kInf)) return x;  // +inf, NaN
  if (x == 0.0) return std::numeric_limits<double>::denorm_min();
  auto u = std::bit_cast<std::uint64_t>(x);
  u = x > 0.0 ? u + 1 : u - 1;
  return std::bit_cast<double>(u);
}

inline double next_down(double x) noexcept { return -next_up(-x); }

namespace detail {
// TwoSum: s + err == a + b exactly.
inline double two_sum_err(double a, double b, double s) noexcept {
  const double bb = s - a;
  return (a - (s - bb)) + (b - bb);
}
}  // namespace detail

inline double add_down(double a, double b) noexcept {
  const double s = a + b;
  if (std::isinf(s)) return s > 0.0 && std::isfinite(a) && std::isfinite(b) ? kMax : s;
  return detail::two_sum_err(a, b, s) < 0.0 ? next_down(s) : s;
}

inline double add_up(double a, double b) noexcept {
  const double s = a + b;
  if (std::isinf(s)) return s < 0.0 && std::isfinite(a) && std::isfinite(b) ? -kMax : s;
  return detail::two_sum_err(a, b, s) > 0.0 ? next_up(s) : s;
}

inline double sub_down(double a, double b) noexcept { return add_down(a, -b); }
inline double sub_up(double a, double b) noexcept { return add_up(a, -b); }

inline double mul_down(double a, double b) noexcept {
  if (a == 0.0 || b == 0.0) return 0.0;
  const double p = a * b;
  if (std::isinf(p)) return p > 0.0 && std::isfinite(a) && std::isfinite(b) ? kMax : p;
  if (std::abs(p) < kTiny) return next_down(p);
  return std::fma(a, b, -p) < 0.0 ? next_down(p) : p;
}

inline double mul_up(double a, double b) noexcept {
  if (a == 0.0 || b == 0.0) return 0.0;
  const double p = a * b;
  if (std::isinf(p)) return p < 0.0 && std::isfinite(a) && std::isfinite(b) ? -kMax : p;
  if (std::abs(p) < kTiny) return next_up(p);
  return std::fma(a, b, -p) > 0.0 ? next_up(p) : p;
}

double div_down(double a, double b) noexcept;
double div_up(double a, double b) noexcept;
double sqrt_down(double a) noexcept;
double sqrt_up(double a) noexcept;

}  // namespace rounding

/// Closed real interval [lo, hi] with outward-rounded arithmetic.
///
/// The empty interval has the single encoding lo = +inf, hi = -inf.
class Interval {
public:
  constexpr Interval() noexcept = default;
  constexpr Interval(double x) noexcept : lo_(x), hi_(x) {}  // NOLINT: implicit point
  /// Throws DomainError when lo > hi or a bound is NaN.
  Interval(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!(lo <= hi)) invalid_bounds(lo, hi);
  }

  static constexpr Interval empty() noexcept {
    Interval r;
    r.lo_ = std::numeric_limits<double>::infinity();
    r.hi_ = -std::numeric_limits<double>::infinity();
    return r;
  }

  constexpr double lo() const noexcept { return lo_; }
  constexpr double hi() const noexcept { return hi_; }
  constexpr bool is_empty() const noexcept { return lo_ > hi_; }
  constexpr bool is_point() const noexcept { return lo_ == hi_; }

  /// Upper bound of hi - lo.
  double width() const noexcept;
  /// A representable point inside the interval.
  double mid() const noexcept;
  double mag() const noexcept;  // max |x|

  constexpr bool contains(double x) const noexcept { return lo_ <= x && x <= hi_; }
  constexpr bool contains_zero() const noexcept { return lo_ <= 0.0 && 0.0 <= hi_; }
  constexpr bool subset_of(const Interval& o) const noexcept {
    return is_empty() || (o.lo_ <= lo_ && hi_ <= o.hi_);
  }
  constexpr bool intersects(const Interval& o) const noexcept {
    return !is_empty() && !o.is_empty() && lo_ <= o.hi_ && o.lo_ <= hi_;
  }

  friend constexpr bool operator==(const Interval& a, const Interval& b) noexcept {
    return (a.is_empty() && b.is_empty()) || (a.lo_ == b.lo_ && a.hi_ == b.hi_);
  }

  Interval& operator+=(const Interval& o);
  Interval& operator-=(const Interval& o);
  Interval& operator*=(const Interval& o);
  Interval& operator/=(const Interval& o);

private:
  [[noreturn]] static void invalid_bounds(double lo, double hi);

  double lo_ = 0.0;
  double hi_ = 0.0;
};

Interval operator-(const Interval& a);
Interval operator+(const Interval& a, const Interval& b);
Interval operator-(const Interval& a, const Interval& b);
Interval operator*(const Interval& a, const Interval& b);
/// Throws DivisionByZeroInterval when 0 is in b.
Interval operator/(const Interval& a, const Interval& b);

Interval hull(const Interval& a, const Interval& b) noexcept;
/// May return Interval::empty().
Interval intersect(const Interval& a, const Interval& b) noexcept;

/// Integer power, n >= 1. Even powers of intervals straddling zero are tight.
Interval pow(const Interval& a, int n);
/// Throws DomainError when a has a negative part.
Interval sqrt(const Interval& a);
Interval exp(const Interval& a);
Interval sin(const Interval& a);
Interval cos(const Interval& a);

/// Widen symmetrically: [mid - (1+f)*r - abs, mid + (1+f)*r + abs], r the radius.
Interval inflate(const Interval& a, double factor, double absolute);

std::string to_string(const Interval& a);

/// Cartesian product of intervals.
class Box {
public:
  Box() = default;
  explicit Box(std::vector<Interval> dims) : dims_(std::move(dims)) {}
  Box(std::initializer_list<Interval> dims) : dims_(dims) {}
  explicit Box(std::size_t n, const Interval& fill = Interval()) : dims_(n, fill) {}

  static Box point(std::span<const double> x);

  std::size_t dim() const noexcept { return dims_.size(); }
  const Interval& operator[](std::size_t i) const { return dims_[i]; }
  Interval& operator[](std::size_t i) { return dims_[i]; }
  auto begin() const noexcept { return dims_.begin(); }
  auto end() const noexcept { return dims_.end(); }
  auto begin() noexcept { return dims_.begin(); }
  auto end() noexcept { return dims_.end(); }
  std::span<const Interval> span() const noexcept { return dims_; }
  std::span<Interval> span() noexcept { return dims_; }

  /// Empty as a set: some component is empty.
  bool is_empty() const noexcept;
  double width(std::size_t i) const noexcept { return dims_[i].width(); }
  double max_width() const noexcept;
  std::vector<double> midpoint() const;
  bool contains(std::span<const double> x) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Box& a, const Box& b) = default;

private:
  std::vector<Interval> dims_;
};

struct SetRelation {
  bool subset = false;
  bool intersects = false;
};

/// Decided on the stored bounds; throws DimensionMismatch.
SetRelation set_predicates(const Box& a, const Box& b);
bool subset(const Box& a, const Box& b);
bool intersects(const Box& a, const Box& b);

Box hull(const Box& a, const Box& b);
Box intersect(const Box& a, const Box& b);
Box inflate(const Box& a, double factor, double absolute);

/// Split at the midpoint of the widest dimension (lowest index on ties).
/// Throws DegenerateBox when every width is zero.
std::pair<Box, Box> bisect(const Box& b);
/// Index of the dimension bisect() splits.
std::size_t widest_dimension(const Box& b);

/// Box literal syntax: `[lo,hi]x[lo,hi]...`, whitespace-insensitive,
/// decimal literals. Throws SyntaxError (line 1, column of the offence).
Box parse_box(std::string_view text);
/// Inverse of parse_box, with shortest round-trip decimals.
std::string to_string(const Box& b);

/// Shortest decimal that parses back to exactly x.
std::string format_double(double x);

}  // namespace switchsynth
