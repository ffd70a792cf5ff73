#include "switchsynth/interval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>

#include "switchsynth/errors.hpp"

namespace switchsynth {

namespace rounding {

// Sign of (a/b - q), using the exact residual a - q*b.
static inline int div_residual_sign(double a, double b, double q) noexcept {
  const double r = std::fma(-q, b, a);
  if (r == 0.0) return 0;
  return ((r > 0.0) == (b > 0.0)) ? 1 : -1;
}

double div_down(double a, double b) noexcept {
  if (a == 0.0) return 0.0;
  const double q = a / b;
  if (!std::isfinite(q)) return q == kInf ? std::numeric_limits<double>::max() : q;
  if (std::abs(q) < kTiny || std::abs(a) < kTiny) return next_down(q);
  return div_residual_sign(a, b, q) < 0 ? next_down(q) : q;
}

double div_up(double a, double b) noexcept {
  if (a == 0.0) return 0.0;
  const double q = a / b;
  if (!std::isfinite(q)) return q == -kInf ? -std::numeric_limits<double>::max() : q;
  if (std::abs(q) < kTiny || std::abs(a) < kTiny) return next_up(q);
  return div_residual_sign(a, b, q) > 0 ? next_up(q) : q;
}

double sqrt_down(double a) noexcept {
  const double s = std::sqrt(a);
  if (s == 0.0 || !std::isfinite(s)) return s;
  if (a < kTiny) return next_down(s);
  return std::fma(-s, s, a) < 0.0 ? next_down(s) : s;
}

double sqrt_up(double a) noexcept {
  const double s = std::sqrt(a);
  if (s == 0.0 || !std::isfinite(s)) return s;
  if (a < kTiny) return next_up(s);
  return std::fma(-s, s, a) > 0.0 ? next_up(s) : s;
}

}  // namespace rounding

using namespace rounding;

void Interval::invalid_bounds(double lo, double hi) {
  throw DomainError("invalid interval bounds [" + format_double(lo) + "," + format_double(hi) + "]");
}

double Interval::width() const noexcept {
  if (is_empty()) return 0.0;
  return sub_up(hi_, lo_);
}

double Interval::mid() const noexcept {
  if (lo_ == hi_) return lo_;
  double m = 0.5 * lo_ + 0.5 * hi_;
  return std::clamp(m, lo_, hi_);
}

double Interval::mag() const noexcept { return std::max(std::abs(lo_), std::abs(hi_)); }

Interval& Interval::operator+=(const Interval& o) { return *this = *this + o; }
Interval& Interval::operator-=(const Interval& o) { return *this = *this - o; }
Interval& Interval::operator*=(const Interval& o) { return *this = *this * o; }
Interval& Interval::operator/=(const Interval& o) { return *this = *this / o; }

namespace {

// Bounds produced by directed rounding of ordered operands are ordered; a NaN
// here means overflow and surfaces as DomainError.
Interval make(double lo, double hi) { return Interval(lo, hi); }

}  // namespace

Interval operator-(const Interval& a) {
  if (a.is_empty()) return a;
  return make(-a.hi(), -a.lo());
}

Interval operator+(const Interval& a, const Interval& b) {
  if (a.is_empty() || b.is_empty()) return Interval::empty();
  return make(add_down(a.lo(), b.lo()), add_up(a.hi(), b.hi()));
}

Interval operator-(const Interval& a, const Interval& b) {
  if (a.is_empty() || b.is_empty()) return Interval::empty();
  return make(sub_down(a.lo(), b.hi()), sub_up(a.hi(), b.lo()));
}

Interval operator*(const Interval& a, const Interval& b) {
  if (a.is_empty() || b.is_empty()) return Interval::empty();
  const double al = a.lo(), ah = a.hi(), bl = b.lo(), bh = b.hi();
  if (al >= 0.0) {
    if (bl >= 0.0) return make(mul_down(al, bl), mul_up(ah, bh));
    if (bh <= 0.0) return make(mul_down(ah, bl), mul_up(al, bh));
    return make(mul_down(ah, bl), mul_up(ah, bh));
  }
  if (ah <= 0.0) {
    if (bl >= 0.0) return make(mul_down(al, bh), mul_up(ah, bl));
    if (bh <= 0.0) return make(mul_down(ah, bh), mul_up(al, bl));
    return make(mul_down(al, bh), mul_up(al, bl));
  }
  if (bl >= 0.0) return make(mul_down(al, bh), mul_up(ah, bh));
  if (bh <= 0.0) return make(mul_down(ah, bl), mul_up(al, bl));
  return make(std::min(mul_down(al, bh), mul_down(ah, bl)), std::max(mul_up(al, bl), mul_up(ah, bh)));
}

Interval operator/(const Interval& a, const Interval& b) {
  if (a.is_empty() || b.is_empty()) return Interval::empty();
  if (b.contains_zero()) throw DivisionByZeroInterval();
  const std::array<double, 4> lo{div_down(a.lo(), b.lo()), div_down(a.lo(), b.hi()),
                                 div_down(a.hi(), b.lo()), div_down(a.hi(), b.hi())};
  const std::array<double, 4> hi{div_up(a.lo(), b.lo()), div_up(a.lo(), b.hi()),
                                 div_up(a.hi(), b.lo()), div_up(a.hi(), b.hi())};
  return make(*std::min_element(lo.begin(), lo.end()), *std::max_element(hi.begin(), hi.end()));
}

Interval hull(const Interval& a, const Interval& b) noexcept {
  if (a.is_empty()) return b;
  if (b.is_empty()) return a;
  return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

Interval intersect(const Interval& a, const Interval& b) noexcept {
  const double lo = std::max(a.lo(), b.lo());
  const double hi = std::min(a.hi(), b.hi());
  if (lo > hi || a.is_empty() || b.is_empty()) return Interval::empty();
  return Interval(lo, hi);
}

namespace {

// x^n for x >= 0 with directed rounding.
double pow_down(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r = mul_down(r, x);
  return r;
}

double pow_up(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r = mul_up(r, x);
  return r;
}

// Elementary functions from libm are within one ulp; two ulps of slack.
double widen_down(double x) { return next_down(next_down(x)); }
double widen_up(double x) { return next_up(next_up(x)); }

// True when some point offset + 2*k*pi (k integer) may lie in [lo, hi].
// Errs on the side of reporting a hit.
bool hits_phase(double lo, double hi, double offset) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double slack = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
  const double k = std::ceil((lo - slack - offset) / two_pi);
  return offset + k * two_pi <= hi + slack;
}

}  // namespace

Interval pow(const Interval& a, int n) {
  if (n < 1) throw DomainError("pow exponent must be a positive integer");
  if (a.is_empty()) return a;
  if (n == 1) return a;
  if (n % 2 == 1) {
    const double lo = a.lo() >= 0.0 ? pow_down(a.lo(), n) : -pow_up(-a.lo(), n);
    const double hi = a.hi() >= 0.0 ? pow_up(a.hi(), n) : -pow_down(-a.hi(), n);
    return Interval(lo, hi);
  }
  if (a.lo() >= 0.0) return Interval(pow_down(a.lo(), n), pow_up(a.hi(), n));
  if (a.hi() <= 0.0) return Interval(pow_down(-a.hi(), n), pow_up(-a.lo(), n));
  return Interval(0.0, pow_up(std::max(-a.lo(), a.hi()), n));
}

Interval sqrt(const Interval& a) {
  if (a.is_empty()) return a;
  if (a.lo() < 0.0) throw DomainError("sqrt of an interval with a negative part: " + to_string(a));
  return Interval(sqrt_down(a.lo()), sqrt_up(a.hi()));
}

Interval exp(const Interval& a) {
  if (a.is_empty()) return a;
  const double lo = a.lo() == 0.0 ? 1.0 : std::max(0.0, widen_down(std::exp(a.lo())));
  const double hi = a.hi() == 0.0 ? 1.0 : widen_up(std::exp(a.hi()));
  return Interval(lo, hi);
}

Interval sin(const Interval& a) {
  if (a.is_empty()) return a;
  if (a.width() >= 2.0 * std::numbers::pi) return Interval(-1.0, 1.0);
  // sin(0) is exact; keep it so.
  auto down = [](double x) { return x == 0.0 ? 0.0 : widen_down(std::sin(x)); };
  auto up = [](double x) { return x == 0.0 ? 0.0 : widen_up(std::sin(x)); };
  double lo = std::min(down(a.lo()), down(a.hi()));
  double hi = std::max(up(a.lo()), up(a.hi()));
  if (hits_phase(a.lo(), a.hi(), 0.5 * std::numbers::pi)) hi = 1.0;
  if (hits_phase(a.lo(), a.hi(), -0.5 * std::numbers::pi)) lo = -1.0;
  return Interval(std::max(lo, -1.0), std::min(hi, 1.0));
}

Interval cos(const Interval& a) {
  if (a.is_empty()) return a;
  if (a.width() >= 2.0 * std::numbers::pi) return Interval(-1.0, 1.0);
  auto down = [](double x) { return x == 0.0 ? 1.0 : widen_down(std::cos(x)); };
  auto up = [](double x) { return x == 0.0 ? 1.0 : widen_up(std::cos(x)); };
  double lo = std::min(down(a.lo()), down(a.hi()));
  double hi = std::max(up(a.lo()), up(a.hi()));
  if (hits_phase(a.lo(), a.hi(), 0.0)) hi = 1.0;
  if (hits_phase(a.lo(), a.hi(), std::numbers::pi)) lo = -1.0;
  return Interval(std::max(lo, -1.0), std::min(hi, 1.0));
}

Interval inflate(const Interval& a, double factor, double absolute) {
  if (a.is_empty()) return a;
  const double m = a.mid();
  const double r = std::max(sub_up(a.hi(), m), sub_up(m, a.lo()));
  const double grow = add_up(mul_up(r, 1.0 + factor), absolute);
  return Interval(std::min(a.lo(), sub_down(m, grow)), std::max(a.hi(), add_up(m, grow)));
}

std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  (void)ec;
  return std::string(buf.data(), ptr);
}

std::string to_string(const Interval& a) {
  if (a.is_empty()) return "[empty]";
  return "[" + format_double(a.lo()) + "," + format_double(a.hi()) + "]";
}

Box Box::point(std::span<const double> x) {
  std::vector<Interval> dims;
  dims.reserve(x.size());
  for (double v : x) dims.emplace_back(v);
  return Box(std::move(dims));
}

bool Box::is_empty() const noexcept {
  return std::any_of(dims_.begin(), dims_.end(), [](const Interval& i) { return i.is_empty(); });
}

double Box::max_width() const noexcept {
  double w = 0.0;
  for (const auto& i : dims_) w = std::max(w, i.width());
  return w;
}

std::vector<double> Box::midpoint() const {
  std::vector<double> m;
  m.reserve(dims_.size());
  for (const auto& i : dims_) m.push_back(i.mid());
  return m;
}

bool Box::contains(std::span<const double> x) const {
  if (x.size() != dims_.size()) throw DimensionMismatch("point/box dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!dims_[i].contains(x[i])) return false;
  return true;
}

bool Box::all_finite() const noexcept {
  return std::all_of(dims_.begin(), dims_.end(), [](const Interval& i) {
    return std::isfinite(i.lo()) && std::isfinite(i.hi());
  });
}

static void check_dims(const Box& a, const Box& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("box dimensions differ: " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
}

SetRelation set_predicates(const Box& a, const Box& b) {
  check_dims(a, b);
  SetRelation r{true, true};
  for (std::size_t i = 0; i < a.dim(); ++i) {
    r.subset = r.subset && a[i].subset_of(b[i]);
    r.intersects = r.intersects && a[i].intersects(b[i]);
  }
  return r;
}

bool subset(const Box& a, const Box& b) {
  check_dims(a, b);
  for (std::size_t i = 0; i < a.dim(); ++i)
    if (!a[i].subset_of(b[i])) return false;
  return true;
}

bool intersects(const Box& a, const Box& b) {
  check_dims(a, b);
  for (std::size_t i = 0; i < a.dim(); ++i)
    if (!a[i].intersects(b[i])) return false;
  return true;
}

Box hull(const Box& a, const Box& b) {
  check_dims(a, b);
  Box r = a;
  for (std::size_t i = 0; i < a.dim(); ++i) r[i] = hull(a[i], b[i]);
  return r;
}

Box intersect(const Box& a, const Box& b) {
  check_dims(a, b);
  Box r = a;
  for (std::size_t i = 0; i < a.dim(); ++i) r[i] = intersect(a[i], b[i]);
  return r;
}

Box inflate(const Box& a, double factor, double absolute) {
  Box r = a;
  for (auto& i : r) i = inflate(i, factor, absolute);
  return r;
}

std::size_t widest_dimension(const Box& b) {
  std::size_t best = 0;
  double best_w = -1.0;
  for (std::size_t i = 0; i < b.dim(); ++i) {
    const double w = b[i].hi() - b[i].lo();
    if (w > best_w) {
      best_w = w;
      best = i;
    }
  }
  if (best_w <= 0.0) throw DegenerateBox();
  return best;
}

std::pair<Box, Box> bisect(const Box& b) {
  if (b.dim() == 0 || b.is_empty()) throw DegenerateBox();
  const std::size_t k = widest_dimension(b);
  const double m = b[k].mid();
  Box left = b;
  Box right = b;
  left[k] = Interval(b[k].lo(), m);
  right[k] = Interval(m, b[k].hi());
  return {std::move(left), std::move(right)};
}

namespace {

struct BoxLexer {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(1, static_cast<int>(pos) + 1, msg);
  }
  void expect(char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }
  double number() {
    skip_ws();
    const std::size_t start = pos;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
    while (pos < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.' ||
            text[pos] == 'e' || text[pos] == 'E' ||
            ((text[pos] == '+' || text[pos] == '-') && (text[pos - 1] == 'e' || text[pos - 1] == 'E'))))
      ++pos;
    std::string token(text.substr(start, pos - start));
    if (!token.empty() && token.front() == '+') token.erase(0, 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
      pos = start;
      fail("expected a decimal number");
    }
    return v;
  }
};

}  // namespace

Box parse_box(std::string_view text) {
  BoxLexer lex{text};
  std::vector<Interval> dims;
  for (;;) {
    lex.expect('[');
    const double lo = lex.number();
    lex.expect(',');
    const double hi = lex.number();
    lex.expect(']');
    if (lo > hi) lex.fail("interval lower bound exceeds upper bound");
    dims.emplace_back(lo, hi);
    lex.skip_ws();
    if (lex.pos == text.size()) break;
    if (text[lex.pos] != 'x' && text[lex.pos] != 'X') lex.fail("expected 'x' between intervals");
    ++lex.pos;
  }
  return Box(std::move(dims));
}

std::string to_string(const Box& b) {
  std::string s;
  for (std::size_t i = 0; i < b.dim(); ++i) {
    if (i) s += 'x';
    s += to_string(b[i]);
  }
  return s;
}

}  // namespace switchsynth
