#include "switchsynth/model.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "switchsynth/errors.hpp"

namespace switchsynth {

SwitchedSystem::SwitchedSystem(std::string name, std::size_t n, double tau, Box dist_box,
                               std::map<std::string, double> constants,
                               std::vector<std::vector<Expr>> modes)
    : name_(std::move(name)),
      n_(n),
      tau_(tau),
      dist_box_(std::move(dist_box)),
      constants_(std::move(constants)),
      modes_(std::move(modes)) {
  if (n_ == 0) throw ArityMismatch("state dimension must be at least 1");
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw DomainError("sampling period tau must be positive");
  if (modes_.empty()) throw ArityMismatch("a switched system needs at least one mode");
  for (std::size_t i = 1; i <= n_; ++i) slots_.push_back("x" + std::to_string(i));
  for (std::size_t j = 1; j <= dist_box_.dim(); ++j) slots_.push_back("d" + std::to_string(j));
  auto tapes = std::make_shared<std::vector<Tape>>();
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    if (modes_[k].size() != n_)
      throw ArityMismatch("mode " + std::to_string(k + 1) + " has " + std::to_string(modes_[k].size()) +
                          " equations, expected " + std::to_string(n_));
    tapes->push_back(Tape::compile(modes_[k], slots_));
  }
  tapes_ = std::move(tapes);
}

void SwitchedSystem::check_mode(int mode) const {
  if (mode < 1 || static_cast<std::size_t>(mode) > modes_.size())
    throw DomainError("mode " + std::to_string(mode) + " outside 1.." + std::to_string(modes_.size()));
}

Box SwitchedSystem::eval(int mode, const Box& x, const Box& d) const {
  check_mode(mode);
  const Tape& t = tape(mode);
  std::vector<Interval> slots(x.begin(), x.end());
  slots.insert(slots.end(), d.begin(), d.end());
  std::vector<Interval> work(t.size());
  t.eval(slots, work);
  Box out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = work[t.output(i)];
  return out;
}

void SwitchedSystem::eval_point(int mode, std::span<const double> x, std::span<const double> d,
                                std::span<double> dx) const {
  const Tape& t = tape(mode);
  // Reused per thread.
  thread_local std::vector<double> slots;
  thread_local std::vector<double> work;
  slots.assign(x.begin(), x.end());
  slots.insert(slots.end(), d.begin(), d.end());
  work.resize(t.size());
  t.eval(std::span<const double>(slots), std::span<double>(work));
  for (std::size_t i = 0; i < n_; ++i) dx[i] = work[t.output(i)];
}

namespace {

struct Line {
  int number = 0;
  std::string text;  // comment stripped
  int first_col = 1;
};

std::string_view trim(std::string_view s, int* offset = nullptr) {
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  std::size_t e = s.size();
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  if (offset) *offset += static_cast<int>(b);
  return s.substr(b, e - b);
}

class ModelReader {
public:
  explicit ModelReader(std::string_view text) {
    int number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++number;
      std::string_view raw = text.substr(start, end - start);
      if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      int col = 1;
      std::string_view t = trim(raw, &col);
      if (!t.empty()) lines_.push_back({number, std::string(t), col});
      if (end == text.size()) break;
      start = end + 1;
    }
  }

  SwitchedSystem read() {
    for (const auto& line : lines_) handle(line);
    if (!name_) fail_at(last_line(), 1, "missing 'system' line");
    if (!n_) fail_at(last_line(), 1, "missing 'dim' line");
    if (!tau_) fail_at(last_line(), 1, "missing 'tau' line");
    if (modes_.empty()) fail_at(last_line(), 1, "no modes declared");
    std::vector<std::vector<Expr>> modes;
    for (std::size_t k = 0; k < modes_.size(); ++k) {
      std::vector<Expr> rhs;
      for (std::size_t i = 0; i < *n_; ++i) {
        if (!modes_[k][i])
          throw ArityMismatch("mode " + std::to_string(k + 1) + " lacks an equation for x" +
                              std::to_string(i + 1));
        rhs.push_back(*modes_[k][i]);
      }
      modes.push_back(std::move(rhs));
    }
    return SwitchedSystem(*name_, *n_, *tau_, dist_, constants_, std::move(modes));
  }

private:
  int last_line() const { return lines_.empty() ? 1 : lines_.back().number; }

  [[noreturn]] static void fail_at(int line, int col, const std::string& msg) {
    throw SyntaxError(line, col, msg);
  }

  static std::pair<std::string_view, std::string_view> split_word(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != ':') ++i;
    return {s.substr(0, i), s.substr(i)};
  }

  static std::optional<double> real(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  }

  static std::optional<std::size_t> natural(std::string_view s) {
    s = trim(s);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
  }

  void handle(const Line& line) {
    const std::string_view text = line.text;
    auto [word, rest] = split_word(text);
    const int rest_col = line.first_col + static_cast<int>(word.size());

    if (word == "system") {
      auto name = trim(rest);
      if (name.empty()) fail_at(line.number, rest_col, "expected a system name");
      name_ = std::string(name);
    } else if (word == "dim") {
      auto n = natural(rest);
      if (!n || *n == 0) fail_at(line.number, rest_col, "expected a positive state dimension");
      if (!modes_.empty()) fail_at(line.number, line.first_col, "'dim' must precede the modes");
      n_ = *n;
      for (std::size_t i = 1; i <= *n_; ++i) symbols_.variables.insert("x" + std::to_string(i));
    } else if (word == "dist") {
      if (!modes_.empty()) fail_at(line.number, line.first_col, "'dist' must precede the modes");
      const auto in = rest.find(" in ");
      if (in == std::string_view::npos) fail_at(line.number, rest_col, "expected 'dist <m> in <box>'");
      auto m = natural(rest.substr(0, in));
      if (!m) fail_at(line.number, rest_col, "expected the disturbance dimension");
      Box box;
      try {
        box = parse_box(rest.substr(in + 4));
      } catch (const SyntaxError& e) {
        fail_at(line.number, rest_col + static_cast<int>(in) + 4 + e.col() - 1, e.what());
      }
      if (box.dim() != *m)
        fail_at(line.number, rest_col, "disturbance box has " + std::to_string(box.dim()) +
                                           " dimensions, expected " + std::to_string(*m));
      dist_ = std::move(box);
      for (std::size_t j = 1; j <= *m; ++j) symbols_.variables.insert("d" + std::to_string(j));
    } else if (word == "tau") {
      auto t = real(rest);
      if (!t || !(*t > 0.0)) fail_at(line.number, rest_col, "expected a positive sampling period");
      tau_ = *t;
    } else if (word == "const") {
      const auto eq = rest.find('=');
      if (eq == std::string_view::npos) fail_at(line.number, rest_col, "expected 'const <name> = <real>'");
      const std::string name(trim(rest.substr(0, eq)));
      bool ok = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_');
      for (char c : name) ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
      if (!ok) fail_at(line.number, rest_col, "invalid constant name '" + name + "'");
      if (symbols_.variables.count(name) || symbols_.constants.count(name))
        fail_at(line.number, rest_col, "'" + name + "' is already declared");
      auto v = real(rest.substr(eq + 1));
      if (!v) fail_at(line.number, rest_col + static_cast<int>(eq) + 1, "expected a real constant");
      constants_[name] = *v;
      symbols_.constants[name] = *v;
    } else if (word == "mode") {
      if (!n_) fail_at(line.number, line.first_col, "'dim' must precede the modes");
      auto body = trim(rest);
      if (body.empty() || body.back() != ':') fail_at(line.number, rest_col, "expected 'mode <k>:'");
      auto k = natural(body.substr(0, body.size() - 1));
      if (!k || *k != modes_.size() + 1)
        fail_at(line.number, rest_col, "modes must be numbered 1..N contiguously");
      modes_.emplace_back(*n_);
    } else {
      equation(line);
    }
  }

  void equation(const Line& line) {
    const std::string_view text = line.text;
    const auto eq = text.find('=');
    const auto prime = text.find('\'');
    if (eq == std::string_view::npos || prime == std::string_view::npos || prime > eq)
      fail_at(line.number, line.first_col, "expected a declaration or an equation \"x<i>' = <expr>\"");
    if (modes_.empty()) fail_at(line.number, line.first_col, "equation outside of a 'mode' block");
    const std::string lhs(trim(text.substr(0, prime)));
    if (!trim(text.substr(prime + 1, eq - prime - 1)).empty())
      fail_at(line.number, line.first_col + static_cast<int>(prime) + 1, "expected '=' after the prime");
    std::size_t index = 0;
    if (lhs.size() < 2 || lhs[0] != 'x' || !natural(std::string_view(lhs).substr(1)))
      fail_at(line.number, line.first_col, "left-hand side must be a state variable x<i>");
    index = *natural(std::string_view(lhs).substr(1));
    if (index < 1 || index > *n_) throw UndeclaredVariable(lhs);
    auto& slot = modes_.back()[index - 1];
    if (slot)
      throw ArityMismatch("mode " + std::to_string(modes_.size()) + " defines " + lhs + "' twice (line " +
                          std::to_string(line.number) + ")");
    slot = parse_expr(text.substr(eq + 1), symbols_, line.number, line.first_col + static_cast<int>(eq) + 1);
  }

  std::vector<Line> lines_;
  Symbols symbols_;
  std::optional<std::string> name_;
  std::optional<std::size_t> n_;
  std::optional<double> tau_;
  Box dist_;
  std::map<std::string, double> constants_;
  std::vector<std::vector<std::optional<Expr>>> modes_;
};

}  // namespace

SwitchedSystem parse_model(std::string_view text) { return ModelReader(text).read(); }

SwitchedSystem load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

OdeTaylor::OdeTaylor(const SwitchedSystem& sys, int mode, int max_order)
    : tape_(&sys.tape(mode)),
      n_(sys.state_dim()),
      m_(sys.dist_dim()),
      stride_(static_cast<std::size_t>(max_order) + 1),
      slot_series_((n_ + m_) * stride_),
      node_series_(tape_->size() * stride_) {}

void OdeTaylor::expand(std::span<const Interval> x0, std::span<const Interval> d, int order) {
  const Interval zero(0.0);
  for (std::size_t i = 0; i < n_; ++i) slot_series_[i * stride_] = x0[i];
  for (std::size_t j = 0; j < m_; ++j) {
    slot_series_[(n_ + j) * stride_] = d[j];
    for (std::size_t k = 1; k < stride_; ++k) slot_series_[(n_ + j) * stride_ + k] = zero;
  }
  for (int k = 0; k < order; ++k) {
    tape_->taylor_coefficient(k, slot_series_, node_series_, stride_);
    const Interval divisor(static_cast<double>(k + 1));
    for (std::size_t i = 0; i < n_; ++i) {
      const auto out = static_cast<std::size_t>(tape_->output(i));
      slot_series_[i * stride_ + static_cast<std::size_t>(k) + 1] =
          node_series_[out * stride_ + static_cast<std::size_t>(k)] / divisor;
    }
  }
}

Box lie_derivative(const SwitchedSystem& sys, int mode, int order, const Box& x, const Box& d) {
  sys.check_mode(mode);
  if (order < 0 || order > kMaxLieOrder)
    throw UnsupportedOrder("Lie derivative order " + std::to_string(order) + " outside 0.." +
                           std::to_string(kMaxLieOrder));
  if (x.dim() != sys.state_dim() || d.dim() != sys.dist_dim())
    throw DimensionMismatch("state or disturbance box has the wrong dimension");
  if (order == 0) return sys.eval(mode, x, d);
  OdeTaylor taylor(sys, mode, order + 1);
  taylor.expand(x.span(), d.span(), order + 1);
  // f^(p) = (p+1)! x_[p+1]
  Interval factorial(1.0);
  for (int k = 2; k <= order + 1; ++k) factorial = factorial * Interval(static_cast<double>(k));
  Box out(sys.state_dim());
  for (std::size_t i = 0; i < sys.state_dim(); ++i) out[i] = factorial * taylor.state(i, order + 1);
  return out;
}

Box lie_derivative(const SwitchedSystem& sys, int mode, int order,
                   const std::map<std::string, Interval>& env) {
  Box x(sys.state_dim());
  Box d(sys.dist_dim());
  for (std::size_t i = 0; i < sys.state_dim(); ++i) {
    const std::string name = "x" + std::to_string(i + 1);
    auto it = env.find(name);
    if (it == env.end()) throw UndeclaredVariable(name);
    x[i] = it->second;
  }
  for (std::size_t j = 0; j < sys.dist_dim(); ++j) {
    const std::string name = "d" + std::to_string(j + 1);
    auto it = env.find(name);
    d[j] = it == env.end() ? sys.dist_box()[j] : it->second;
  }
  return lie_derivative(sys, mode, order, x, d);
}

}  // namespace switchsynth
