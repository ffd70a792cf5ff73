#include "switchsynth/problem.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "switchsynth/errors.hpp"

namespace switchsynth {

IntegratorOptions ProblemFile::integrator_options() const {
  IntegratorOptions o;
  o.scheme = &ButcherScheme::by_name(scheme);
  o.lte_tol = lte_tol;
  return o;
}

namespace {

struct Field {
  std::string_view value;
  int col = 1;
};

class ProblemReader {
public:
  ProblemReader(std::string_view text, std::string base_dir) : base_dir_(std::move(base_dir)) {
    int number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++number;
      handle(number, text.substr(start, end - start));
      last_line_ = number;
      if (end == text.size()) break;
      start = end + 1;
    }
  }

  ProblemFile finish() {
    if (!model_) throw SyntaxError(last_line_, 1, "missing 'model' line");
    if (!R_) throw SyntaxError(last_line_, 1, "missing 'R' line");
    if (!S_) throw SyntaxError(last_line_, 1, "missing 'S' line");
    if (!K_) throw SyntaxError(last_line_, 1, "missing 'K' line");
    if (!D_) throw SyntaxError(last_line_, 1, "missing 'D' line");
    ProblemFile p;
    p.name = name_.value_or("problem");
    const std::filesystem::path model(*model_);
    p.model_path = model.is_absolute() ? model.string() : (std::filesystem::path(base_dir_) / model).string();
    p.problem.R = *R_;
    p.problem.target = target_.value_or(*R_);
    p.problem.S = *S_;
    p.problem.B = B_;
    p.problem.K = *K_;
    p.problem.D = *D_;
    p.scheme = scheme_;
    p.lte_tol = lte_tol_;
    return p;
  }

private:
  void handle(int line, std::string_view raw) {
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::size_t b = 0;
    while (b < raw.size() && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
    std::size_t e = raw.size();
    while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
    if (b == e) return;
    std::string_view body = raw.substr(b, e - b);
    const int key_col = static_cast<int>(b) + 1;

    std::size_t k = 0;
    while (k < body.size() && !std::isspace(static_cast<unsigned char>(body[k]))) ++k;
    const std::string_view key = body.substr(0, k);
    std::size_t v = k;
    while (v < body.size() && std::isspace(static_cast<unsigned char>(body[v]))) ++v;
    const Field field{body.substr(v), key_col + static_cast<int>(v)};
    if (field.value.empty()) throw SyntaxError(line, key_col + static_cast<int>(k), "missing value for '" + std::string(key) + "'");

    if (key == "problem") set_once(name_, std::string(field.value), line, key_col, key);
    else if (key == "model") set_once(model_, std::string(field.value), line, key_col, key);
    else if (key == "R") set_once(R_, box(field, line), line, key_col, key);
    else if (key == "target") set_once(target_, box(field, line), line, key_col, key);
    else if (key == "S") set_once(S_, box(field, line), line, key_col, key);
    else if (key == "B") {
      if (seen_B_) throw SyntaxError(line, key_col, "duplicate 'B' line");
      seen_B_ = true;
      if (field.value != "none") B_ = box(field, line);
    } else if (key == "K") set_once(K_, integer(field, line), line, key_col, key);
    else if (key == "D") set_once(D_, integer(field, line), line, key_col, key);
    else if (key == "scheme") {
      if (field.value != "euler" && field.value != "heun" && field.value != "rk4")
        throw SyntaxError(line, field.col, "unknown scheme '" + std::string(field.value) + "'");
      scheme_ = std::string(field.value);
    } else if (key == "lte_tol") {
      lte_tol_ = real(field, line);
      if (!(lte_tol_ > 0.0)) throw SyntaxError(line, field.col, "lte_tol must be positive");
    } else {
      throw SyntaxError(line, key_col, "unknown keyword '" + std::string(key) + "'");
    }
  }

  template <class T>
  static void set_once(std::optional<T>& slot, T value, int line, int col, std::string_view key) {
    if (slot) throw SyntaxError(line, col, "duplicate '" + std::string(key) + "' line");
    slot = std::move(value);
  }

  static Box box(const Field& f, int line) {
    try {
      return parse_box(f.value);
    } catch (const SyntaxError& e) {
      std::string msg = e.what();
      if (auto p = msg.find(": ", msg.find(':') + 1); p != std::string::npos) msg = msg.substr(p + 2);
      throw SyntaxError(line, f.col + e.col() - 1, msg);
    }
  }

  static int integer(const Field& f, int line) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(f.value.data(), f.value.data() + f.value.size(), v);
    if (ec != std::errc() || ptr != f.value.data() + f.value.size())
      throw SyntaxError(line, f.col, "expected an integer");
    return v;
  }

  static double real(const Field& f, int line) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(f.value.data(), f.value.data() + f.value.size(), v);
    if (ec != std::errc() || ptr != f.value.data() + f.value.size())
      throw SyntaxError(line, f.col, "expected a real number");
    return v;
  }

  std::string base_dir_;
  int last_line_ = 1;
  std::optional<std::string> name_, model_;
  std::optional<Box> R_, target_, S_, B_;
  bool seen_B_ = false;
  std::optional<int> K_, D_;
  std::string scheme_ = "rk4";
  double lte_tol_ = 1e-6;
};

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw FormatError(std::string("cannot open ") + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ProblemFile parse_problem(std::string_view text, const std::string& base_dir) {
  ProblemReader reader(text, base_dir);
  return reader.finish();
}

ProblemFile load_problem(const std::string& path) {
  const std::string text = read_file(path, "problem file");
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_problem(text, dir.empty() ? "." : dir.string());
}

LoadedProblem load_problem_with_model(const std::string& path) {
  ProblemFile file = load_problem(path);
  SwitchedSystem sys = load_model(file.model_path);
  file.problem.validate(sys.state_dim());
  return LoadedProblem{std::move(file), std::move(sys)};
}

}  // namespace switchsynth
