#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "switchsynth/controller.hpp"
#include "switchsynth/errors.hpp"
#include "switchsynth/problem.hpp"

using namespace switchsynth;
namespace fs = std::filesystem;

namespace {

Controller two_cell_controller() {
  Controller c;
  c.cells = {Cell{Box{Interval(0, 1), Interval(0, 1)}, Pattern{{1}}},
             Cell{Box{Interval(1, 2), Interval(0, 1)}, Pattern{{2, 1}}}};
  c.problem.R = Box{Interval(0, 2), Interval(0, 1)};
  c.problem.target = c.problem.R;
  c.problem.S = Box{Interval(-1, 3), Interval(-1, 2)};
  c.problem.K = 2;
  c.problem.D = 1;
  c.meta.system = "toy";
  c.meta.tau = 0.5;
  c.meta.K = 2;
  c.meta.D = 1;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("switchsynth_test_" + name); }

const char* kNoisy = R"(system noisy
dim 1
dist 1 in [-0.1,0.1]
tau 0.5
mode 1:
  x1' = -x1 + d1
)";

Controller noisy_controller() {
  Controller c;
  c.cells = {Cell{Box{Interval(-1, 1)}, Pattern{{1, 1}}}};
  c.problem.R = Box{Interval(-1, 1)};
  c.problem.target = c.problem.R;
  c.problem.S = Box{Interval(-2, 2)};
  c.problem.K = 2;
  c.meta.system = "noisy";
  c.meta.tau = 0.5;
  c.meta.K = 2;
  return c;
}

}  // namespace

TEST_CASE("lookup picks the first containing cell") {
  const Controller c = two_cell_controller();
  CHECK(lookup(c, std::vector<double>{0.5, 0.5}) == Pattern{{1}});
  CHECK(lookup(c, std::vector<double>{1.0, 0.5}) == Pattern{{1}});
  CHECK(lookup(c, std::vector<double>{1.5, 0.5}) == Pattern{{2, 1}});
  CHECK(lookup(c, std::vector<double>{2.0, 1.0}) == Pattern{{2, 1}});
  CHECK_THROWS_AS(lookup(c, std::vector<double>{3.0, 0.0}), OutsideDomain);
  CHECK_THROWS_AS(lookup(c, std::vector<double>{0.5, -0.01}), OutsideDomain);
}

TEST_CASE("validation of controller contents") {
  Controller c = two_cell_controller();
  CHECK_NOTHROW(c.validate());
  c.cells[1].pat = Pattern{};
  CHECK_THROWS_AS(c.validate(), FormatError);
  c = two_cell_controller();
  c.cells.clear();
  CHECK_THROWS_AS(c.validate(), FormatError);
  c = two_cell_controller();
  c.cells[0].box = Box{Interval(0, 1)};
  CHECK_THROWS_AS(c.validate(), FormatError);
  c = two_cell_controller();
  c.meta.tau = 0;
  CHECK_THROWS_AS(c.validate(), FormatError);
  c = two_cell_controller();
  c.cells[0].pat = Pattern{{0}};
  CHECK_THROWS_AS(c.validate(), FormatError);
}

TEST_CASE("overlapping cells are accepted") {
  Controller c = two_cell_controller();
  c.cells[1].box = Box{Interval(0.5, 2), Interval(0, 1)};
  CHECK_NOTHROW(c.validate());
  const Controller back = controller_from_json(to_json(c));
  CHECK(back.cells[1].box == c.cells[1].box);
  CHECK(lookup(back, std::vector<double>{0.75, 0.5}) == Pattern{{1}});
}

TEST_CASE("JSON layout") {
  const auto j = nlohmann::json::parse(to_json(two_cell_controller()));
  CHECK(j["format"] == "switchsynth-controller");
  CHECK(j["version"] == std::string(kControllerFormatVersion));
  CHECK(j["meta"]["system"] == "toy");
  CHECK(j["meta"]["scheme"] == "rk4");
  CHECK(j["meta"]["toolkit_version"] == std::string(kToolkitVersion));
  CHECK(j["problem"]["B"].is_null());
  REQUIRE(j["cells"].size() == 2);
  CHECK(j["cells"][1]["pattern"] == nlohmann::json::array({2, 1}));
  CHECK(j["cells"][1]["box"] == nlohmann::json::array({{1.0, 2.0}, {0.0, 1.0}}));
}

TEST_CASE("random controllers survive a JSON round trip") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 3;
    const auto random_box = [&] {
      Box b(n);
      for (std::size_t i = 0; i < n; ++i) {
        double a = u(rng), c = u(rng);
        if (a > c) std::swap(a, c);
        b[i] = Interval(a, c);
      }
      return b;
    };
    Controller c;
    c.problem.R = random_box();
    c.problem.target = random_box();
    c.problem.S = random_box();
    if (trial % 2) c.problem.B = random_box();
    c.problem.K = 1 + trial % 7;
    c.problem.D = trial % 5;
    c.meta.system = "sys" + std::to_string(trial);
    c.meta.tau = 0.001 + std::abs(u(rng));
    c.meta.lte_tol = std::ldexp(1.0, -20 - trial % 10) * 3;
    c.meta.scheme = trial % 3 == 0 ? "euler" : trial % 3 == 1 ? "heun" : "rk4";
    for (int k = 0, cells = 1 + trial % 6; k < cells; ++k) {
      Pattern p;
      for (int m = 0, len = 1 + static_cast<int>(rng() % 5); m < len; ++m) p.modes.push_back(1 + static_cast<int>(rng() % 4));
      c.cells.push_back(Cell{random_box(), p});
    }
    const std::string text = to_json(c);
    const Controller back = controller_from_json(text);
    CHECK(to_json(back) == text);
    REQUIRE(back.cells.size() == c.cells.size());
    for (std::size_t k = 0; k < c.cells.size(); ++k) {
      CHECK(back.cells[k].box == c.cells[k].box);
      CHECK(back.cells[k].pat == c.cells[k].pat);
    }
    CHECK(back.problem.R == c.problem.R);
    CHECK(back.problem.B == c.problem.B);
    CHECK(back.meta.tau == c.meta.tau);
    CHECK(back.meta.lte_tol == c.meta.lte_tol);
    CHECK(back.meta.scheme == c.meta.scheme);
  }
}

TEST_CASE("save and load give identical bytes") {
  const auto lp = load_problem_with_model(SWITCHSYNTH_MODELS "/dcdc.problem");
  const auto opts = lp.file.integrator_options();
  SearchOptions search;
  search.integrator = opts;
  const Controller c = make_controller(synthesize(lp.system, lp.file.problem, search), lp.system, opts);
  CHECK(c.meta.system == "dcdc");
  CHECK(c.meta.K == 6);
  CHECK(c.meta.D == 3);
  const fs::path a = temp_path("a.json"), b = temp_path("b.json");
  save_controller(c, a.string());
  save_controller(load_controller(a.string()), b.string());
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a) == to_json(c));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("damaged controller files") {
  const std::string text = to_json(two_cell_controller());
  CHECK_THROWS_AS(controller_from_json(text.substr(0, text.size() / 2)), FormatError);
  CHECK_THROWS_AS(controller_from_json(""), FormatError);
  CHECK_THROWS_AS(controller_from_json("[]"), FormatError);

  auto j = nlohmann::json::parse(text);
  auto broken = j;
  broken.erase("cells");
  CHECK_THROWS_AS(controller_from_json(broken.dump()), FormatError);
  broken = j;
  broken["format"] = "something-else";
  CHECK_THROWS_AS(controller_from_json(broken.dump()), FormatError);
  broken = j;
  broken["cells"][0]["box"][0] = nlohmann::json::array({2.0, 1.0});
  CHECK_THROWS_AS(controller_from_json(broken.dump()), FormatError);
  broken = j;
  broken["cells"][0]["pattern"] = nlohmann::json::array();
  CHECK_THROWS_AS(controller_from_json(broken.dump()), FormatError);
  broken = j;
  broken["meta"]["scheme"] = "rk45";
  CHECK_THROWS_AS(controller_from_json(broken.dump()), FormatError);

  broken = j;
  broken["version"] = "2.0";
  CHECK_THROWS_AS(controller_from_json(broken.dump()), VersionMismatch);
  broken["version"] = "1.7";
  CHECK_NOTHROW(controller_from_json(broken.dump()));

  CHECK_THROWS_AS(load_controller("/nonexistent/ctl.json"), FormatError);
}

TEST_CASE("zero dynamics stay put") {
  const auto sys = parse_model("system still\ndim 2\ntau 0.25\nmode 1:\n  x1' = 0\n  x2' = 0\n");
  Controller c;
  c.cells = {Cell{Box{Interval(-1, 1), Interval(-1, 1)}, Pattern{{1}}}};
  c.problem.R = c.cells[0].box;
  c.problem.target = c.problem.R;
  c.problem.S = c.problem.R;
  c.meta.tau = 0.25;
  const std::vector<double> x0{0.3, -0.7};
  SimulationOptions opts;
  opts.n_patterns = 5;
  const Trace t = simulate_closed_loop(sys, std::span<const Controller>(&c, 1), x0, opts);
  CHECK(t.patterns.size() == 5);
  CHECK(t.boundary_states.size() == 6);
  CHECK(t.points.size() == 5 * 100 + 1);
  for (const auto& p : t.points) CHECK(p.x == x0);
  CHECK(t.points.front().mode == 1);
  CHECK(t.points.back().mode == 0);
  CHECK(t.points.back().t == doctest::Approx(1.25));
}

TEST_CASE("seeds drive the disturbance") {
  const auto sys = parse_model(kNoisy);
  const Controller c = noisy_controller();
  const std::vector<double> x0{0.9};
  SimulationOptions opts;
  opts.n_patterns = 4;
  opts.seed = 1;
  const Trace a = simulate_closed_loop(sys, std::span<const Controller>(&c, 1), x0, opts);
  const Trace a2 = simulate_closed_loop(sys, std::span<const Controller>(&c, 1), x0, opts);
  opts.seed = 2;
  const Trace b = simulate_closed_loop(sys, std::span<const Controller>(&c, 1), x0, opts);
  CHECK(a.boundary_states == a2.boundary_states);
  CHECK(a.boundary_states != b.boundary_states);
  CHECK(a.boundary_states.front() == x0);
  // Without disturbance the state after one pattern would be 0.9 e^-1.
  const double undisturbed = 0.9 * std::exp(-1.0);
  CHECK(std::abs(a.boundary_states[1][0] - undisturbed) <= 0.1 + 1e-9);
}

TEST_CASE("simulation leaves the controlled region") {
  const auto sys = parse_model("system up\ndim 1\ntau 1\nmode 1:\n  x1' = 1\n");
  Controller c;
  c.cells = {Cell{Box{Interval(0, 1)}, Pattern{{1}}}};
  c.problem.R = c.cells[0].box;
  c.problem.target = c.problem.R;
  c.problem.S = Box{Interval(-5, 5)};
  c.meta.tau = 1;
  SimulationOptions opts;
  opts.n_patterns = 3;
  CHECK_THROWS_AS(simulate_closed_loop(sys, std::span<const Controller>(&c, 1), std::vector<double>{0.5}, opts),
                  OutsideDomain);
  CHECK_THROWS_AS(simulate_closed_loop(sys, std::span<const Controller>(&c, 1), std::vector<double>{2.0}, opts),
                  OutsideDomain);
}

TEST_CASE("reference integration against the exact decay") {
  const auto sys = parse_model("system decay\ndim 1\ntau 1\nmode 1:\n  x1' = -x1\n");
  std::vector<double> x{1.0};
  int calls = 0;
  reference_integrate(sys, 1, x, 2.0, 200, [](std::span<double>) {},
                      [&](double t, std::span<const double> y) {
                        ++calls;
                        CHECK(y[0] == doctest::Approx(std::exp(-t)).epsilon(1e-9));
                      });
  CHECK(calls == 200);
  CHECK(x[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
}

TEST_CASE("uniform disturbances stay in the box") {
  const auto sys = load_model(SWITCHSYNTH_MODELS "/polynomial.model");
  std::mt19937_64 rng(5);
  const auto sample = uniform_disturbance(sys, rng);
  std::vector<double> d(2);
  double lo = 1, hi = -1;
  for (int i = 0; i < 10000; ++i) {
    sample(d);
    CHECK(sys.dist_box().contains(d));
    lo = std::min(lo, d[0]);
    hi = std::max(hi, d[0]);
  }
  CHECK(lo < -0.0049);
  CHECK(hi > 0.0049);
}

TEST_CASE("trace CSV") {
  const auto sys = parse_model(kNoisy);
  const Controller c = noisy_controller();
  SimulationOptions opts;
  opts.n_patterns = 2;
  opts.steps_per_period = 10;
  const Trace t = simulate_closed_loop(sys, std::span<const Controller>(&c, 1), std::vector<double>{0.0}, opts);
  std::ostringstream out;
  write_trace_csv(out, t);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x1,mode");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == t.points.size());
  CHECK(rows == 2 * 2 * 10 + 1);
}

TEST_CASE("problem files") {
  const ProblemFile p = parse_problem(R"(problem demo   # comment
model sys.model
R [0,1]x[0,1]
S [-1,2]x[-1,2]
B none
K 4
D 2
scheme heun
lte_tol 1e-5
)",
                                      "/base");
  CHECK(p.name == "demo");
  CHECK(fs::path(p.model_path) == fs::path("/base/sys.model"));
  CHECK(p.problem.target == p.problem.R);
  CHECK_FALSE(p.problem.B.has_value());
  CHECK(p.problem.K == 4);
  CHECK(p.integrator_options().scheme == &ButcherScheme::heun());
  CHECK(p.integrator_options().lte_tol == 1e-5);

  const auto error_at = [](const std::string& text, int line, int col) {
    try {
      parse_problem(text);
      FAIL_CHECK("no error for " << text);
    } catch (const SyntaxError& e) {
      CHECK(e.line() == line);
      CHECK(e.col() == col);
    }
  };
  error_at("model m\nR [0,1]\nS [0,1]x[a,2]\nK 1\nD 0\n", 3, 10);
  error_at("model m\nR [0,1]\nR [0,1]\nS [0,2]\nK 1\nD 0\n", 3, 1);
  error_at("model m\nR [0,1]\nS [0,2]\nK one\nD 0\n", 4, 3);
  error_at("model m\nR [0,1]\nS [0,2]\nK 1\nD 0\nfoo 3\n", 6, 1);
  error_at("model m\nR [0,1]\nS [0,2]\nK 1\nD 0\n  scheme rk9\n", 6, 10);
  CHECK_THROWS_AS(parse_problem("model m\nR [0,1]\nS [0,2]\nK 1\n"), SyntaxError);
  CHECK_THROWS_AS(load_problem("/nonexistent/x.problem"), FormatError);
}

TEST_CASE("bundled problems load with their models") {
  for (const char* name : {"dcdc", "polynomial_R1toR2", "polynomial_R2toR1"}) {
    const auto lp = load_problem_with_model(std::string(SWITCHSYNTH_MODELS "/") + name + ".problem");
    CHECK(lp.file.problem.R.dim() == lp.system.state_dim());
  }
}
