// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "switchsynth/controller.hpp"
#include "switchsynth/errors.hpp"
#include "switchsynth/integrator.hpp"
#include "switchsynth/problem.hpp"
#include "switchsynth/synthesis.hpp"

using namespace switchsynth;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kDcdcBudget = 30.0;          // seconds
constexpr double kPolynomialBudget = 1800.0;  // seconds, both directions together
constexpr double kFpTimeout = 3600.0;         // seconds
constexpr double kSpeedup = 10.0;

std::string g_models;
fs::path g_work;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// A synthesized and verified controller, or why there is none.
struct Synthesized {
  std::optional<Controller> ctl;
  double seconds = 0;
  std::string why;
  std::size_t cells = 0;
  bool verified = false;
  bool avoids_b = false;
};

LoadedProblem problem(const std::string& name) { return load_problem_with_model(g_models + "/" + name + ".problem"); }

bool tube_hits(const TubeResult& t, const std::optional<Box>& b) {
  if (!b) return false;
  for (const auto& s : t.segments)
    if (intersects(s.box, *b)) return true;
  return false;
}

Synthesized run_synthesis(const LoadedProblem& lp, std::optional<Clock::time_point> deadline) {
  Synthesized r;
  SearchOptions opts;
  opts.integrator = lp.file.integrator_options();
  opts.deadline = deadline;
  opts.jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto t0 = Clock::now();
  try {
    const Decomposition dec = synthesize(lp.system, lp.file.problem, opts);
    r.seconds = seconds_since(t0);
    r.cells = dec.cells.size();
    r.verified = verify_decomposition(lp.system, dec, opts.integrator).passed();
    r.avoids_b = true;
    for (const auto& c : dec.cells)
      if (tube_hits(tube(lp.system, c.box, c.pat, opts.integrator), dec.problem.B)) r.avoids_b = false;
    r.ctl = make_controller(dec, lp.system, opts.integrator);
  } catch (const SynthesisFailure& e) {
    r.seconds = seconds_since(t0);
    r.why = e.what();
  } catch (const SearchTimeout&) {
    r.seconds = seconds_since(t0);
    r.why = "deadline reached after " + fmt("%.0f s", r.seconds);
  }
  return r;
}

std::optional<Synthesized> g_dcdc, g_r1r2, g_r2r1;

const Synthesized& dcdc() {
  if (!g_dcdc) g_dcdc = run_synthesis(problem("dcdc"), std::nullopt);
  return *g_dcdc;
}

void polynomial() {
  if (g_r1r2) return;
  const auto t0 = Clock::now();
  const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(kPolynomialBudget));
  g_r1r2 = run_synthesis(problem("polynomial_R1toR2"), deadline);
  g_r2r1 = run_synthesis(problem("polynomial_R2toR1"), deadline);
}

Outcome criterion1() {
  const auto& r = dcdc();
  if (!r.ctl) return {false, "synthesis failed: " + r.why};
  const bool ok = r.verified && r.seconds <= kDcdcBudget;
  return {ok, std::to_string(r.cells) + " cells, " + fmt("%.3f s", r.seconds) + (r.verified ? ", verified" : ", verify FAILED")};
}

std::string describe(const char* name, const Synthesized& r) {
  std::string s = std::string(name) + ": ";
  if (!r.ctl) return s + "failed (" + r.why + ")";
  s += std::to_string(r.cells) + " cells in " + fmt("%.1f s", r.seconds);
  s += r.verified ? ", verified" : ", verify FAILED";
  s += r.avoids_b ? ", tubes avoid B" : ", a tube meets B";
  return s;
}

Outcome criterion2() {
  polynomial();
  const auto good = [](const Synthesized& r) { return r.ctl && r.verified && r.avoids_b; };
  const auto total = g_r1r2->seconds + g_r2r1->seconds;
  const bool ok = good(*g_r1r2) && good(*g_r2r1) && total <= kPolynomialBudget;
  return {ok, describe("R1->R2", *g_r1r2) + "; " + describe("R2->R1", *g_r2r1)};
}

struct BenchRun {
  bool completed = false;
  bool timed_out = false;
  double seconds = 0;
  std::uint64_t expansions = 0;
};

BenchRun bench(const LoadedProblem& lp, PatternSearch algo, std::optional<double> timeout) {
  SearchStats stats;
  SearchOptions opts;
  opts.integrator = lp.file.integrator_options();
  opts.algorithm = algo;
  opts.stats = &stats;
  const auto t0 = Clock::now();
  if (timeout) opts.deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*timeout));
  BenchRun r;
  try {
    synthesize(lp.system, lp.file.problem, opts);
    r.completed = true;
  } catch (const SearchTimeout&) {
    r.timed_out = true;
  } catch (const SynthesisFailure&) {
  }
  r.seconds = seconds_since(t0);
  r.expansions = stats.expansions.load();
  return r;
}

Outcome criterion3() {
  const auto lp = problem("dcdc");
  // Best of three: the pruned run takes milliseconds.
  BenchRun fp, fp2;
  for (int i = 0; i < 3; ++i) {
    const BenchRun a = bench(lp, PatternSearch::Naive, std::nullopt);
    const BenchRun b = bench(lp, PatternSearch::Pruned, std::nullopt);
    if (i == 0 || a.seconds < fp.seconds) fp = a;
    if (i == 0 || b.seconds < fp2.seconds) fp2 = b;
  }
  const bool dcdc_ok = fp.completed && fp2.completed && fp2.seconds * kSpeedup <= fp.seconds;
  std::string detail = "dcdc fp " + fmt("%.4f s", fp.seconds) + " / fp2 " + fmt("%.4f s", fp2.seconds) + " = " +
                       fmt("%.1fx", fp.seconds / fp2.seconds);

  const auto poly = problem("polynomial_R1toR2");
  const BenchRun p2 = bench(poly, PatternSearch::Pruned, kFpTimeout);
  const BenchRun p1 = bench(poly, PatternSearch::Naive, kFpTimeout);
  const bool poly_ok = p2.completed && !p1.completed;
  detail += "; polynomial R1->R2 fp2 " + std::string(p2.completed ? "completed" : "did not complete") + " in " +
            fmt("%.1f s", p2.seconds) + ", fp " + (p1.timed_out ? "timed out" : p1.completed ? "completed" : "failed") +
            " after " + fmt("%.0f s", p1.seconds) + " (" + std::to_string(p1.expansions) + " expansions)";
  return {dcdc_ok && poly_ok, detail};
}

// Reference trajectories against validated tubes for random instances.
Outcome criterion4() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uint64_t violations = 0, trajectories = 0;
  std::string detail;
  for (const char* name : {"dcdc", "polynomial_R1toR2"}) {
    const auto lp = problem(name);
    const auto& sys = lp.system;
    const auto opts = lp.file.integrator_options();
    const Box& s = lp.file.problem.S;
    const std::size_t n = sys.state_dim();
    int instances = 0, attempts = 0;
    while (instances < 20 && attempts < 1000) {
      ++attempts;
      Box x(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double w = s[i].width() * (0.01 + 0.09 * u(rng));
        const double lo = s[i].lo() + (s[i].width() - w) * u(rng);
        x[i] = Interval(lo, lo + w);
      }
      Pattern pi;
      for (int k = 0, len = 1 + static_cast<int>(rng() % 4); k < len; ++k)
        pi.modes.push_back(1 + static_cast<int>(rng() % sys.num_modes()));
      TubeResult t;
      try {
        t = tube(sys, x, pi, opts);
      } catch (const IntegrationFailure&) {
        continue;
      }
      ++instances;
      const auto sample = uniform_disturbance(sys, rng);
      for (int run = 0; run < 1000; ++run) {
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = x[i].lo() + x[i].width() * u(rng);
        double t0 = 0;
        std::size_t seg = 0;
        bool bad = false;
        const auto check = [&](double t_rel, std::span<const double> y) {
          const double tt = t0 + t_rel;
          while (seg + 1 < t.segments.size() && t.segments[seg].t_hi < tt) ++seg;
          // Sample times may sit on a segment boundary; either side may hold them.
          bool inside = t.segments[seg].box.contains(y);
          if (!inside && seg + 1 < t.segments.size() && t.segments[seg + 1].t_lo <= tt)
            inside = t.segments[seg + 1].box.contains(y);
          if (!inside) bad = true;
        };
        check(0.0, p);
        for (int m : pi.modes) {
          reference_integrate(sys, m, p, sys.tau(), 100, sample, check);
          t0 += sys.tau();
        }
        if (!t.endpoint.contains(p)) bad = true;
        violations += bad;
        ++trajectories;
      }
    }
    detail += std::string(name == std::string("dcdc") ? "dcdc" : "polynomial") + " " + std::to_string(instances) +
              " instances; ";
    if (instances < 20) return {false, detail + "could not draw 20 integrable instances"};
  }
  return {violations == 0,
          detail + std::to_string(trajectories) + " trajectories, " + std::to_string(violations) + " violations"};
}

const char* kDecay = "system decay\ndim 1\ntau 5\nmode 1:\n  x1' = -x1\n";

Outcome criterion5() {
  const auto sys = parse_model(kDecay);
  const TubeResult t = integrate_mode(sys, 1, Box{Interval(1)}, 5.0);
  int misses = 0;
  std::size_t seg = 0;
  for (int k = 0; k < 1000; ++k) {
    const double tt = 5.0 * k / 999;
    while (seg + 1 < t.segments.size() && t.segments[seg].t_hi < tt) ++seg;
    if (!t.segments[seg].box[0].contains(std::exp(-tt))) ++misses;
  }
  const double w = t.endpoint[0].width();
  const bool ok = misses == 0 && t.endpoint[0].contains(std::exp(-5.0)) && w <= 1e-4;
  return {ok, std::to_string(misses) + " of 1000 samples outside, " + std::to_string(t.segments.size()) +
                  " segments, endpoint width " + fmt("%.3g", w)};
}

Outcome criterion6() {
  const auto sys = parse_model(kDecay);
  IntegratorOptions opts;
  opts.lte_tol = 1.0;
  bool ok = true;
  std::string detail;
  for (const auto* scheme : {&ButcherScheme::euler(), &ButcherScheme::heun(), &ButcherScheme::rk4()}) {
    opts.scheme = scheme;
    const double h = 0.1;
    const double w1 = validated_step(sys, 1, Box{Interval(1)}, h, opts).lte.max_width();
    const double w2 = validated_step(sys, 1, Box{Interval(1)}, h / 2, opts).lte.max_width();
    const double need = std::pow(2.0, scheme->order) / 1.5;
    ok = ok && w1 / w2 >= need;
    detail += scheme->name + " " + fmt("%.2f", w1 / w2) + " (need " + fmt("%.2f", need) + ") ";
  }
  return {ok, detail};
}

// Modes with constant right-hand sides have exact, affine flows.
Outcome criterion7() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> rate(-8, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0, successes = 0, failures = 0, instances = 0;
  for (; instances < 40; ++instances) {
    const int n = 1 + instances % 2, modes = 2 + instances % 2;
    std::ostringstream m;
    m << "system drift\ndim " << n << "\ntau 0.5\n";
    for (int k = 1; k <= modes; ++k) {
      m << "mode " << k << ":\n";
      for (int i = 1; i <= n; ++i) m << "  x" << i << "' = " << rate(rng) * 0.25 << "\n";
    }
    const auto sys = parse_model(m.str());
    SynthesisProblem prob;
    prob.R = Box(n);
    prob.target = Box(n);
    prob.S = Box(n);
    for (int i = 0; i < n; ++i) {
      prob.R[i] = Interval(0, 1);
      prob.target[i] = Interval(-0.1, 1.1);
      prob.S[i] = Interval(-1 - u(rng), 2 + u(rng));
    }
    prob.K = 1 + instances % 4;
    Box w(n);
    for (int i = 0; i < n; ++i) {
      const double a = 0.6 * u(rng);
      w[i] = Interval(a, a + 0.4);
    }
    SearchOptions naive;
    naive.algorithm = PatternSearch::Naive;
    const auto p1 = find_pattern(sys, w, prob, naive);
    const auto p2 = find_pattern2(sys, w, prob);
    bool ok = p1.has_value() == p2.has_value();
    if (p1) ok = ok && certifies(tube(sys, w, *p1), prob);
    if (p2) ok = ok && certifies(tube(sys, w, *p2), prob);
    agree += ok;
    (p1 ? successes : failures)++;
  }
  const bool ok = agree == instances && instances >= 20 && successes > 0 && failures > 0;
  return {ok, std::to_string(agree) + " of " + std::to_string(instances) + " agree (" + std::to_string(successes) +
                  " solvable, " + std::to_string(failures) + " not)"};
}

struct ReplayResult {
  bool ok = true;
  std::string detail;
};

ReplayResult replay(const SwitchedSystem& sys, const std::vector<Controller>& ctls, std::uint64_t base_seed) {
  ReplayResult r;
  const auto& first = ctls.front().problem;
  const Box& s = first.S;
  const auto& b = first.B;
  std::mt19937_64 rng(base_seed);
  int bad_runs = 0;
  std::string first_error;
  for (int run = 0; run < 100; ++run) {
    std::vector<double> x0(sys.state_dim());
    for (std::size_t i = 0; i < x0.size(); ++i)
      x0[i] = first.R[i].lo() + first.R[i].width() * std::uniform_real_distribution<double>(0, 1)(rng);
    SimulationOptions opts;
    opts.n_patterns = 50;
    opts.seed = base_seed * 1000 + static_cast<std::uint64_t>(run);
    bool ok = true;
    try {
      const Trace t = simulate_closed_loop(sys, ctls, x0, opts);
      for (std::size_t k = 0; k < t.boundary_states.size(); ++k) {
        // State k starts application k, which uses controller k mod size.
        const Box& region = ctls[k % ctls.size()].problem.R;
        if (k < t.patterns.size() && !region.contains(t.boundary_states[k])) ok = false;
      }
      if (!ctls[(t.boundary_states.size() - 2) % ctls.size()].problem.target.contains(t.boundary_states.back()))
        ok = false;
      for (const auto& p : t.points) {
        if (!s.contains(p.x)) ok = false;
        if (b && b->contains(p.x)) ok = false;
      }
      if (!ok && first_error.empty()) first_error = "run " + std::to_string(run) + " left S, entered B or missed R";
    } catch (const OutsideDomain& e) {
      ok = false;
      if (first_error.empty()) first_error = e.what();
    }
    bad_runs += !ok;
  }
  r.ok = bad_runs == 0;
  r.detail = std::to_string(100 - bad_runs) + "/100 runs clean";
  if (!first_error.empty()) r.detail += " (" + first_error + ")";
  return r;
}

Outcome criterion8() {
  std::string detail;
  bool ok = true;
  const auto& d = dcdc();
  if (d.ctl) {
    const auto r = replay(problem("dcdc").system, {*d.ctl}, 8);
    ok = ok && r.ok;
    detail += "dcdc " + r.detail;
  } else {
    ok = false;
    detail += "dcdc has no controller";
  }
  polynomial();
  if (g_r1r2->ctl && g_r2r1->ctl) {
    const auto r = replay(problem("polynomial_R1toR2").system, {*g_r1r2->ctl, *g_r2r1->ctl}, 88);
    ok = ok && r.ok;
    detail += "; polynomial " + r.detail;
  } else {
    ok = false;
    detail += "; polynomial has no ";
    detail += g_r1r2->ctl ? "R2->R1 controller" : "R1->R2 controller";
  }
  return {ok, detail};
}

Outcome criterion9() {
  const auto& first = dcdc();
  if (!first.ctl) return {false, "no controller from the first run"};
  const auto second = run_synthesis(problem("dcdc"), std::nullopt);
  if (!second.ctl) return {false, "second run failed"};
  fs::create_directories(g_work);
  const fs::path a = g_work / "dcdc_run1.ctl.json", b = g_work / "dcdc_run2.ctl.json";
  save_controller(*first.ctl, a.string());
  save_controller(*second.ctl, b.string());
  const std::string ta = read_file(a), tb = read_file(b);
  return {!ta.empty() && ta == tb, std::to_string(ta.size()) + " bytes, " + (ta == tb ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string models = SWITCHSYNTH_MODELS;
  std::string work = (fs::temp_directory_path() / "switchsynth_acceptance").string();
  std::vector<int> only;
  app.add_option("--models", models, "Directory with the bundled models");
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--criteria", only, "Run only these criteria")->delimiter(',')->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  g_models = models;
  g_work = work;

  const std::map<int, Outcome (*)()> all{{1, criterion1}, {2, criterion2}, {3, criterion3},
                                        {4, criterion4}, {5, criterion5}, {6, criterion6},
                                        {7, criterion7}, {8, criterion8}, {9, criterion9}};
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& [k, run] : all) {
    if (!selected.empty() && !selected.count(k)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s [%.1f s]\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
