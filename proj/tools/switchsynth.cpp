// switchsynth command-line front end.
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "switchsynth/controller.hpp"
#include "switchsynth/errors.hpp"
#include "switchsynth/plot.hpp"
#include "switchsynth/problem.hpp"
#include "switchsynth/synthesis.hpp"

namespace ss = switchsynth;

namespace {

enum Exit { kOk = 0, kInputError = 1, kFailed = 2, kTimeout = 3 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("switchsynth");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("SWITCHSYNTH_LOG")) {
    const std::string v = env;
    if (v == "error") spdlog::set_level(spdlog::level::err);
    else if (v == "info") spdlog::set_level(spdlog::level::info);
    else if (v == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring SWITCHSYNTH_LOG={} (expected error, info or debug)", v);
  }
}

ss::SearchOptions search_options(const ss::ProblemFile& pf, int jobs, bool naive) {
  ss::SearchOptions o;
  o.integrator = pf.integrator_options();
  o.algorithm = naive ? ss::PatternSearch::Naive : ss::PatternSearch::Pruned;
  o.jobs = jobs;
  if (spdlog::should_log(spdlog::level::debug)) {
    o.diagnostics = [](ss::SearchEvent e, const ss::Pattern& p, const std::string& id) {
      spdlog::debug("{} {} {}", ss::to_string(e), ss::to_string(p), id);
    };
  }
  return o;
}

std::size_t max_pattern_length(const std::vector<ss::Cell>& cells) {
  std::size_t m = 0;
  for (const auto& c : cells) m = std::max(m, c.pat.size());
  return m;
}

std::string default_output(const std::string& problem_path) {
  return std::filesystem::path(problem_path).stem().string() + ".ctl.json";
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> x;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && item[used] == ' ') ++used;
    if (used == 0 || used != item.size()) throw ss::FormatError("malformed state '" + text + "'");
    x.push_back(v);
  }
  if (x.empty()) throw ss::FormatError("empty state");
  return x;
}

Clock::time_point deadline_after(Clock::time_point t0, double seconds) {
  return t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

int cmd_synth(const std::string& problem_path, std::string out_path, int jobs, double timeout) {
  auto loaded = ss::load_problem_with_model(problem_path);
  auto opts = search_options(loaded.file, jobs, false);
  spdlog::info("synthesizing {} over {}", loaded.file.name, ss::to_string(loaded.file.problem.R));
  const auto t0 = Clock::now();
  if (timeout > 0) opts.deadline = deadline_after(t0, timeout);
  ss::Decomposition dec;
  try {
    dec = ss::synthesize(loaded.system, loaded.file.problem, opts);
  } catch (const ss::SynthesisFailure& e) {
    std::cout << "synthesis failed after " << seconds_since(t0) << " s\n";
    std::cout << "witness cell " << e.cell_id() << " " << ss::to_string(e.cell()) << "\n";
    return kFailed;
  } catch (const ss::SearchTimeout&) {
    std::cout << "synthesis timed out after " << seconds_since(t0) << " s\n";
    return kTimeout;
  }
  const double wall = seconds_since(t0);
  const auto ctl = ss::make_controller(dec, loaded.system, opts.integrator);
  if (out_path.empty()) out_path = default_output(problem_path);
  ss::save_controller(ctl, out_path);
  std::cout << "cells: " << dec.cells.size() << "\n";
  std::cout << "max pattern length: " << max_pattern_length(dec.cells) << "\n";
  std::cout << "wall time: " << wall << " s\n";
  std::cout << "controller: " << out_path << "\n";
  return kOk;
}

int cmd_verify(const std::string& ctl_path, const std::string& problem_path) {
  auto loaded = ss::load_problem_with_model(problem_path);
  const auto ctl = ss::load_controller(ctl_path);
  ss::Decomposition dec{ctl.cells, loaded.file.problem};
  for (const auto& c : dec.cells)
    if (c.box.dim() != loaded.system.state_dim()) throw ss::DimensionMismatch("controller does not match the model");
  const auto report = ss::verify_decomposition(loaded.system, dec, ctl.integrator_options());
  for (const auto& c : report.cells) {
    std::cout << "cell " << c.index << " " << ss::to_string(dec.cells[c.index].box) << " "
              << ss::to_string(dec.cells[c.index].pat) << ": " << (c.passed() ? "pass" : "FAIL");
    if (!c.passed()) std::cout << " (" << c.message << ")";
    std::cout << "\n";
  }
  std::cout << "cover: " << (report.cover_ok ? "pass" : "FAIL") << "\n";
  for (const auto& u : report.uncovered) std::cout << "  uncovered " << ss::to_string(u) << "\n";
  std::cout << (report.passed() ? "verification passed" : "verification FAILED") << "\n";
  return report.passed() ? kOk : kFailed;
}

int cmd_simulate(const std::string& model_path, const std::vector<std::string>& ctl_paths, const std::string& x0_text,
                 int n, std::uint64_t seed, int substeps, const std::string& out_path, const std::string& plot_path) {
  const auto sys = ss::load_model(model_path);
  std::vector<ss::Controller> ctls;
  for (const auto& p : ctl_paths) ctls.push_back(ss::load_controller(p));
  std::vector<double> x0 = x0_text.empty() ? std::vector<double>{} : parse_point(x0_text);
  if (x0.empty()) {
    for (const auto& iv : ctls.front().problem.R) x0.push_back(iv.mid());
  }
  if (x0.size() != sys.state_dim()) throw ss::DimensionMismatch("x0 has the wrong dimension");
  for (const auto& c : ctls)
    if (c.problem.R.dim() != sys.state_dim()) throw ss::DimensionMismatch("controller does not match the model");

  ss::SimulationOptions opts;
  opts.n_patterns = n;
  opts.seed = seed;
  opts.steps_per_period = substeps;
  ss::Trace trace;
  try {
    trace = ss::simulate_closed_loop(sys, ctls, x0, opts);
  } catch (const ss::OutsideDomain& e) {
    std::cerr << "outside domain: " << e.what() << "\n";
    return kFailed;
  }
  if (out_path == "-") {
    ss::write_trace_csv(std::cout, trace);
  } else {
    std::ofstream out(out_path);
    if (!out) throw ss::FormatError("cannot write '" + out_path + "'");
    ss::write_trace_csv(out, trace);
  }
  if (!plot_path.empty()) {
    std::ofstream svg(plot_path);
    if (!svg) throw ss::FormatError("cannot write '" + plot_path + "'");
    ss::write_trace_svg(svg, trace, ss::plot_regions(ctls.front().problem));
  }
  spdlog::info("{} patterns applied, final state at t = {}", trace.patterns.size(), trace.points.back().t);
  return kOk;
}

int cmd_bench(const std::string& problem_path, const std::string& algo, double timeout, int jobs) {
  auto loaded = ss::load_problem_with_model(problem_path);
  ss::SearchStats stats;
  auto opts = search_options(loaded.file, jobs, algo == "fp");
  opts.stats = &stats;
  const auto t0 = Clock::now();
  if (timeout > 0) opts.deadline = deadline_after(t0, timeout);
  const auto report = [&](const char* outcome) {
    std::cout << "problem: " << loaded.file.name << "\n";
    std::cout << "algorithm: " << algo << "\n";
    std::cout << "outcome: " << outcome << "\n";
    std::cout << "wall time: " << seconds_since(t0) << " s\n";
    std::cout << "expansions: " << stats.expansions.load() << "\n";
    std::cout << "integrations: " << stats.integrations.load() << "\n";
  };
  try {
    const auto dec = ss::synthesize(loaded.system, loaded.file.problem, opts);
    report("success");
    std::cout << "cells: " << dec.cells.size() << "\n";
    return kOk;
  } catch (const ss::SearchTimeout&) {
    report("timeout");
    return kTimeout;
  } catch (const ss::SynthesisFailure& e) {
    report("failure");
    std::cout << "witness cell " << e.cell_id() << " " << ss::to_string(e.cell()) << "\n";
    return kFailed;
  }
}

int cmd_info(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".model") {
    const auto sys = ss::load_model(path);
    std::cout << "system: " << sys.name() << "\n";
    std::cout << "state dimension: " << sys.state_dim() << "\n";
    std::cout << "disturbance: "
              << (sys.dist_dim() ? ss::to_string(sys.dist_box()) : std::string("none")) << "\n";
    std::cout << "tau: " << ss::format_double(sys.tau()) << "\n";
    std::cout << "modes: " << sys.num_modes() << "\n";
    return kOk;
  }
  if (ext == ".problem") {
    const auto lp = ss::load_problem_with_model(path);
    const auto& p = lp.file.problem;
    std::cout << "problem: " << lp.file.name << "\n";
    std::cout << "model: " << lp.file.model_path << " (" << lp.system.name() << ")\n";
    std::cout << "R: " << ss::to_string(p.R) << "\n";
    std::cout << "target: " << ss::to_string(p.target) << "\n";
    std::cout << "S: " << ss::to_string(p.S) << "\n";
    std::cout << "B: " << (p.B ? ss::to_string(*p.B) : std::string("none")) << "\n";
    std::cout << "K: " << p.K << "\nD: " << p.D << "\n";
    std::cout << "scheme: " << lp.file.scheme << "\nlte_tol: " << ss::format_double(lp.file.lte_tol) << "\n";
    return kOk;
  }
  const auto ctl = ss::load_controller(path);
  std::cout << "controller for: " << ctl.meta.system << "\n";
  std::cout << "cells: " << ctl.cells.size() << "\n";
  std::cout << "max pattern length: " << max_pattern_length(ctl.cells) << "\n";
  std::cout << "R: " << ss::to_string(ctl.problem.R) << "\n";
  std::cout << "target: " << ss::to_string(ctl.problem.target) << "\n";
  std::cout << "K: " << ctl.meta.K << "\nD: " << ctl.meta.D << "\n";
  std::cout << "scheme: " << ctl.meta.scheme << "\ntoolkit: " << ctl.meta.toolkit_version << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Correct-by-construction switching controllers for sampled switched systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ss::kToolkitVersion));

  std::string problem, output, controller, algo = "fp2", model, x0, out_csv = "trace.csv", plot;
  std::vector<std::string> controllers;
  int jobs = 1, n = 20, substeps = 100;
  double timeout = 0;
  std::uint64_t seed = 0;

  auto* synth = app.add_subcommand("synth", "Synthesize a controller for a problem file");
  synth->add_option("problem", problem, "Problem file")->required();
  synth->add_option("-o,--output", output, "Controller file (default <problem>.ctl.json)");
  synth->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  synth->add_option("--timeout", timeout, "Seconds before giving up (0: none)")->check(CLI::NonNegativeNumber);

  auto* verify = app.add_subcommand("verify", "Re-check every cell of a controller");
  verify->add_option("controller", controller, "Controller file")->required();
  verify->add_option("problem", problem, "Problem file")->required();

  auto* simulate = app.add_subcommand("simulate", "Closed-loop simulation with random disturbances");
  simulate->add_option("controllers", controllers, "Controller files, applied in rotation")->required();
  simulate->add_option("-m,--model", model, "Model file")->required();
  simulate->add_option("--x0", x0, "Initial state, comma separated (default: centre of R)");
  simulate->add_option("-n,--patterns", n, "Number of pattern applications")->check(CLI::NonNegativeNumber);
  simulate->add_option("--seed", seed, "Disturbance seed");
  simulate->add_option("--substeps", substeps, "Reference RK4 substeps per period")->check(CLI::PositiveNumber);
  simulate->add_option("-o,--output", out_csv, "Trace CSV, '-' for stdout");
  simulate->add_option("--plot", plot, "Also write an SVG plot");

  auto* bench = app.add_subcommand("bench", "Time a synthesis run with a given pattern search");
  bench->add_option("problem", problem, "Problem file")->required();
  bench->add_option("--algo", algo, "fp (exhaustive) or fp2 (pruned)")->check(CLI::IsMember({"fp", "fp2"}));
  bench->add_option("--timeout", timeout, "Seconds before giving up (0: none)")->check(CLI::NonNegativeNumber);
  bench->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* info = app.add_subcommand("info", "Summarize a model, problem or controller file");
  std::string info_path;
  info->add_option("file", info_path, "File to describe")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*synth) return cmd_synth(problem, output, jobs, timeout);
    if (*verify) return cmd_verify(controller, problem);
    if (*simulate) return cmd_simulate(model, controllers, x0, n, seed, substeps, out_csv, plot);
    if (*bench) return cmd_bench(problem, algo, timeout, jobs);
    if (*info) return cmd_info(info_path);
  } catch (const ss::OutsideDomain& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  } catch (const ss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
