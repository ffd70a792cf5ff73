#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "switchsynth/model.hpp"
#include "switchsynth/pattern.hpp"
#include "switchsynth/synthesis.hpp"

namespace switchsynth {

inline constexpr std::string_view kToolkitVersion = "1.0.0";
/// Controller file format version; readers reject other major versions.
inline constexpr std::string_view kControllerFormatVersion = "1.0";

struct ControllerMeta {
  std::string system;
  double tau = 0.0;
  int K = 0;
  int D = 0;
  std::string scheme = "rk4";
  double lte_tol = 1e-6;
  std::string toolkit_version{kToolkitVersion};
};

/// State-feedback switching law: the pattern of the first cell containing x.
struct Controller {
  std::vector<Cell> cells;
  ControllerMeta meta;
  SynthesisProblem problem;

  /// Throws FormatError unless cells are non-empty, patterns non-empty,
  /// dimensions agree and tau > 0.
  void validate() const;
  Decomposition decomposition() const { return Decomposition{cells, problem}; }
  IntegratorOptions integrator_options() const;
};

Controller make_controller(const Decomposition& dec, const SwitchedSystem& sys, const IntegratorOptions& opts);

/// Pattern of the lowest-index cell containing x; throws OutsideDomain.
const Pattern& lookup(const Controller& ctl, std::span<const double> x);

/// Canonical JSON: sorted keys, shortest round-trip decimals.
std::string to_json(const Controller& ctl);
/// Throws FormatError or VersionMismatch.
Controller controller_from_json(std::string_view text);
void save_controller(const Controller& ctl, const std::string& path);
Controller load_controller(const std::string& path);

/// Disturbance source: fills d with one admissible value.
using DisturbanceSampler = std::function<void(std::span<double> d)>;

/// Uniform samples from the disturbance box of sys.
DisturbanceSampler uniform_disturbance(const SwitchedSystem& sys, std::mt19937_64& rng);

/// Classical RK4 over `steps` equal substeps of one mode, d held constant
/// within a substep and re-sampled between substeps. on_step sees the state
/// after each substep.
void reference_integrate(const SwitchedSystem& sys, int mode, std::span<double> x, double duration, int steps,
                         const DisturbanceSampler& sample,
                         const std::function<void(double t, std::span<const double> x)>& on_step = {});

struct TracePoint {
  double t = 0.0;
  std::vector<double> x;
  int mode = 0;  // mode applied from t on; 0 after the last step
};

struct Trace {
  std::vector<TracePoint> points;
  /// State at every pattern boundary, starting with x0.
  std::vector<std::vector<double>> boundary_states;
  std::vector<Pattern> patterns;
};

struct SimulationOptions {
  int n_patterns = 20;
  std::uint64_t seed = 0;
  /// Reference substeps per sampling period.
  int steps_per_period = 100;
};

/// Applies n_patterns patterns; application k uses controllers[k % size],
/// so alternating reach controllers chain naturally. Throws OutsideDomain
/// when a state has no cell or a pattern ends outside its target.
Trace simulate_closed_loop(const SwitchedSystem& sys, std::span<const Controller> controllers,
                           std::span<const double> x0, const SimulationOptions& opts);

/// `t,x1,...,xn,mode`, one row per reference substep.
void write_trace_csv(std::ostream& out, const Trace& trace);

}  // namespace switchsynth
