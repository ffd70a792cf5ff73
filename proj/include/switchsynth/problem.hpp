#pragma once

#include <string>
#include <string_view>

#include "switchsynth/model.hpp"
#include "switchsynth/synthesis.hpp"

namespace switchsynth {

/// Synthesis job as read from a problem file:
///
///     problem <name>
///     model <path>          (relative to the problem file)
///     R <box>
///     target <box>          (optional, defaults to R)
///     S <box>
///     B <box>|none          (optional)
///     K <int>
///     D <int>
///     scheme euler|heun|rk4 (optional, rk4)
///     lte_tol <real>        (optional, 1e-6)
struct ProblemFile {
  std::string name;
  std::string model_path;
  SynthesisProblem problem;
  std::string scheme = "rk4";
  double lte_tol = 1e-6;

  IntegratorOptions integrator_options() const;
};

/// Throws SyntaxError with the offending line and column.
ProblemFile parse_problem(std::string_view text, const std::string& base_dir = ".");
/// Throws FormatError when the file cannot be read.
ProblemFile load_problem(const std::string& path);

/// A problem file together with its model, validated against each other.
struct LoadedProblem {
  ProblemFile file;
  SwitchedSystem system;
};

/// Loads the problem and its model; throws ProblemError or DimensionMismatch
/// when the boxes do not fit the model.
LoadedProblem load_problem_with_model(const std::string& path);

}  // namespace switchsynth
