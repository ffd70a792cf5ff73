#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "switchsynth/errors.hpp"
#include "switchsynth/integrator.hpp"
#include "switchsynth/interval.hpp"
#include "switchsynth/model.hpp"
#include "switchsynth/pattern.hpp"

namespace switchsynth {

struct SynthesisProblem {
  Box R;
  Box target;  // where Post must land; R for plain recurrence
  Box S;
  std::optional<Box> B;
  int K = 1;
  int D = 0;

  /// Throws ProblemError unless R and target lie in S, B ⊆ S, B is disjoint
  /// from R and target, K >= 1 and D >= 0; DimensionMismatch against n.
  void validate(std::size_t n) const;
};

/// Box that no pattern could control at the maximal bisection depth.
class SynthesisFailure : public Error {
public:
  SynthesisFailure(Box cell, std::string cell_id)
      : Error("no pattern found for cell " + cell_id + " = " + to_string(cell)),
        cell_(std::move(cell)), cell_id_(std::move(cell_id)) {}
  const Box& cell() const noexcept { return cell_; }
  const std::string& cell_id() const noexcept { return cell_id_; }

private:
  Box cell_;
  std::string cell_id_;
};

struct SearchNode {
  Box y_init;
  Box y_current;
  Pattern pat;
};

struct Cell {
  Box box;
  Pattern pat;
};

struct Decomposition {
  std::vector<Cell> cells;
  SynthesisProblem problem;
};

enum class SearchEvent { Expand, Cut, Validate };
std::string to_string(SearchEvent e);

/// Receives `EXPAND|CUT|VALIDATE, pattern, cell-id` events. Calls are
/// serialized by the search even when decomposition runs in parallel.
using DiagnosticsSink = std::function<void(SearchEvent, const Pattern&, const std::string& cell_id)>;

enum class PatternSearch { Naive, Pruned };

/// Counters shared by all workers of one synthesis run.
struct SearchStats {
  /// Search-tree nodes: candidates evaluated (naive) or children generated (pruned).
  std::atomic<std::uint64_t> expansions{0};
  /// One-mode integrations over one sampling period.
  std::atomic<std::uint64_t> integrations{0};
  std::atomic<std::uint64_t> cells{0};
};

struct SearchOptions {
  IntegratorOptions integrator;
  PatternSearch algorithm = PatternSearch::Pruned;
  DiagnosticsSink diagnostics;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  /// Worker threads for decomposition; results do not depend on it.
  int jobs = 1;
  SearchStats* stats = nullptr;
};

/// Conditions a cell must satisfy: Post ⊆ target and every tube segment
/// inside S and disjoint from B.
bool tube_is_safe(const TubeResult& tube, const SynthesisProblem& prob);
bool certifies(const TubeResult& tube, const SynthesisProblem& prob);

/// Exhaustive enumeration of patterns of length 1..K, each evaluated from
/// scratch, in (length, lexicographic) order.
std::optional<Pattern> find_pattern(const SwitchedSystem& sys, const Box& w, const SynthesisProblem& prob,
                                    const SearchOptions& opts = {}, const std::string& cell_id = "c");

/// Breadth-first search reusing prefix successors and cutting unsafe
/// prefixes. Returns the same pattern as find_pattern.
std::optional<Pattern> find_pattern2(const SwitchedSystem& sys, const Box& w, const SynthesisProblem& prob,
                                     const SearchOptions& opts = {}, const std::string& cell_id = "c");

/// Bisection-driven cover of W. `depth` counts bisection degrees: a cell at
/// degree k has been halved k times in every dimension, i.e. up to n*depth
/// binary splits along the widest dimension. Cells come out in left-first
/// order and are identified by their bisection path ("c", "c0", "c01", ...).
/// Throws SynthesisFailure for the leftmost cell left uncontrolled at depth 0
/// and SearchTimeout past the deadline.
Decomposition decomposition(const SwitchedSystem& sys, const Box& w, const SynthesisProblem& prob, int depth,
                            const SearchOptions& opts = {});

/// decomposition(R, problem, D).
Decomposition synthesize(const SwitchedSystem& sys, const SynthesisProblem& prob, const SearchOptions& opts = {});

struct CellReport {
  std::size_t index = 0;
  bool integrated = false;  // false when Post/Tube could not be computed
  bool post_in_target = false;
  bool tube_in_safe = false;
  bool tube_avoids_obstacle = false;
  std::string message;

  bool passed() const noexcept { return integrated && post_in_target && tube_in_safe && tube_avoids_obstacle; }
};

struct VerificationReport {
  std::vector<CellReport> cells;
  bool cover_ok = false;
  /// Pieces of R not covered by any cell.
  std::vector<Box> uncovered;

  bool passed() const noexcept;
};

/// Recomputes Post and Tube of every cell and checks the cover of R.
VerificationReport verify_decomposition(const SwitchedSystem& sys, const Decomposition& dec,
                                        const IntegratorOptions& opts = {});

/// Parts of `region` not covered by the union of `boxes`.
std::vector<Box> uncovered_parts(const Box& region, const std::vector<Box>& boxes);

}  // namespace switchsynth
