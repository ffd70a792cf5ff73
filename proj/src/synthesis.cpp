#include "switchsynth/synthesis.hpp"

#include <deque>
#include <exception>
#include <future>
#include <mutex>

namespace switchsynth {

void SynthesisProblem::validate(std::size_t n) const {
  auto check_dim = [n](const Box& b, const char* what) {
    if (b.dim() != n)
      throw DimensionMismatch(std::string(what) + " has dimension " + std::to_string(b.dim()) + ", model has " +
                              std::to_string(n));
    if (b.is_empty() || !b.all_finite()) throw ProblemError(std::string(what) + " must be a non-empty finite box");
  };
  check_dim(R, "R");
  check_dim(target, "target");
  check_dim(S, "S");
  if (B) check_dim(*B, "B");
  if (!subset(R, S)) throw ProblemError("R = " + to_string(R) + " is not contained in S = " + to_string(S));
  if (B) {
    if (!subset(*B, S)) throw ProblemError("B = " + to_string(*B) + " is not contained in S = " + to_string(S));
    if (intersects(R, *B)) throw ProblemError("R = " + to_string(R) + " intersects B = " + to_string(*B));
    if (intersects(target, *B))
      throw ProblemError("target = " + to_string(target) + " intersects B = " + to_string(*B));
  }
  if (!subset(target, S))
    throw ProblemError("target = " + to_string(target) + " is not contained in S = " + to_string(S));
  if (K < 1) throw ProblemError("K must be at least 1");
  if (D < 0) throw ProblemError("D must be non-negative");
}

std::string to_string(SearchEvent e) {
  switch (e) {
    case SearchEvent::Expand: return "EXPAND";
    case SearchEvent::Cut: return "CUT";
    case SearchEvent::Validate: return "VALIDATE";
  }
  return "?";
}

bool tube_is_safe(const TubeResult& tube, const SynthesisProblem& prob) {
  for (const auto& seg : tube.segments) {
    if (!subset(seg.box, prob.S)) return false;
    if (prob.B && intersects(seg.box, *prob.B)) return false;
  }
  return true;
}

bool certifies(const TubeResult& tube, const SynthesisProblem& prob) {
  return subset(tube.endpoint, prob.target) && tube_is_safe(tube, prob);
}

namespace {

class Search {
public:
  Search(const SwitchedSystem& sys, const SynthesisProblem& prob, const SearchOptions& opts)
      : sys_(sys), prob_(prob), opts_(opts) {}

  void emit(SearchEvent e, const Pattern& p, const std::string& id) {
    if (!opts_.diagnostics) return;
    std::lock_guard lock(diag_mutex_);
    opts_.diagnostics(e, p, id);
  }

  void check_deadline() const {
    if (opts_.deadline && std::chrono::steady_clock::now() >= *opts_.deadline)
      throw SearchTimeout("search deadline exceeded");
  }

  void count_expansion() {
    if (opts_.stats) opts_.stats->expansions.fetch_add(1, std::memory_order_relaxed);
  }
  void count_integrations(std::uint64_t k) {
    if (opts_.stats) opts_.stats->integrations.fetch_add(k, std::memory_order_relaxed);
  }

  std::optional<Pattern> naive(const Box& w, const std::string& id) {
    const int n_modes = static_cast<int>(sys_.num_modes());
    for (int len = 1; len <= prob_.K; ++len) {
      Pattern pat;
      pat.modes.assign(static_cast<std::size_t>(len), 1);
      while (true) {
        check_deadline();
        count_expansion();
        emit(SearchEvent::Expand, pat, id);
        bool ok = false;
        try {
          const TubeResult tb = tube(sys_, w, pat, opts_.integrator);
          count_integrations(pat.size());
          ok = certifies(tb, prob_);
        } catch (const IntegrationFailure&) {
          ok = false;
        }
        if (ok) {
          emit(SearchEvent::Validate, pat, id);
          return pat;
        }
        emit(SearchEvent::Cut, pat, id);
        // Next pattern of this length in lexicographic order.
        int pos = len - 1;
        while (pos >= 0 && pat.modes[static_cast<std::size_t>(pos)] == n_modes) {
          pat.modes[static_cast<std::size_t>(pos)] = 1;
          --pos;
        }
        if (pos < 0) break;
        ++pat.modes[static_cast<std::size_t>(pos)];
      }
    }
    return std::nullopt;
  }

  std::optional<Pattern> pruned(const Box& w, const std::string& id) {
    const int n_modes = static_cast<int>(sys_.num_modes());
    std::deque<SearchNode> frontier;
    frontier.push_back({w, w, Pattern{}});
    while (!frontier.empty()) {
      SearchNode e = std::move(frontier.front());
      frontier.pop_front();
      for (int mode = 1; mode <= n_modes; ++mode) {
        check_deadline();
        Pattern pat = e.pat.extended(mode);
        count_expansion();
        emit(SearchEvent::Expand, pat, id);
        TubeResult tb;
        try {
          tb = integrate_mode(sys_, mode, e.y_current, sys_.tau(), opts_.integrator);
          count_integrations(1);
        } catch (const IntegrationFailure&) {
          emit(SearchEvent::Cut, pat, id);
          continue;
        }
        if (!tube_is_safe(tb, prob_)) {
          emit(SearchEvent::Cut, pat, id);
          continue;
        }
        if (subset(tb.endpoint, prob_.target)) {
          emit(SearchEvent::Validate, pat, id);
          return pat;
        }
        if (static_cast<int>(pat.size()) < prob_.K) frontier.push_back({e.y_init, std::move(tb.endpoint), std::move(pat)});
      }
    }
    return std::nullopt;
  }

  std::optional<Pattern> find(const Box& w, const std::string& id) {
    return opts_.algorithm == PatternSearch::Naive ? naive(w, id) : pruned(w, id);
  }

  std::vector<Cell> solve(const Box& w, int depth, const std::string& id) {
    check_deadline();
    if (opts_.stats) opts_.stats->cells.fetch_add(1, std::memory_order_relaxed);
    if (auto pat = find(w, id)) return {Cell{w, std::move(*pat)}};
    if (depth <= 0) throw SynthesisFailure(w, id);
    std::pair<Box, Box> halves;
    try {
      halves = bisect(w);
    } catch (const DegenerateBox&) {
      throw SynthesisFailure(w, id);
    }

    std::vector<Cell> left;
    std::vector<Cell> right;
    if (try_acquire_worker()) {
      auto future = std::async(std::launch::async, [this, &halves, depth, &id] {
        struct Release {
          Search* s;
          ~Release() { s->release_worker(); }
        } release{this};
        return solve(halves.first, depth - 1, id + "0");
      });
      std::exception_ptr right_error;
      try {
        right = solve(halves.second, depth - 1, id + "1");
      } catch (...) {
        right_error = std::current_exception();
      }
      left = future.get();  // a failure on the left wins, as in sequential order
      if (right_error) std::rethrow_exception(right_error);
    } else {
      left = solve(halves.first, depth - 1, id + "0");
      right = solve(halves.second, depth - 1, id + "1");
    }
    left.insert(left.end(), std::make_move_iterator(right.begin()), std::make_move_iterator(right.end()));
    return left;
  }

  void set_workers(int extra) { idle_workers_.store(extra); }

private:
  bool try_acquire_worker() {
    int avail = idle_workers_.load();
    while (avail > 0) {
      if (idle_workers_.compare_exchange_weak(avail, avail - 1)) return true;
    }
    return false;
  }
  void release_worker() { idle_workers_.fetch_add(1); }

  const SwitchedSystem& sys_;
  const SynthesisProblem& prob_;
  const SearchOptions& opts_;
  std::mutex diag_mutex_;
  std::atomic<int> idle_workers_{0};
};

}  // namespace

std::optional<Pattern> find_pattern(const SwitchedSystem& sys, const Box& w, const SynthesisProblem& prob,
                                    const SearchOptions& opts, const std::string& cell_id) {
  Search s(sys, prob, opts);
  return s.naive(w, cell_id);
}

std::optional<Pattern> find_pattern2(const SwitchedSystem& sys, const Box& w, const SynthesisProblem& prob,
                                     const SearchOptions& opts, const std::string& cell_id) {
  Search s(sys, prob, opts);
  return s.pruned(w, cell_id);
}

Decomposition decomposition(const SwitchedSystem& sys, const Box& w, const SynthesisProblem& prob, int depth,
                            const SearchOptions& opts) {
  prob.validate(sys.state_dim());
  if (w.dim() != sys.state_dim()) throw DimensionMismatch("decomposition box dimension does not match the model");
  Search s(sys, prob, opts);
  s.set_workers(std::max(0, opts.jobs - 1));
  Decomposition dec;
  dec.problem = prob;
  // One degree of bisection halves every dimension once: n binary splits.
  dec.cells = s.solve(w, depth * static_cast<int>(sys.state_dim()), "c");
  return dec;
}

Decomposition synthesize(const SwitchedSystem& sys, const SynthesisProblem& prob, const SearchOptions& opts) {
  return decomposition(sys, prob.R, prob, prob.D, opts);
}

bool VerificationReport::passed() const noexcept {
  if (!cover_ok) return false;
  for (const auto& c : cells)
    if (!c.passed()) return false;
  return true;
}

namespace {

// Closed-box difference a \ c as closures of at most 2n disjoint pieces.
void subtract(const Box& a, const Box& c, std::vector<Box>& out) {
  if (!intersects(a, c)) {
    out.push_back(a);
    return;
  }
  Box rest = a;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (rest[i].lo() < c[i].lo()) {
      Box piece = rest;
      piece[i] = Interval(rest[i].lo(), c[i].lo());
      out.push_back(std::move(piece));
      rest[i] = Interval(c[i].lo(), rest[i].hi());
    }
    if (c[i].hi() < rest[i].hi()) {
      Box piece = rest;
      piece[i] = Interval(c[i].hi(), rest[i].hi());
      out.push_back(std::move(piece));
      rest[i] = Interval(rest[i].lo(), c[i].hi());
    }
  }
}

}  // namespace

std::vector<Box> uncovered_parts(const Box& region, const std::vector<Box>& boxes) {
  std::vector<Box> pieces{region};
  for (const auto& b : boxes) {
    if (b.dim() != region.dim()) throw DimensionMismatch("cell dimension does not match the region");
    std::vector<Box> next;
    for (const auto& p : pieces) subtract(p, b, next);
    pieces = std::move(next);
    if (pieces.empty()) break;
  }
  return pieces;
}

VerificationReport verify_decomposition(const SwitchedSystem& sys, const Decomposition& dec,
                                        const IntegratorOptions& opts) {
  VerificationReport report;
  const SynthesisProblem& prob = dec.problem;
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < dec.cells.size(); ++i) {
    const Cell& cell = dec.cells[i];
    CellReport r;
    r.index = i;
    boxes.push_back(cell.box);
    try {
      if (cell.pat.empty()) throw DomainError("empty pattern");
      if (cell.box.dim() != sys.state_dim()) throw DimensionMismatch("cell dimension does not match the model");
      const TubeResult tb = tube(sys, cell.box, cell.pat, opts);
      r.integrated = true;
      r.post_in_target = subset(tb.endpoint, prob.target);
      r.tube_in_safe = true;
      r.tube_avoids_obstacle = true;
      for (const auto& seg : tb.segments) {
        if (!subset(seg.box, prob.S)) r.tube_in_safe = false;
        if (prob.B && intersects(seg.box, *prob.B)) r.tube_avoids_obstacle = false;
      }
      if (!r.post_in_target) r.message = "Post = " + to_string(tb.endpoint) + " leaves the target";
      else if (!r.tube_in_safe) r.message = "tube leaves S";
      else if (!r.tube_avoids_obstacle) r.message = "tube meets B";
    } catch (const Error& e) {
      r.message = e.what();
    }
    report.cells.push_back(std::move(r));
  }
  report.uncovered = uncovered_parts(prob.R, boxes);
  report.cover_ok = report.uncovered.empty();
  return report;
}

}  // namespace switchsynth
