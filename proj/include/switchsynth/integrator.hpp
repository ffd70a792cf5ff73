#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "switchsynth/interval.hpp"
#include "switchsynth/model.hpp"
#include "switchsynth/pattern.hpp"

namespace switchsynth {

/// Explicit Runge-Kutta tableau. Coefficients are stored as enclosures of
/// the exact rationals so the order conditions hold for the enclosed method.
struct ButcherScheme {
  std::string name;
  int stages = 0;
  int order = 0;
  std::vector<Interval> a;  // stages x stages, row-major, strictly lower triangular
  std::vector<Interval> b;
  std::vector<Interval> c;

  const Interval& coef(int i, int j) const { return a[static_cast<std::size_t>(i * stages + j)]; }

  static const ButcherScheme& euler();
  static const ButcherScheme& heun();
  static const ButcherScheme& rk4();
  /// "euler", "heun" or "rk4"; throws DomainError otherwise.
  static const ButcherScheme& by_name(const std::string& name);
};

struct IntegratorOptions {
  const ButcherScheme* scheme = &ButcherScheme::rk4();
  /// Largest accepted width of the truncation-error box, per dimension.
  double lte_tol = 1e-6;
  /// h_min = duration * h_min_fraction.
  double h_min_fraction = 1.0 / 1024.0;
  int max_inflations = 8;
  double inflation_factor = 1.1;
  double inflation_abs = 1e-10;
  /// Picard seed: the initial box widened by this fraction of its width.
  double seed_fraction = 0.1;
  double seed_abs = 1e-10;
};

struct StepResult {
  Box x_next;   // encloses x(t_n + h) for every start in xn
  Box apriori;  // Picard box: encloses x(t) for t in [t_n, t_n + h]
  Box range;    // apriori intersected with an interpolation bound; used for tubes
  double h = 0.0;
  Box lte;      // truncation-error enclosure added to the RK update
};

struct TubeSegment {
  double t_lo = 0.0;
  double t_hi = 0.0;
  Box box;
};

struct TubeResult {
  std::vector<TubeSegment> segments;
  Box endpoint;
};

/// Box E with x0 + [0,h] f(E, [d]) contained in E. Throws EnclosureFailure
/// when no such box is certified within opts.max_inflations widenings.
Box picard_enclosure(const SwitchedSystem& sys, int mode, const Box& x0, double h,
                     const IntegratorOptions& opts = {});

/// Re-checks the Picard self-mapping of a claimed enclosure.
bool picard_witness(const SwitchedSystem& sys, int mode, const Box& x0, double h, const Box& enclosure);

/// One validated Runge-Kutta step of size h. Throws EnclosureFailure, or
/// StepTooWide when the truncation-error box is wider than opts.lte_tol.
StepResult validated_step(const SwitchedSystem& sys, int mode, const Box& xn, double h,
                          const IntegratorOptions& opts = {});

/// Adaptive validated integration of one mode over [0, duration].
/// Throws IntegrationFailure when a step fails at the minimum step size.
TubeResult integrate_mode(const SwitchedSystem& sys, int mode, const Box& x0, double duration,
                          const IntegratorOptions& opts = {});

/// Successor set of X under the pattern (one sampling period per mode).
Box post(const SwitchedSystem& sys, const Box& x, const Pattern& pi, const IntegratorOptions& opts = {});

/// All segments covering the trajectories from X under the pattern.
TubeResult tube(const SwitchedSystem& sys, const Box& x, const Pattern& pi,
                const IntegratorOptions& opts = {});

/// `t_lo,t_hi,dim0_lo,dim0_hi,...`, a header line then one row per segment.
void write_tube_csv(std::ostream& out, const TubeResult& tube);

}  // namespace switchsynth
