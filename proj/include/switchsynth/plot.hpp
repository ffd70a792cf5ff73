#pragma once

#include <iosfwd>
#include <optional>

#include "switchsynth/controller.hpp"
#include "switchsynth/interval.hpp"

namespace switchsynth {

struct PlotRegions {
  Box R;
  Box S;
  std::optional<Box> target;  // drawn only when it differs from R
  std::optional<Box> B;
};

PlotRegions plot_regions(const SynthesisProblem& prob);

/// Static SVG: one time-series panel per state variable and, for 2-D
/// systems, a phase portrait with the R/S/B rectangles.
void write_trace_svg(std::ostream& out, const Trace& trace, const PlotRegions& regions);

}  // namespace switchsynth
