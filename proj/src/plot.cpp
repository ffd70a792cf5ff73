#include "switchsynth/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

namespace switchsynth {

PlotRegions plot_regions(const SynthesisProblem& prob) {
  PlotRegions r{prob.R, prob.S, std::nullopt, prob.B};
  if (!(prob.target.dim() == prob.R.dim() && subset(prob.target, prob.R) && subset(prob.R, prob.target)))
    r.target = prob.target;
  return r;
}

namespace {

constexpr double kPanelW = 640, kPanelH = 180, kPhase = 420, kMargin = 56, kGap = 36;
const char* const kModeColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  // Two decimals is plenty for pixel coordinates and keeps output stable.
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const char* mode_color(int mode) {
  return kModeColors[static_cast<std::size_t>(std::max(mode - 1, 0)) % std::size(kModeColors)];
}

struct Axis {
  double lo, hi;
  Axis(double a, double b) : lo(a), hi(b) {
    if (!(hi > lo)) {
      const double pad = std::max(std::abs(lo) * 0.05, 1e-3);
      lo -= pad;
      hi += pad;
    } else {
      const double pad = (hi - lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
  double map(double v, double p0, double p1) const { return p0 + (v - lo) / (hi - lo) * (p1 - p0); }
};

void ticks(std::ostream& out, const Axis& ax, bool horizontal, double fixed, double p0, double p1) {
  for (int i = 0; i <= 4; ++i) {
    const double v = ax.lo + (ax.hi - ax.lo) * i / 4;
    const double p = ax.map(v, p0, p1);
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", v);
    if (horizontal)
      out << "<text x=\"" << num(p) << "\" y=\"" << num(fixed + 16) << "\" text-anchor=\"middle\">" << label
          << "</text>\n";
    else
      out << "<text x=\"" << num(fixed - 6) << "\" y=\"" << num(p + 4) << "\" text-anchor=\"end\">" << label
          << "</text>\n";
  }
}

void rect(std::ostream& out, const Box& b, const Axis& ax, const Axis& ay, double x0, double y0, double w, double h,
          const char* stroke, const char* fill, const char* label) {
  const double xa = ax.map(b[0].lo(), x0, x0 + w), xb = ax.map(b[0].hi(), x0, x0 + w);
  const double ya = ay.map(b[1].hi(), y0 + h, y0), yb = ay.map(b[1].lo(), y0 + h, y0);
  out << "<rect x=\"" << num(xa) << "\" y=\"" << num(ya) << "\" width=\"" << num(xb - xa) << "\" height=\""
      << num(yb - ya) << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  out << "<text x=\"" << num(xa + 4) << "\" y=\"" << num(ya + 14) << "\" fill=\"" << stroke << "\">" << label
      << "</text>\n";
}

// Polyline segments grouped by the mode active on them.
void polylines(std::ostream& out, const Trace& trace, const std::function<std::pair<double, double>(const TracePoint&)>& at) {
  const auto& pts = trace.points;
  std::size_t i = 0;
  while (i + 1 < pts.size()) {
    const int mode = pts[i].mode;
    std::size_t j = i + 1;
    while (j + 1 < pts.size() && pts[j].mode == mode) ++j;
    out << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << mode_color(mode) << "\" points=\"";
    for (std::size_t k = i; k <= j; ++k) {
      const auto [px, py] = at(pts[k]);
      out << num(px) << ',' << num(py) << ' ';
    }
    out << "\"/>\n";
    i = j;
  }
}

}  // namespace

void write_trace_svg(std::ostream& out, const Trace& trace, const PlotRegions& regions) {
  const std::size_t n = trace.points.empty() ? 0 : trace.points.front().x.size();
  const bool phase = n == 2;
  const double width = kMargin + kPanelW + (phase ? kGap + kMargin + kPhase : 0) + 20;
  const double series_h = static_cast<double>(n) * (kPanelH + kGap) + kMargin;
  const double height = std::max(series_h, phase ? kPhase + 2 * kMargin : 0.0);
  const double t_end = trace.points.empty() ? 1.0 : trace.points.back().t;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const Axis at(0.0, t_end);
  for (std::size_t k = 0; k < n; ++k) {
    double lo = regions.S[k].lo(), hi = regions.S[k].hi();
    for (const auto& p : trace.points) {
      lo = std::min(lo, p.x[k]);
      hi = std::max(hi, p.x[k]);
    }
    const Axis ay(lo, hi);
    const double x0 = kMargin, y0 = 20 + static_cast<double>(k) * (kPanelH + kGap);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(kPanelW) << "\" height=\""
        << num(kPanelH) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    // R band for orientation.
    const double ra = ay.map(regions.R[k].hi(), y0 + kPanelH, y0), rb = ay.map(regions.R[k].lo(), y0 + kPanelH, y0);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(ra) << "\" width=\"" << num(kPanelW) << "\" height=\""
        << num(rb - ra) << "\" fill=\"#2ca02c\" fill-opacity=\"0.08\"/>\n";
    ticks(out, at, true, y0 + kPanelH, x0, x0 + kPanelW);
    ticks(out, ay, false, x0, y0 + kPanelH, y0);
    out << "<text x=\"" << num(x0 + kPanelW / 2) << "\" y=\"" << num(y0 - 6) << "\" text-anchor=\"middle\">x"
        << k + 1 << "(t)</text>\n";
    polylines(out, trace, [&](const TracePoint& p) {
      return std::pair{at.map(p.t, x0, x0 + kPanelW), ay.map(p.x[k], y0 + kPanelH, y0)};
    });
  }

  if (phase) {
    const double x0 = kMargin + kPanelW + kGap + kMargin, y0 = 20;
    const Axis ax(regions.S[0].lo(), regions.S[0].hi());
    const Axis ay(regions.S[1].lo(), regions.S[1].hi());
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(kPhase) << "\" height=\""
        << num(kPhase) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    rect(out, regions.S, ax, ay, x0, y0, kPhase, kPhase, "#555", "none", "S");
    rect(out, regions.R, ax, ay, x0, y0, kPhase, kPhase, "#2ca02c", "#2ca02c22", "R");
    if (regions.target) rect(out, *regions.target, ax, ay, x0, y0, kPhase, kPhase, "#1f77b4", "#1f77b422", "target");
    if (regions.B) rect(out, *regions.B, ax, ay, x0, y0, kPhase, kPhase, "#d62728", "#d6272844", "B");
    ticks(out, ax, true, y0 + kPhase, x0, x0 + kPhase);
    ticks(out, ay, false, x0, y0 + kPhase, y0);
    out << "<text x=\"" << num(x0 + kPhase / 2) << "\" y=\"" << num(y0 + kPhase + 32)
        << "\" text-anchor=\"middle\">x1</text>\n";
    out << "<text x=\"" << num(x0 - 40) << "\" y=\"" << num(y0 + kPhase / 2) << "\">x2</text>\n";
    polylines(out, trace, [&](const TracePoint& p) {
      return std::pair{ax.map(p.x[0], x0, x0 + kPhase), ay.map(p.x[1], y0 + kPhase, y0)};
    });
    for (const auto& b : trace.boundary_states)
      out << "<circle cx=\"" << num(ax.map(b[0], x0, x0 + kPhase)) << "\" cy=\"" << num(ay.map(b[1], y0 + kPhase, y0))
          << "\" r=\"2\" fill=\"black\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace switchsynth
