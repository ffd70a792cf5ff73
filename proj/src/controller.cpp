#include "switchsynth/controller.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "switchsynth/errors.hpp"

namespace switchsynth {

using nlohmann::json;

void Controller::validate() const {
  if (cells.empty()) throw FormatError("controller has no cells");
  if (!(meta.tau > 0.0)) throw FormatError("controller tau must be positive");
  const std::size_t n = problem.R.dim();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].pat.empty()) throw FormatError("cell " + std::to_string(i) + " has an empty pattern");
    if (cells[i].box.dim() != n) throw FormatError("cell " + std::to_string(i) + " has the wrong dimension");
    for (int m : cells[i].pat.modes)
      if (m < 1) throw FormatError("cell " + std::to_string(i) + " has a mode index below 1");
  }
  if (problem.target.dim() != n || problem.S.dim() != n || (problem.B && problem.B->dim() != n))
    throw FormatError("problem boxes have inconsistent dimensions");
}

IntegratorOptions Controller::integrator_options() const {
  IntegratorOptions o;
  o.scheme = &ButcherScheme::by_name(meta.scheme);
  o.lte_tol = meta.lte_tol;
  return o;
}

Controller make_controller(const Decomposition& dec, const SwitchedSystem& sys, const IntegratorOptions& opts) {
  Controller c;
  c.cells = dec.cells;
  c.problem = dec.problem;
  c.meta.system = sys.name();
  c.meta.tau = sys.tau();
  c.meta.K = dec.problem.K;
  c.meta.D = dec.problem.D;
  c.meta.scheme = opts.scheme->name;
  c.meta.lte_tol = opts.lte_tol;
  c.validate();
  return c;
}

const Pattern& lookup(const Controller& ctl, std::span<const double> x) {
  for (const auto& cell : ctl.cells)
    if (cell.box.contains(x)) return cell.pat;
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ", ";
    s += format_double(x[i]);
  }
  throw OutsideDomain("no controller cell contains x = " + s + ")");
}

namespace {

json box_to_json(const Box& b) {
  json a = json::array();
  for (const auto& iv : b) a.push_back(json::array({iv.lo(), iv.hi()}));
  return a;
}

Box box_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw FormatError(std::string(what) + " must be a non-empty array of [lo,hi] pairs");
  std::vector<Interval> dims;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw FormatError(std::string(what) + " has a malformed interval");
    const double lo = p[0].get<double>();
    const double hi = p[1].get<double>();
    if (!(lo <= hi)) throw FormatError(std::string(what) + " has an interval with lo > hi");
    dims.emplace_back(lo, hi);
  }
  return Box(std::move(dims));
}

int major_of(std::string_view version) {
  int major = -1;
  auto [ptr, ec] = std::from_chars(version.data(), version.data() + version.size(), major);
  if (ec != std::errc()) throw FormatError("malformed format version '" + std::string(version) + "'");
  return major;
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string to_json(const Controller& ctl) {
  json cells = json::array();
  for (const auto& c : ctl.cells) cells.push_back(json{{"box", box_to_json(c.box)}, {"pattern", c.pat.modes}});
  json problem{{"R", box_to_json(ctl.problem.R)},
               {"S", box_to_json(ctl.problem.S)},
               {"target", box_to_json(ctl.problem.target)},
               {"B", ctl.problem.B ? box_to_json(*ctl.problem.B) : json(nullptr)}};
  json meta{{"system", ctl.meta.system}, {"tau", ctl.meta.tau},         {"K", ctl.meta.K},
            {"D", ctl.meta.D},           {"scheme", ctl.meta.scheme},   {"lte_tol", ctl.meta.lte_tol},
            {"toolkit_version", ctl.meta.toolkit_version}};
  json doc{{"format", "switchsynth-controller"},
           {"version", std::string(kControllerFormatVersion)},
           {"meta", meta},
           {"problem", problem},
           {"cells", cells}};
  return doc.dump(2) + "\n";
}

Controller controller_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("controller file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("controller file must hold a JSON object");
  if (field<std::string>(doc, "format") != "switchsynth-controller") throw FormatError("not a controller file");
  const auto version = field<std::string>(doc, "version");
  if (major_of(version) != major_of(kControllerFormatVersion))
    throw VersionMismatch("controller format " + version + " is not readable by format " +
                          std::string(kControllerFormatVersion));

  Controller c;
  const json& meta = doc.contains("meta") ? doc["meta"] : throw FormatError("missing field 'meta'");
  c.meta.system = field<std::string>(meta, "system");
  c.meta.tau = field<double>(meta, "tau");
  c.meta.K = field<int>(meta, "K");
  c.meta.D = field<int>(meta, "D");
  c.meta.scheme = field<std::string>(meta, "scheme");
  c.meta.lte_tol = field<double>(meta, "lte_tol");
  c.meta.toolkit_version = field<std::string>(meta, "toolkit_version");
  try {
    (void)ButcherScheme::by_name(c.meta.scheme);
  } catch (const DomainError& e) {
    throw FormatError(e.what());
  }

  const json& prob = doc.contains("problem") ? doc["problem"] : throw FormatError("missing field 'problem'");
  if (!prob.contains("R") || !prob.contains("S") || !prob.contains("target") || !prob.contains("B"))
    throw FormatError("problem needs R, S, target and B");
  c.problem.R = box_from_json(prob["R"], "R");
  c.problem.S = box_from_json(prob["S"], "S");
  c.problem.target = box_from_json(prob["target"], "target");
  if (!prob["B"].is_null()) c.problem.B = box_from_json(prob["B"], "B");
  c.problem.K = c.meta.K;
  c.problem.D = c.meta.D;

  const json& cells = doc.contains("cells") ? doc["cells"] : throw FormatError("missing field 'cells'");
  if (!cells.is_array()) throw FormatError("'cells' must be an array");
  for (const auto& cell : cells) {
    if (!cell.is_object() || !cell.contains("box") || !cell.contains("pattern"))
      throw FormatError("each cell needs 'box' and 'pattern'");
    Cell out;
    out.box = box_from_json(cell["box"], "cell box");
    out.pat.modes = field<std::vector<int>>(cell, "pattern");
    c.cells.push_back(std::move(out));
  }
  c.validate();
  return c;
}

void save_controller(const Controller& ctl, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write controller file '" + path + "'");
  out << to_json(ctl);
  if (!out) throw FormatError("error writing controller file '" + path + "'");
}

Controller load_controller(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open controller file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return controller_from_json(ss.str());
}

DisturbanceSampler uniform_disturbance(const SwitchedSystem& sys, std::mt19937_64& rng) {
  std::vector<std::uniform_real_distribution<double>> dists;
  for (const auto& iv : sys.dist_box()) dists.emplace_back(iv.lo(), iv.hi());
  return [dists = std::move(dists), &rng](std::span<double> d) mutable {
    for (std::size_t j = 0; j < dists.size(); ++j) d[j] = dists[j](rng);
  };
}

void reference_integrate(const SwitchedSystem& sys, int mode, std::span<double> x, double duration, int steps,
                         const DisturbanceSampler& sample,
                         const std::function<void(double t, std::span<const double> x)>& on_step) {
  sys.check_mode(mode);
  const std::size_t n = sys.state_dim();
  std::vector<double> d(sys.dist_dim(), 0.0);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), y(n);
  const double h = duration / steps;
  for (int s = 0; s < steps; ++s) {
    if (!d.empty()) sample(d);
    sys.eval_point(mode, x, d, k1);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * h * k1[i];
    sys.eval_point(mode, y, d, k2);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * h * k2[i];
    sys.eval_point(mode, y, d, k3);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + h * k3[i];
    sys.eval_point(mode, y, d, k4);
    for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (on_step) on_step((s + 1 == steps) ? duration : (s + 1) * h, x);
  }
}

Trace simulate_closed_loop(const SwitchedSystem& sys, std::span<const Controller> controllers,
                           std::span<const double> x0, const SimulationOptions& opts) {
  if (controllers.empty()) throw DomainError("simulation needs at least one controller");
  if (x0.size() != sys.state_dim()) throw DimensionMismatch("initial state has the wrong dimension");
  if (opts.steps_per_period < 1) throw DomainError("steps_per_period must be positive");
  std::mt19937_64 rng(opts.seed);
  const DisturbanceSampler sample = uniform_disturbance(sys, rng);

  Trace trace;
  std::vector<double> x(x0.begin(), x0.end());
  double t = 0.0;
  trace.points.push_back({t, x, 0});
  trace.boundary_states.push_back(x);
  for (int k = 0; k < opts.n_patterns; ++k) {
    const Controller& ctl = controllers[static_cast<std::size_t>(k) % controllers.size()];
    const Pattern& pat = lookup(ctl, x);
    trace.patterns.push_back(pat);
    for (int mode : pat.modes) {
      trace.points.back().mode = mode;
      const double t0 = t;
      reference_integrate(sys, mode, x, sys.tau(), opts.steps_per_period, sample,
                          [&](double s, std::span<const double> y) {
                            trace.points.push_back({t0 + s, std::vector<double>(y.begin(), y.end()), mode});
                          });
      t = t0 + sys.tau();
      trace.points.back().t = t;
    }
    trace.points.back().mode = 0;
    trace.boundary_states.push_back(x);
    if (!ctl.problem.target.contains(x)) {
      std::string s;
      for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + format_double(x[i]);
      throw OutsideDomain("at t = " + format_double(t) + " the state (" + s + ") left the target " +
                          to_string(ctl.problem.target));
    }
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  const std::size_t n = trace.points.empty() ? 0 : trace.points.front().x.size();
  out << 't';
  for (std::size_t i = 0; i < n; ++i) out << ",x" << (i + 1);
  out << ",mode\n";
  for (const auto& p : trace.points) {
    out << format_double(p.t);
    for (double v : p.x) out << ',' << format_double(v);
    out << ',' << p.mode << '\n';
  }
}

}  // namespace switchsynth
