#include "switchsynth/integrator.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include "switchsynth/errors.hpp"

namespace switchsynth {

namespace {

Interval ratio(double p, double q) { return Interval(p) / Interval(q); }

ButcherScheme make_scheme(std::string name, int order, std::vector<std::vector<Interval>> a,
                          std::vector<Interval> b) {
  ButcherScheme s;
  s.name = std::move(name);
  s.stages = static_cast<int>(b.size());
  s.order = order;
  s.a.assign(static_cast<std::size_t>(s.stages * s.stages), Interval(0.0));
  s.c.assign(b.size(), Interval(0.0));
  for (int i = 0; i < s.stages; ++i) {
    Interval ci(0.0);
    for (int j = 0; j < i; ++j) {
      s.a[static_cast<std::size_t>(i * s.stages + j)] = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      ci += a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    s.c[static_cast<std::size_t>(i)] = ci;
  }
  s.b = std::move(b);
  return s;
}

}  // namespace

const ButcherScheme& ButcherScheme::euler() {
  static const ButcherScheme s = make_scheme("euler", 1, {{}}, {Interval(1.0)});
  return s;
}

const ButcherScheme& ButcherScheme::heun() {
  static const ButcherScheme s =
      make_scheme("heun", 2, {{}, {Interval(1.0)}}, {Interval(0.5), Interval(0.5)});
  return s;
}

const ButcherScheme& ButcherScheme::rk4() {
  static const ButcherScheme s = make_scheme(
      "rk4", 4, {{}, {Interval(0.5)}, {Interval(0.0), Interval(0.5)}, {Interval(0.0), Interval(0.0), Interval(1.0)}},
      {ratio(1, 6), ratio(1, 3), ratio(1, 3), ratio(1, 6)});
  return s;
}

const ButcherScheme& ButcherScheme::by_name(const std::string& name) {
  if (name == "euler") return euler();
  if (name == "heun") return heun();
  if (name == "rk4") return rk4();
  throw DomainError("unknown Runge-Kutta scheme '" + name + "' (expected euler, heun or rk4)");
}

namespace {

/// Workspace for validated steps of one mode.
class StepEngine {
public:
  StepEngine(const SwitchedSystem& sys, int mode, const IntegratorOptions& opts)
      : sys_(sys),
        mode_(mode),
        opts_(opts),
        scheme_(*opts.scheme),
        tape_(sys.tape(mode)),
        n_(sys.state_dim()),
        m_(sys.dist_dim()),
        s_(static_cast<std::size_t>(scheme_.stages)),
        p_(scheme_.order),
        stride_(static_cast<std::size_t>(p_) + 2),
        taylor_(sys, mode, p_ + 1),
        slots_(n_ + m_),
        work_(tape_.size()),
        grad_(tape_.size() * n_),
        slot_grad_((n_ + m_) * n_, Interval(0.0)),
        stage_y_(s_ * n_),
        stage_k_(s_ * n_),
        stage_dk_(s_ * n_ * n_),
        series_slots_((n_ + m_) * stride_),
        series_nodes_(tape_.size() * stride_),
        series_k_(s_ * n_ * stride_) {
    for (std::size_t j = 0; j < m_; ++j) slots_[n_ + j] = sys.dist_box()[j];
  }

  void rhs(std::span<const Interval> x, std::span<Interval> out) {
    std::copy(x.begin(), x.end(), slots_.begin());
    tape_.eval(slots_, work_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = work_[static_cast<std::size_t>(tape_.output(i))];
  }

  // x0 + [0,h] f(e, [d])
  Box picard_image(const Box& x0, const Box& e, double h) {
    Box f(n_);
    rhs(e.span(), f.span());
    const Interval span(0.0, h);
    Box img(n_);
    for (std::size_t i = 0; i < n_; ++i) img[i] = x0[i] + span * f[i];
    return img;
  }

  Box picard(const Box& x0, double h) {
    try {
      Box e = inflate(x0, opts_.seed_fraction, opts_.seed_abs);
      for (int attempt = 0; attempt <= opts_.max_inflations; ++attempt) {
        Box img = picard_image(x0, e, h);
        if (!img.all_finite()) break;
        if (subset(img, e)) {
          // Any self-mapped box will do; keep tightening while that holds.
          for (int refine = 0; refine < 3; ++refine) {
            Box next = picard_image(x0, img, h);
            if (!subset(next, img)) break;
            e = img;
            img = std::move(next);
          }
          if (subset(picard_image(x0, img, h), img)) return img;
          return e;
        }
        e = inflate(hull(e, img), opts_.inflation_factor - 1.0, opts_.inflation_abs);
      }
    } catch (const DivisionByZeroInterval& ex) {
      throw EnclosureFailure(std::string("a priori enclosure: ") + ex.what());
    } catch (const DomainError& ex) {
      throw EnclosureFailure(std::string("a priori enclosure: ") + ex.what());
    }
    throw EnclosureFailure("no a priori enclosure certified for h = " + format_double(h));
  }

  StepResult step(const Box& xn, double h) {
    try {
      return step_unchecked(xn, h);
    } catch (const DivisionByZeroInterval& ex) {
      throw EnclosureFailure(std::string("validated step: ") + ex.what());
    } catch (const DomainError& ex) {
      throw EnclosureFailure(std::string("validated step: ") + ex.what());
    }
  }

private:
  Interval& y(std::size_t i, std::size_t c) { return stage_y_[i * n_ + c]; }
  Interval& k(std::size_t i, std::size_t c) { return stage_k_[i * n_ + c]; }
  Interval& dk(std::size_t i, std::size_t r, std::size_t c) { return stage_dk_[(i * n_ + r) * n_ + c]; }
  Interval& kser(std::size_t i, std::size_t c, std::size_t ord) { return series_k_[(i * n_ + c) * stride_ + ord]; }

  // Runge-Kutta update x + h sum b_i k_i over a box; stage arguments and
  // stage values stay in stage_y_ / stage_k_.
  Box rk_update(const Box& x, const Interval& hh) {
    for (std::size_t i = 0; i < s_; ++i) {
      for (std::size_t c = 0; c < n_; ++c) {
        Interval acc(0.0);
        for (std::size_t j = 0; j < i; ++j) acc += scheme_.coef(static_cast<int>(i), static_cast<int>(j)) * k(j, c);
        y(i, c) = i == 0 ? x[c] : x[c] + hh * acc;
      }
      rhs(std::span<const Interval>(&stage_y_[i * n_], n_), std::span<Interval>(&stage_k_[i * n_], n_));
    }
    Box out(n_);
    for (std::size_t c = 0; c < n_; ++c) {
      Interval acc(0.0);
      for (std::size_t i = 0; i < s_; ++i) acc += scheme_.b[i] * k(i, c);
      out[c] = x[c] + hh * acc;
    }
    return out;
  }

  // Jacobian of the update map over the stage boxes currently in stage_y_.
  std::vector<Interval> rk_jacobian(const Interval& hh) {
    std::vector<Interval> dy(n_ * n_);
    for (std::size_t i = 0; i < s_; ++i) {
      for (std::size_t r = 0; r < n_; ++r)
        for (std::size_t c = 0; c < n_; ++c) {
          Interval acc(0.0);
          for (std::size_t j = 0; j < i; ++j)
            acc += scheme_.coef(static_cast<int>(i), static_cast<int>(j)) * dk(j, r, c);
          dy[r * n_ + c] = Interval(r == c ? 1.0 : 0.0) + hh * acc;
        }
      for (std::size_t r = 0; r < n_; ++r) {
        slots_[r] = y(i, r);
        for (std::size_t c = 0; c < n_; ++c) slot_grad_[r * n_ + c] = dy[r * n_ + c];
      }
      tape_.eval_jacobian(slots_, slot_grad_, n_, work_, grad_);
      for (std::size_t r = 0; r < n_; ++r) {
        const auto o = static_cast<std::size_t>(tape_.output(r));
        for (std::size_t c = 0; c < n_; ++c) dk(i, r, c) = grad_[o * n_ + c];
      }
    }
    std::vector<Interval> jac(n_ * n_);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t c = 0; c < n_; ++c) {
        Interval acc(0.0);
        for (std::size_t i = 0; i < s_; ++i) acc += scheme_.b[i] * dk(i, r, c);
        jac[r * n_ + c] = Interval(r == c ? 1.0 : 0.0) + hh * acc;
      }
    return jac;
  }

  // h^(p+1) (x_[p+1] over the a priori box - phi_[p+1] over eta in [0,h]),
  // where phi(s) = x + s sum b_i k_i(s) is the update as a function of the step.
  Box truncation_error(const Box& xn, const Box& apriori, double h) {
    const std::size_t top = static_cast<std::size_t>(p_) + 1;
    taylor_.expand(apriori.span(), sys_.dist_box().span(), p_ + 1);
    const Interval hp = pow(Interval(h), p_ + 1);

    // width(hp * (a - b)) >= hp.lo * width(a): reject before the costly part.
    for (std::size_t c = 0; c < n_; ++c) {
      const Interval& top_coef = taylor_.state(c, p_ + 1);
      const double lower = rounding::mul_down(hp.lo(), rounding::sub_down(top_coef.hi(), top_coef.lo()));
      if (lower > opts_.lte_tol) throw too_wide(lower);
    }

    const Interval s0(0.0, h);
    const Interval zero(0.0);
    for (std::size_t j = 0; j < m_; ++j) {
      series_slots_[(n_ + j) * stride_] = sys_.dist_box()[j];
      for (std::size_t ord = 1; ord < stride_; ++ord) series_slots_[(n_ + j) * stride_ + ord] = zero;
    }
    for (std::size_t i = 0; i < s_; ++i) {
      for (std::size_t ord = 0; ord <= top; ++ord) {
        for (std::size_t c = 0; c < n_; ++c) {
          // Coefficients of a(eps) = sum_j a_ij k_j(s0 + eps); y = x + (s0 + eps) a(eps).
          Interval a_ord(0.0);
          Interval a_prev(0.0);
          for (std::size_t j = 0; j < i; ++j) {
            const Interval& aij = scheme_.coef(static_cast<int>(i), static_cast<int>(j));
            a_ord += aij * kser(j, c, ord);
            if (ord > 0) a_prev += aij * kser(j, c, ord - 1);
          }
          Interval yc = s0 * a_ord + a_prev;
          if (ord == 0) yc = xn[c] + yc;
          series_slots_[c * stride_ + ord] = yc;
        }
        tape_.taylor_coefficient(static_cast<int>(ord), series_slots_, series_nodes_, stride_);
        for (std::size_t c = 0; c < n_; ++c)
          kser(i, c, ord) = series_nodes_[static_cast<std::size_t>(tape_.output(c)) * stride_ + ord];
      }
    }
    Box lte(n_);
    for (std::size_t c = 0; c < n_; ++c) {
      Interval b_top(0.0);
      Interval b_prev(0.0);
      for (std::size_t i = 0; i < s_; ++i) {
        b_top += scheme_.b[i] * kser(i, c, top);
        b_prev += scheme_.b[i] * kser(i, c, top - 1);
      }
      const Interval phi_top = s0 * b_top + b_prev;
      lte[c] = hp * (taylor_.state(c, p_ + 1) - phi_top);
    }
    return lte;
  }

  StepTooWide too_wide(double width) const {
    return StepTooWide("truncation error width " + format_double(width) + " exceeds " + format_double(opts_.lte_tol));
  }

  StepResult step_unchecked(const Box& xn, double h) {
    StepResult r;
    r.h = h;
    r.apriori = picard(xn, h);
    const Interval hh(h);

    r.lte = truncation_error(xn, r.apriori, h);
    for (std::size_t c = 0; c < n_; ++c)
      if (!(r.lte[c].width() <= opts_.lte_tol)) throw too_wide(r.lte[c].width());

    Box naive = rk_update(xn, hh);
    std::vector<Interval> jac = rk_jacobian(hh);
    const std::vector<double> mid = xn.midpoint();
    Box centre = rk_update(Box::point(mid), hh);
    Box phi(n_);
    for (std::size_t c = 0; c < n_; ++c) {
      Interval mv = centre[c];
      for (std::size_t j = 0; j < n_; ++j) mv += jac[c * n_ + j] * (xn[j] - Interval(mid[j]));
      const Interval both = intersect(naive[c], mv);
      phi[c] = both.is_empty() ? naive[c] : both;
    }

    r.x_next = Box(n_);
    for (std::size_t c = 0; c < n_; ++c) {
      const Interval sum = phi[c] + r.lte[c];
      const Interval tight = intersect(sum, r.apriori[c]);
      r.x_next[c] = tight.is_empty() ? sum : tight;
    }
    if (!r.x_next.all_finite()) throw EnclosureFailure("non-finite step result");

    // Linear interpolation between the endpoints is off by -s(h-s)/2 x''(zeta)
    // with x'' = 2 x_[2] over the a priori box.
    const Interval bend = hull(Interval(0.0), pow(Interval(h), 2) / Interval(-4.0));
    r.range = Box(n_);
    for (std::size_t c = 0; c < n_; ++c) {
      const Interval chord = hull(xn[c], r.x_next[c]) + bend * taylor_.state(c, 2);
      const Interval tight = intersect(chord, r.apriori[c]);
      r.range[c] = tight.is_empty() ? r.apriori[c] : tight;
    }
    return r;
  }

  const SwitchedSystem& sys_;
  int mode_;
  const IntegratorOptions& opts_;
  const ButcherScheme& scheme_;
  const Tape& tape_;
  std::size_t n_, m_, s_;
  int p_;
  std::size_t stride_;
  OdeTaylor taylor_;
  std::vector<Interval> slots_, work_, grad_, slot_grad_;
  std::vector<Interval> stage_y_, stage_k_, stage_dk_;
  std::vector<Interval> series_slots_, series_nodes_, series_k_;
};

void check_inputs(const SwitchedSystem& sys, int mode, const Box& x0) {
  sys.check_mode(mode);
  if (x0.dim() != sys.state_dim())
    throw DimensionMismatch("initial box has dimension " + std::to_string(x0.dim()) + ", system has " +
                            std::to_string(sys.state_dim()));
  if (x0.is_empty()) throw DomainError("initial box is empty");
}

}  // namespace

Box picard_enclosure(const SwitchedSystem& sys, int mode, const Box& x0, double h,
                     const IntegratorOptions& opts) {
  check_inputs(sys, mode, x0);
  if (!(h > 0.0)) throw DomainError("step size must be positive");
  StepEngine engine(sys, mode, opts);
  return engine.picard(x0, h);
}

bool picard_witness(const SwitchedSystem& sys, int mode, const Box& x0, double h, const Box& enclosure) {
  const Box f = sys.eval(mode, enclosure, sys.dist_box());
  const Interval span(0.0, h);
  for (std::size_t i = 0; i < x0.dim(); ++i)
    if (!(x0[i] + span * f[i]).subset_of(enclosure[i])) return false;
  return true;
}

StepResult validated_step(const SwitchedSystem& sys, int mode, const Box& xn, double h,
                          const IntegratorOptions& opts) {
  check_inputs(sys, mode, xn);
  if (!(h > 0.0)) throw DomainError("step size must be positive");
  StepEngine engine(sys, mode, opts);
  return engine.step(xn, h);
}

TubeResult integrate_mode(const SwitchedSystem& sys, int mode, const Box& x0, double duration,
                          const IntegratorOptions& opts) {
  check_inputs(sys, mode, x0);
  if (!(duration > 0.0)) throw DomainError("integration duration must be positive");
  StepEngine engine(sys, mode, opts);
  const double h_min = duration * opts.h_min_fraction;

  TubeResult out;
  Box x = x0;
  double t = 0.0;
  double h = duration;
  while (t < duration) {
    const double remaining = duration - t;
    const bool last = h >= remaining * (1.0 - 1e-12);
    const double step = last ? remaining : h;
    StepResult r;
    try {
      r = engine.step(x, step);
    } catch (const EnclosureFailure& e) {
      if (step * 0.5 < h_min)
        throw IntegrationFailure("mode " + std::to_string(mode) + " at t = " + format_double(t) + ": " + e.what());
      h = step * 0.5;
      continue;
    } catch (const StepTooWide& e) {
      if (step * 0.5 < h_min)
        throw IntegrationFailure("mode " + std::to_string(mode) + " at t = " + format_double(t) + ": " + e.what());
      h = step * 0.5;
      continue;
    }
    if (!picard_witness(sys, mode, x, step, r.apriori))
      throw std::logic_error("accepted a priori enclosure fails the Picard inclusion");
    const double t_next = last ? duration : t + step;
    out.segments.push_back({t, t_next, r.range});
    x = std::move(r.x_next);
    t = t_next;
    double widest = 0.0;
    for (const auto& e : r.lte) widest = std::max(widest, e.width());
    h = widest < opts.lte_tol / 4.0 ? step * 2.0 : step;
  }
  out.endpoint = std::move(x);
  return out;
}

Box post(const SwitchedSystem& sys, const Box& x, const Pattern& pi, const IntegratorOptions& opts) {
  Box cur = x;
  for (int mode : pi.modes) cur = integrate_mode(sys, mode, cur, sys.tau(), opts).endpoint;
  return cur;
}

TubeResult tube(const SwitchedSystem& sys, const Box& x, const Pattern& pi, const IntegratorOptions& opts) {
  TubeResult out;
  if (pi.empty()) {
    out.segments.push_back({0.0, 0.0, x});
    out.endpoint = x;
    return out;
  }
  Box cur = x;
  for (std::size_t j = 0; j < pi.size(); ++j) {
    TubeResult part = integrate_mode(sys, pi.modes[j], cur, sys.tau(), opts);
    const double offset = static_cast<double>(j) * sys.tau();
    const double next_offset = static_cast<double>(j + 1) * sys.tau();
    for (std::size_t s = 0; s < part.segments.size(); ++s) {
      auto seg = std::move(part.segments[s]);
      seg.t_lo = s == 0 ? offset : out.segments.back().t_hi;
      seg.t_hi = s + 1 == part.segments.size() ? next_offset : offset + seg.t_hi;
      out.segments.push_back(std::move(seg));
    }
    cur = std::move(part.endpoint);
  }
  out.endpoint = std::move(cur);
  return out;
}

void write_tube_csv(std::ostream& out, const TubeResult& tube) {
  const std::size_t n = tube.endpoint.dim();
  out << "t_lo,t_hi";
  for (std::size_t i = 0; i < n; ++i) out << ",dim" << i << "_lo,dim" << i << "_hi";
  out << '\n';
  for (const auto& seg : tube.segments) {
    out << format_double(seg.t_lo) << ',' << format_double(seg.t_hi);
    for (const auto& iv : seg.box) out << ',' << format_double(iv.lo()) << ',' << format_double(iv.hi());
    out << '\n';
  }
}

}  // namespace switchsynth
