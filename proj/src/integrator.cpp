#include "vcflock/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "dopri5.hpp"
#include "vcflock/error.hpp"

namespace vcflock {

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (!(dt_min > 0.0) || !(dt_min <= dt_init) || !(dt_init <= dt_max)) {
    throw ConfigError("step sizes must satisfy 0 < dt_min <= dt_init <= dt_max");
  }
  if (!(gap_safety > 0.0) || gap_safety > 1.0) throw ConfigError("gap_safety must lie in (0, 1]");
  if (!(gap_threshold >= 0.0)) throw ConfigError("gap_threshold must be >= 0");
  if (!std::isfinite(t_end)) throw ConfigError("t_end must be finite");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
}

namespace {

constexpr double kEventTimeTol = 1e-10;

// Watches pairwise gaps over each accepted step using the Hermite dense output.
class GapMonitor {
 public:
  GapMonitor(int n, int dim, const IntegratorConfig& cfg) : n_(n), d_(dim), cfg_(cfg) {}

  void scan(const detail::Dopri5& s, std::vector<EventRecord>& out) const {
    const double t0 = s.t_prev();
    const double t1 = s.t();
    if (!(t1 > t0)) return;
    const auto& y0 = s.y_prev();
    const auto& y1 = s.y();
    const auto& f0 = s.f_prev();
    const auto& f1 = s.f();
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        if (cfg_.detect_gap_minima) {
          const double a = rate(y0, f0, i, j);
          const double b = rate(y1, f1, i, j);
          if (a < -noise(y0, f0, i, j) && b > noise(y1, f1, i, j)) {
            const double tm = bisect([&](double t) { return dense_rate(s, i, j, t); }, t0, t1);
            out.push_back({tm, EventKind::GapMinimum, i, j, dense_gap(s, i, j, tm)});
            if (cfg_.gap_threshold > 0.0 && out.back().gap < cfg_.gap_threshold &&
                gap(y0, i, j) >= cfg_.gap_threshold && gap(y1, i, j) >= cfg_.gap_threshold) {
              record_threshold(s, i, j, t0, tm, out);
            }
          }
        }
        if (cfg_.gap_threshold > 0.0 && gap(y0, i, j) >= cfg_.gap_threshold &&
            gap(y1, i, j) < cfg_.gap_threshold) {
          record_threshold(s, i, j, t0, t1, out);
        }
      }
    }
  }

 private:
  double gap(const std::vector<double>& y, int i, int j) const {
    double r2 = 0.0;
    for (int c = 0; c < d_; ++c) {
      const double diff = y[j * d_ + c] - y[i * d_ + c];
      r2 += diff * diff;
    }
    return std::sqrt(r2);
  }
  // (q_j - q_i) . (v_j - v_i), half the derivative of the squared gap.
  double rate(const std::vector<double>& y, const std::vector<double>& f, int i, int j) const {
    double s = 0.0;
    for (int c = 0; c < d_; ++c) s += (y[j * d_ + c] - y[i * d_ + c]) * (f[j * d_ + c] - f[i * d_ + c]);
    return s;
  }
  double noise(const std::vector<double>& y, const std::vector<double>& f, int i, int j) const {
    double vi = 0.0;
    double vj = 0.0;
    for (int c = 0; c < d_; ++c) {
      vi += f[i * d_ + c] * f[i * d_ + c];
      vj += f[j * d_ + c] * f[j * d_ + c];
    }
    double scale = 0.0;
    for (int c = 0; c < d_; ++c) scale = std::max({scale, std::abs(y[i * d_ + c]), std::abs(y[j * d_ + c])});
    return 1e-12 * std::max(gap(y, i, j), 1e-300 + 1e-12 * scale) * (std::sqrt(vi) + std::sqrt(vj));
  }
  double dense_gap(const detail::Dopri5& s, int i, int j, double t) const {
    double r2 = 0.0;
    for (int c = 0; c < d_; ++c) {
      const double diff = s.dense(j * d_ + c, t) - s.dense(i * d_ + c, t);
      r2 += diff * diff;
    }
    return std::sqrt(r2);
  }
  double dense_rate(const detail::Dopri5& s, int i, int j, double t) const {
    double r = 0.0;
    for (int c = 0; c < d_; ++c) {
      const double dq = s.dense(j * d_ + c, t) - s.dense(i * d_ + c, t);
      const double dv = s.dense_slope(j * d_ + c, t) - s.dense_slope(i * d_ + c, t);
      r += dq * dv;
    }
    return r;
  }
  void record_threshold(const detail::Dopri5& s, int i, int j, double a, double b,
                        std::vector<EventRecord>& out) const {
    const double thr = cfg_.gap_threshold;
    const double tc = bisect([&](double t) { return thr - dense_gap(s, i, j, t); }, a, b);
    out.push_back({tc, EventKind::GapBelowThreshold, i, j, dense_gap(s, i, j, tc)});
  }
  // Root of f on [a, b] with f(a) < 0 < f(b) (sign pattern assumed, not checked).
  template <class F>
  static double bisect(F f, double a, double b) {
    for (int it = 0; it < 200 && b - a > kEventTimeTol; ++it) {
      const double m = 0.5 * (a + b);
      if (f(m) < 0.0) {
        a = m;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  }

  int n_;
  int d_;
  const IntegratorConfig& cfg_;
};

State state_from(const std::vector<double>& y, int n, int d, double t) {
  State s(n, d, t);
  const size_t nd = static_cast<size_t>(n) * d;
  std::copy(y.begin(), y.begin() + nd, s.q.begin());
  std::copy(y.begin() + nd, y.end(), s.p.begin());
  return s;
}

}  // namespace

Trajectory integrate(const State& state0, const Kernel& kernel, const VelocityControl& g,
                     const Params& params, const IntegratorConfig& cfg) {
  params.validate();
  cfg.validate();
  state0.validate(params);
  const KernelClass cls = kernel.kernel_class();
  if (cls == KernelClass::TypeII && params.dim >= 2) {
    throw OutOfScope("out of scope: weak solutions in d≥2");
  }
  if (!(cfg.t_end > state0.t)) throw ConfigError("t_end must exceed the initial time");

  const int n = params.n_agents;
  const int d = params.dim;
  const size_t nd = static_cast<size_t>(n) * d;

  RhsEvaluator eval(kernel, g, params);
  detail::Dopri5 solver([&](double, const double* y, double* f) { eval(y, y + nd, f, f + nd); },
                        2 * nd, {cfg.rel_tol, cfg.abs_tol, cfg.dt_min, cfg.dt_max});
  std::vector<double> y0(2 * nd);
  std::copy(state0.q.begin(), state0.q.end(), y0.begin());
  std::copy(state0.p.begin(), state0.p.end(), y0.begin() + nd);
  solver.reset(state0.t, y0, cfg.dt_init);

  // Strongly singular kernels: no pair can close faster than 2 M_G' P0_M.
  double closing_speed = 0.0;
  if (cls == KernelClass::TypeIII) {
    const GBounds gb = g.bounds(max_speed(state0));
    closing_speed = 2.0 * gb.M_gprime * gb.p0_max;
  }

  Trajectory traj;
  traj.n = n;
  traj.dim = d;
  const auto store = [&]() {
    traj.snapshots.push_back(state_from(solver.y(), n, d, solver.t()));
    traj.velocity.emplace_back(solver.f().begin(), solver.f().begin() + nd);
    if (cfg.store_force) traj.force.emplace_back(solver.f().begin() + nd, solver.f().end());
  };
  store();

  const GapMonitor monitor(n, d, cfg);
  const auto abort = [&](const std::string& why, double dt) {
    const State here = state_from(solver.y(), n, d, solver.t());
    if (traj.snapshots.back().t < here.t) store();
    const ClosestPair cp = closest_pair(here);
    traj.events.push_back({here.t, EventKind::StepFloorHit, cp.i, cp.j, cp.gap});
    auto partial = std::make_shared<const Trajectory>(std::move(traj));
    throw StepFloorHit(why, here.t, dt, cp.i, cp.j, partial);
  };

  long steps = 0;
  const double t_end = cfg.t_end;
  while (solver.t() < t_end) {
    double h_limit = t_end - solver.t();
    if (closing_speed > 0.0) {
      const State here = state_from(solver.y(), n, d, solver.t());
      const double ceiling = cfg.gap_safety * min_pair_gap(here) / closing_speed;
      if (ceiling < cfg.dt_min) abort("gap-limited step fell below dt_min", ceiling);
      h_limit = std::min(h_limit, ceiling);
    }
    if (solver.step(h_limit) == detail::Dopri5::Outcome::FloorHit) {
      abort("step size fell below dt_min without meeting tolerance", solver.h_next());
    }
    if (t_end - solver.t() <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(t_end)) {
      solver.snap_time(t_end);
    }
    monitor.scan(solver, traj.events);
    ++steps;
    if (steps % cfg.stride == 0 || solver.t() >= t_end) store();
    if (steps >= cfg.max_steps && solver.t() < t_end) abort("step budget exhausted", solver.last_h());
  }
  std::stable_sort(traj.events.begin(), traj.events.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.time < b.time; });
  return traj;
}

std::vector<std::pair<double, double>> min_gap_trace(const Trajectory& traj) {
  std::vector<std::pair<double, double>> out;
  out.reserve(traj.snapshots.size());
  for (const auto& s : traj.snapshots) out.emplace_back(s.t, min_pair_gap(s));
  for (const auto& e : traj.events) {
    if (e.kind != EventKind::GapMinimum) continue;
    out.emplace_back(e.time, std::min(e.gap, min_pair_gap(traj.at(e.time))));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

}  // namespace vcflock
