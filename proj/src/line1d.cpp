#include "vcflock/line1d.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "dopri5.hpp"
#include "vcflock/error.hpp"

namespace vcflock {

namespace {

constexpr double kTieTol = 1e-9;
constexpr double kMergeTol = 1e-9;

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

bool gap_closed(double qa, double qb) {
  return std::abs(qa - qb) < kMergeTol * (1.0 + std::max(std::abs(qa), std::abs(qb)));
}

// Velocities of the reduced system. Agents sharing a position and nu get
// bit-identical velocities, which keeps merged clusters exactly together.
class LineRhs {
 public:
  explicit LineRhs(const LineSystem& sys) : sys_(sys) {}

  void operator()(const double* q, double* v) const {
    const int n = sys_.size();
    const double scale = sys_.kappa / n;
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int k = 0; k < n; ++k) {
        if (k != i) sum += sys_.kernel.antiderivative(q[k] - q[i]);
      }
      v[i] = sys_.g.apply_scalar(sys_.nu[i] + scale * sum);
      if (!std::isfinite(v[i])) throw NonFiniteState("line system velocity is not finite");
    }
  }

 private:
  const LineSystem& sys_;
};

std::vector<int> members(const LineSystem& sys, int label) {
  std::vector<int> out;
  for (int k = 0; k < sys.size(); ++k) {
    if (sys.cluster[k] == label) out.push_back(k);
  }
  return out;
}

// Time left until the clusters of agents a (above) and b (below) meet,
// holding all other agents fixed. With x = x1 u^(1/alpha) the integrand
// dt = dx / closing(x) is smooth in u.
double time_to_contact(const LineSystem& sys, const std::vector<double>& q, int a, int b) {
  const auto group_a = members(sys, sys.cluster[a]);
  const auto group_b = members(sys, sys.cluster[b]);
  const double sa = static_cast<double>(group_a.size());
  const double sb = static_cast<double>(group_b.size());
  const double x1 = q[a] - q[b];
  if (!(x1 > 0.0)) return 0.0;
  const double center = (sa * q[a] + sb * q[b]) / (sa + sb);
  const double alpha = sys.alpha();

  const LineRhs rhs(sys);
  std::vector<double> trial = q;
  std::vector<double> v(q.size());
  bool ok = true;
  const auto integrand = [&](double u) {
    const double x = x1 * std::pow(u, 1.0 / alpha);
    for (int k : group_a) trial[k] = center + x * sb / (sa + sb);
    for (int k : group_b) trial[k] = center - x * sa / (sa + sb);
    rhs(trial.data(), v.data());
    const double closing = v[b] - v[a];
    if (!(closing > 0.0)) {
      ok = false;
      return 0.0;
    }
    return x1 / alpha * std::pow(u, 1.0 / alpha - 1.0) / closing;
  };
  const double dt = boost::math::quadrature::gauss<double, 20>::integrate(integrand, 0.0, 1.0);
  return ok && std::isfinite(dt) ? dt : 0.0;
}

struct PendingMerge {
  double time;
  int i;
  int j;
};

}  // namespace

bool nu_tied(double a, double b) {
  return std::abs(a - b) < kTieTol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

double LineSystem::alpha() const {
  const auto a = kernel.alpha();
  if (!a || kernel.kernel_class() != KernelClass::TypeII) {
    throw DomainError("line reduction requires a power-law kernel with alpha in (0, 1)");
  }
  return *a;
}

std::vector<double> nu_from_initial(std::span<const double> q0, std::span<const double> p0,
                                    const Kernel& kernel, double kappa) {
  if (q0.size() != p0.size()) throw DomainError("q0 and p0 sizes differ");
  if (!(kappa >= 0.0)) throw DomainError("kappa must be >= 0");
  std::vector<double> nu(p0.begin(), p0.end());
  if (kappa == 0.0) return nu;
  const int n = static_cast<int>(q0.size());
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k != i) sum += kernel.antiderivative(q0[k] - q0[i]);
    }
    nu[i] = p0[i] - kappa / n * sum;
  }
  return nu;
}

std::vector<double> recover_momentum(const LineSystem& sys, std::span<const double> q) {
  const int n = sys.size();
  if (static_cast<int>(q.size()) != n) throw DomainError("snapshot size does not match system");
  std::vector<double> p(sys.nu);
  if (sys.kappa == 0.0) return p;
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k != i) sum += sys.kernel.antiderivative(q[k] - q[i]);
    }
    p[i] += sys.kappa / n * sum;
  }
  return p;
}

LineSystem LineSystem::from_initial(std::vector<double> q0, std::span<const double> p0,
                                    const Kernel& kernel, double kappa, const VelocityControl& g) {
  if (q0.empty()) throw DomainError("line system needs at least one agent");
  for (double x : q0) {
    if (!std::isfinite(x)) throw DomainError("non-finite initial position");
  }
  for (double x : p0) {
    if (!std::isfinite(x)) throw DomainError("non-finite initial momentum");
  }
  if (!(kappa > 0.0)) throw DomainError("kappa must be > 0");
  LineSystem sys;
  sys.kernel = kernel;
  sys.alpha();
  sys.kappa = kappa;
  sys.g = g;
  sys.nu = nu_from_initial(q0, p0, kernel, kappa);
  sys.q = std::move(q0);
  const int n = sys.size();

  // Snap nu ties: chain neighbours in sorted order onto the group's first value.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sys.nu[a] < sys.nu[b]; });
  for (int k = 1; k < n; ++k) {
    if (nu_tied(sys.nu[order[k - 1]], sys.nu[order[k]])) sys.nu[order[k]] = sys.nu[order[k - 1]];
  }

  sys.cluster.resize(n);
  std::iota(sys.cluster.begin(), sys.cluster.end(), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (sys.cluster[j] == j && sys.nu[i] == sys.nu[j] && gap_closed(sys.q[i], sys.q[j])) {
        sys.cluster[j] = sys.cluster[i];
        sys.q[j] = sys.q[i];
      }
    }
  }
  return sys;
}

std::vector<std::vector<PairOutcome>> predict_pairwise(std::span<const double> q0,
                                                       std::span<const double> nu) {
  if (q0.size() != nu.size()) throw DomainError("q0 and nu sizes differ");
  const size_t n = q0.size();
  std::vector<std::vector<PairOutcome>> out(n, std::vector<PairOutcome>(n, PairOutcome::Self));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const size_t hi = q0[i] >= q0[j] ? i : j;
      const size_t lo = hi == i ? j : i;
      PairOutcome o;
      if (nu_tied(nu[hi], nu[lo])) {
        o = PairOutcome::Stick;
      } else if (q0[hi] > q0[lo] && nu[hi] > nu[lo]) {
        o = PairOutcome::NeverMeet;
      } else {
        o = PairOutcome::CollideOnce;
      }
      out[i][j] = o;
    }
  }
  return out;
}

LineRun simulate_line(const LineSystem& sys0, double t_end, const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be positive");
  sys0.alpha();
  const int n = sys0.size();
  if (static_cast<int>(sys0.nu.size()) != n || static_cast<int>(sys0.cluster.size()) != n) {
    throw DomainError("line system arrays have inconsistent sizes");
  }

  LineRun run;
  run.final_system = sys0;
  LineSystem& sys = run.final_system;
  Trajectory& traj = run.trajectory;
  LineEventLog& log = run.log;
  traj.n = n;
  traj.dim = 1;

  const LineRhs rhs(sys);
  detail::Dopri5 solver([&](double, const double* y, double* v) { rhs(y, v); }, n,
                        {cfg.rel_tol, cfg.abs_tol, cfg.dt_min, cfg.dt_max});
  solver.reset(0.0, sys.q, cfg.dt_init);

  const auto store = [&]() {
    State s(n, 1, solver.t());
    s.q = solver.y();
    s.p = recover_momentum(sys, s.q);
    traj.snapshots.push_back(std::move(s));
    traj.velocity.push_back(solver.f());
  };
  store();

  // Last nonzero orientation of each pair, sign(q_j - q_i).
  std::vector<std::vector<int>> last(n, std::vector<int>(n, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      last[i][j] = sign_of(sys.q[j] - sys.q[i]);
      if (last[i][j] == 0 && sys.cluster[i] != sys.cluster[j]) {
        log.events.push_back({0.0, EventKind::Collision, i, j, 0.0});
      }
    }
  }

  const auto finish_events = [&]() {
    std::stable_sort(log.events.begin(), log.events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.time < b.time; });
    std::sort(log.sticking_times.begin(), log.sticking_times.end());
    log.sticking_times.erase(std::unique(log.sticking_times.begin(), log.sticking_times.end()),
                             log.sticking_times.end());
    traj.events = log.events;
  };

  long steps = 0;
  // A contact predicted slightly ahead caps the next step so no merged
  // snapshot is stamped before the contact time.
  std::vector<PendingMerge> held;
  while (solver.t() < t_end) {
    double t_limit = t_end;
    for (const auto& h : held) t_limit = std::min(t_limit, h.time);
    if (solver.step(t_limit - solver.t()) == detail::Dopri5::Outcome::FloorHit) {
      sys.q = solver.y();
      if (traj.snapshots.back().t < solver.t()) store();
      finish_events();
      const double tf = solver.t();
      traj.events.push_back({tf, EventKind::StepFloorHit, -1, -1, 0.0});
      throw StepFloorHit("line integration step fell below dt_min", tf, solver.h_next(), -1, -1,
                         std::make_shared<const Trajectory>(traj));
    }
    if (t_end - solver.t() <= 4.0 * std::numeric_limits<double>::epsilon() * t_end) {
      solver.snap_time(t_end);
    }
    const double t0 = solver.t_prev();
    const double t1 = solver.t();
    std::vector<double> y = solver.y();

    std::vector<PendingMerge> merges;
    const double reach = t1 + kMergeTol * (1.0 + t1);
    for (auto it = held.begin(); it != held.end();) {
      if (it->time <= reach) {
        merges.push_back(*it);
        it = held.erase(it);
      } else {
        ++it;
      }
    }
    const auto is_held = [&](int i, int j) {
      return std::any_of(held.begin(), held.end(), [&](const PendingMerge& h) { return h.i == i && h.j == j; });
    };
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (sys.cluster[i] == sys.cluster[j]) continue;
        const int s = sign_of(y[j] - y[i]);
        if (s == 0) continue;
        if (last[i][j] != 0 && s != last[i][j]) {
          double a = t0;
          double b = t1;
          for (int it = 0; it < 200 && b - a > 1e-13 * (1.0 + t1); ++it) {
            const double m = 0.5 * (a + b);
            if (sign_of(solver.dense(j, m) - solver.dense(i, m)) == last[i][j]) {
              a = m;
            } else {
              b = m;
            }
          }
          double tc = 0.5 * (a + b);
          if (nu_tied(sys.nu[i], sys.nu[j])) {
            // The interpolant is not smooth across contact; integrate the
            // closing time from the last pre-contact state instead.
            const int above = last[i][j] > 0 ? j : i;
            const double rem = time_to_contact(sys, solver.y_prev(), above, above == i ? j : i);
            if (rem > 0.0 && t0 + rem <= t1) tc = t0 + rem;
            merges.push_back({tc, i, j});
          } else {
            log.events.push_back({tc, EventKind::Collision, i, j, 0.0});
          }
        }
        last[i][j] = s;
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (sys.cluster[i] == sys.cluster[j] || !nu_tied(sys.nu[i], sys.nu[j])) continue;
        if (!gap_closed(y[i], y[j]) || is_held(i, j)) continue;
        // A gap this small carries a large relative error; extrapolate from
        // the previous step when it still has a resolvable gap.
        const auto& yp = solver.y_prev();
        const bool use_prev = sign_of(yp[j] - yp[i]) == sign_of(y[j] - y[i]) && !gap_closed(yp[i], yp[j]);
        const auto& base = use_prev ? yp : y;
        const double t_base = use_prev ? t0 : t1;
        const bool i_above = base[i] > base[j];
        const double remaining = time_to_contact(sys, base, i_above ? i : j, i_above ? j : i);
        const double tc = std::max(t_base + remaining, t0);
        if (tc > reach && tc < t_end) {
          held.push_back({tc, i, j});
        } else if (tc <= reach) {
          merges.push_back({tc, i, j});
        }
      }
    }

    bool merged = false;
    for (const auto& m : merges) {
      const int la = sys.cluster[m.i];
      const int lb = sys.cluster[m.j];
      if (la == lb) continue;
      const auto group_a = members(sys, la);
      const auto group_b = members(sys, lb);
      const double sa = static_cast<double>(group_a.size());
      const double sb = static_cast<double>(group_b.size());
      const double center = (sa * y[m.i] + sb * y[m.j]) / (sa + sb);
      const int label = std::min(la, lb);
      for (int a : group_a) {
        for (int b : group_b) {
          log.events.push_back({m.time, EventKind::StickStart, std::min(a, b), std::max(a, b), 0.0});
        }
      }
      for (int k : group_a) sys.cluster[k] = label, y[k] = center;
      for (int k : group_b) sys.cluster[k] = label, y[k] = center;
      const double shared_nu = sys.nu[m.i];
      for (int k : group_b) sys.nu[k] = shared_nu;
      log.sticking_times.push_back(m.time);
      merged = true;
    }
    if (merged) solver.reset(t1, y, solver.h_next());

    ++steps;
    if (merged || steps % cfg.stride == 0 || solver.t() >= t_end) store();
    if (steps >= cfg.max_steps && solver.t() < t_end) {
      throw Error("line integration exhausted its step budget");
    }
  }
  sys.q = solver.y();
  finish_events();
  return run;
}

std::pair<double, double> two_body_closed_form(double q1_0, double q2_0, double kappa, double t) {
  if (!(q1_0 >= q2_0)) throw DomainError("closed form expects q1_0 >= q2_0");
  if (!(kappa > 0.0)) throw DomainError("kappa must be > 0");
  const double mid = 0.5 * (q1_0 + q2_0);
  const double t_star = std::sqrt(q1_0 - q2_0) / kappa;
  if (t >= t_star) return {mid, mid};
  const double half_gap = 0.5 * kappa * kappa * (t - t_star) * (t - t_star);
  return {mid + half_gap, mid - half_gap};
}

StickingBounds sticking_rate_bounds(double kappa, double alpha, int n, const GBounds& gb) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (n < 2) throw DomainError("sticking needs at least two agents");
  StickingBounds b;
  b.d1 = std::pow(2.0 * kappa * gb.m_gprime * alpha / (n * (1.0 - alpha)), 1.0 / alpha);
  b.d2 = std::pow(kappa * gb.M_gprime * std::pow(2.0, alpha) * alpha / (1.0 - alpha), 1.0 / alpha);
  return b;
}

PowerFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit inputs differ in length");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0) || !std::isfinite(x[k]) || !std::isfinite(y[k])) continue;
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) throw InsufficientData("power-law fit needs at least two positive samples");
  const double mx = sx / m;
  const double my = sy / m;
  const double var = sxx / m - mx * mx;
  if (!(var > 0.0)) throw InsufficientData("power-law fit needs distinct abscissae");
  PowerFit fit;
  fit.slope = (sxy / m - mx * my) / var;
  fit.intercept = my - fit.slope * mx;
  fit.samples = m;
  return fit;
}

PowerFit fit_sticking_exponent(const Trajectory& traj, const EventRecord& event, double eps_min,
                               double eps_max) {
  if (event.kind != EventKind::StickStart) throw DomainError("fit requires a StickStart event");
  if (!(eps_min > 0.0) || !(eps_max > eps_min)) throw DomainError("invalid epsilon window");
  if (event.i < 0 || event.j < 0 || event.i >= traj.n || event.j >= traj.n) {
    throw DomainError("event pair outside trajectory");
  }
  std::vector<double> eps;
  std::vector<double> gap;
  for (const auto& s : traj.snapshots) {
    const double e = event.time - s.t;
    if (e < eps_min || e > eps_max) continue;
    double r2 = 0.0;
    for (int c = 0; c < traj.dim; ++c) {
      const double diff = s.qi(event.i)[c] - s.qi(event.j)[c];
      r2 += diff * diff;
    }
    if (r2 > 0.0) {
      eps.push_back(e);
      gap.push_back(std::sqrt(r2));
    }
  }
  if (eps.size() < 8) throw InsufficientData("fewer than 8 samples in the epsilon window");
  return fit_power_law(eps, gap);
}

RegularityExponents regularity_exponents(int n, double alpha, const GBounds& gb) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (n < 1) throw DomainError("n must be >= 1");
  RegularityExponents r;
  r.K = gb.m_gprime * std::pow(2.0, 1.0 - 2.0 * alpha) * (1.0 - alpha) / (n * gb.M_gprime * alpha);
  r.gamma_sup = 1.0 / std::max(1.0 - r.K, alpha);
  return r;
}

}  // namespace vcflock
