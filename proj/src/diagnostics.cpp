#include "vcflock/diagnostics.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "vcflock/error.hpp"

namespace vcflock {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dist(std::span<const double> a, std::span<const double> b) {
  double r2 = 0.0;
  for (size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    r2 += d * d;
  }
  return std::sqrt(r2);
}

std::vector<int> resolve_subset(const State& state, std::span<const int> subset) {
  if (subset.empty()) {
    std::vector<int> all(state.n);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  std::vector<int> s(subset.begin(), subset.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw DomainError("subset has duplicates");
  if (s.front() < 0 || s.back() >= state.n) throw DomainError("subset index out of range");
  return s;
}

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

size_t tail_start_index(const Trajectory& traj, double tail_fraction) {
  const double t0 = traj.t_begin();
  const double t_cut = t0 + (1.0 - tail_fraction) * (traj.t_end() - t0);
  size_t k = 0;
  while (k + 1 < traj.snapshots.size() && traj.snapshots[k].t < t_cut) ++k;
  return k;
}

double cross_gap(const State& s, const std::vector<int>& a, const std::vector<int>& b) {
  double best = kInf;
  for (int i : a) {
    for (int j : b) best = std::min(best, dist(s.qi(i), s.qi(j)));
  }
  return best;
}

void echo_common(Certificate& c, const DispersionReport& rep, const GBounds& gb, double kappa) {
  c.inputs = {{"norm_p0", rep.norm_p}, {"norm_q0", rep.norm_q}, {"p0_max", gb.p0_max},
              {"m_gprime", gb.m_gprime}, {"M_gprime", gb.M_gprime}, {"M_script", gb.M_script},
              {"kappa", kappa}};
}

}  // namespace

DispersionReport dispersions(const State& state, std::span<const int> subset) {
  const auto idx = resolve_subset(state, subset);
  DispersionReport r;
  r.subset.assign(subset.begin(), subset.end());
  std::sort(r.subset.begin(), r.subset.end());
  double sp = 0.0;
  double sq = 0.0;
  for (size_t a = 0; a < idx.size(); ++a) {
    for (size_t b = a + 1; b < idx.size(); ++b) {
      const double dp = dist(state.pi(idx[a]), state.pi(idx[b]));
      const double dq = dist(state.qi(idx[a]), state.qi(idx[b]));
      r.d_p = std::max(r.d_p, dp);
      r.d_q = std::max(r.d_q, dq);
      sp += dp * dp;
      sq += dq * dq;
    }
  }
  r.norm_p = std::sqrt(2.0 * sp);
  r.norm_q = std::sqrt(2.0 * sq);
  r.mean_momentum.assign(state.dim, 0.0);
  for (int i : idx) {
    for (int c = 0; c < state.dim; ++c) r.mean_momentum[c] += state.pi(i)[c];
  }
  for (double& m : r.mean_momentum) m /= static_cast<double>(idx.size());
  return r;
}

double lyapunov(const State& state, double q_norm_0, const Kernel& kernel, const GBounds& gb,
                double kappa) {
  const DispersionReport r = dispersions(state);
  const double coupling = gb.M_script * kappa / gb.M_gprime;
  return coupling * kernel.integral(q_norm_0, r.norm_q) + r.norm_p;
}

std::string_view to_string(CertificateKind kind) {
  switch (kind) {
    case CertificateKind::Flocking:
      return "Flocking";
    case CertificateKind::CollisionAvoidance:
      return "CollisionAvoidance";
    case CertificateKind::Regularity:
      return "Regularity";
  }
  return "Unknown";
}

std::optional<double> Certificate::input(std::string_view name) const {
  for (const auto& [k, v] : inputs) {
    if (k == name) return v;
  }
  return std::nullopt;
}

Certificate flocking_certificate(const State& state0, const Kernel& kernel, const VelocityControl& g,
                                 double kappa) {
  const DispersionReport rep = dispersions(state0);
  const GBounds gb = g.bounds(max_speed(state0));
  Certificate c;
  c.kind = CertificateKind::Flocking;
  echo_common(c, rep, gb, kappa);
  const double tail = kernel.tail_integral(rep.norm_q);
  const double rhs = std::isinf(tail) ? kInf : gb.M_script * kappa / gb.M_gprime * tail;
  c.inputs.emplace_back("tail_integral", tail);
  c.inputs.emplace_back("rhs", rhs);
  c.margin = std::isinf(rhs) ? kInf : rhs - rep.norm_p;
  c.holds = c.margin > 0.0;
  if (std::isinf(tail)) {
    c.note = "divergent kernel tail: flocking for all initial data";
  } else if (!c.holds) {
    c.note = "sufficient condition not met; flocking undecided";
  }
  return c;
}

Certificate collision_certificate(const State& state0, const Kernel& kernel, const VelocityControl& g,
                                  double kappa) {
  const DispersionReport rep = dispersions(state0);
  const GBounds gb = g.bounds(max_speed(state0));
  const double gap0 = min_pair_gap(state0);
  Certificate c;
  c.kind = CertificateKind::CollisionAvoidance;
  echo_common(c, rep, gb, kappa);
  c.inputs.emplace_back("min_gap0", gap0);

  if (kernel.kernel_class() == KernelClass::TypeII) {
    c.margin = -kInf;
    c.note = "not applicable: weakly singular kernels admit collisions";
    return c;
  }
  if (state0.n < 2) {
    c.holds = true;
    c.margin = kInf;
    c.note = "single agent";
    return c;
  }
  if (!(gap0 > 0.0)) {
    c.margin = -kInf;
    c.note = "initial configuration has coincident agents";
    return c;
  }

  const double lhs = gb.M_gprime * rep.norm_p / (kappa * gb.M_script);
  c.inputs.emplace_back("lhs", lhs);
  const double q0 = rep.norm_q;
  const auto margin_at = [&](double m) {
    return std::min(kernel.integral(q0, m), kernel.psi(m) * gap0) - lhs;
  };

  constexpr int kGrid = 256;
  std::vector<double> grid(kGrid);
  int best = 0;
  double best_val = -kInf;
  for (int k = 0; k < kGrid; ++k) {
    grid[k] = q0 * std::pow(1e6, static_cast<double>(k + 1) / kGrid);
    const double v = margin_at(grid[k]);
    if (v > best_val) best_val = v, best = k;
  }
  double m_best = grid[best];
  {
    const double lo = best > 0 ? grid[best - 1] : q0;
    const double hi = best + 1 < kGrid ? grid[best + 1] : grid[best];
    if (hi > lo) {
      const auto r = boost::math::tools::brent_find_minima([&](double m) { return -margin_at(m); }, lo,
                                                           hi, 40);
      if (-r.second > best_val) best_val = -r.second, m_best = r.first;
    }
  }

  if (best_val > 0.0) {
    // Feasible M form an interval: the integral grows and psi(M) shrinks.
    // Its left end gives the tightest separation bound.
    double lo = q0;
    double hi = m_best;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
      const double mid = std::sqrt(lo * hi) > lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
      if (kernel.integral(q0, mid) > lhs) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    c.holds = true;
    c.margin = best_val;
    c.bound = gap0 - lhs / kernel.psi(hi);
    c.inputs.emplace_back("M_best_margin", m_best);
    c.inputs.emplace_back("M_tightest", hi);
    return c;
  }

  c.margin = best_val;
  c.inputs.emplace_back("M_best_margin", m_best);
  const auto alpha = kernel.alpha();
  if (kernel.kernel_class() == KernelClass::TypeIII && alpha && *alpha > 1.0) {
    const Certificate f = flocking_certificate(state0, kernel, g, kappa);
    if (f.holds) {
      c.holds = true;
      c.margin = f.margin;
      c.note = "strongly singular kernel: flocking condition gives a positive separation without explicit bound";
      return c;
    }
  }
  c.note = "no feasible M found";
  return c;
}

Certificate regularity_certificate(const State& state0, const Kernel& kernel,
                                   const VelocityControl& g) {
  Certificate c;
  c.kind = CertificateKind::Regularity;
  if (kernel.kernel_class() != KernelClass::TypeII) {
    c.margin = -kInf;
    c.note = "not applicable: requires a weakly singular kernel";
    return c;
  }
  const double alpha = *kernel.alpha();
  const GBounds gb = g.bounds(max_speed(state0));
  const double n = state0.n;
  const double k = gb.m_gprime * std::pow(2.0, 1.0 - 2.0 * alpha) * (1.0 - alpha) / (n * gb.M_gprime * alpha);
  const double gamma_sup = 1.0 / std::max(1.0 - k, alpha);
  c.inputs = {{"n_agents", n},         {"alpha", alpha},  {"m_gprime", gb.m_gprime},
              {"M_gprime", gb.M_gprime}, {"K", k},        {"gamma_sup", gamma_sup}};
  c.holds = true;
  c.margin = gamma_sup - 1.0;
  return c;
}

FlockingVerdict detect_flocking(const Trajectory& traj, const FlockingOptions& opts) {
  if (traj.snapshots.size() < static_cast<size_t>(std::max(opts.min_samples, 2))) {
    throw InsufficientData("trajectory too short for flocking detection");
  }
  FlockingVerdict v;
  const size_t m = traj.snapshots.size();
  std::vector<double> dp(m);
  std::vector<double> dq(m);
  double pmax = 0.0;
  for (size_t k = 0; k < m; ++k) {
    const auto r = dispersions(traj.snapshots[k]);
    dp[k] = r.d_p;
    dq[k] = r.d_q;
    pmax = std::max(pmax, max_speed(traj.snapshots[k]));
  }
  const double floor = std::max(opts.noise_abs * (1.0 + pmax), opts.noise_rel * dp[0]);
  if (traj.n < 2 || dp[0] <= floor) {
    v.is_flocking = true;
    v.rate = kInf;
    v.reached_floor = true;
    return v;
  }

  // D_Q must not keep growing across the time tail.
  const size_t tail0 = tail_start_index(traj, opts.tail_fraction);
  const double dq_ref = dq[tail0];
  const double dq_tail_max = *std::max_element(dq.begin() + tail0, dq.end());
  v.dq_growth = dq_ref > 0.0 ? dq_tail_max / dq_ref - 1.0 : (dq_tail_max > 0.0 ? kInf : 0.0);
  const bool bounded = dq_tail_max <= (1.0 + opts.growth_tol) * dq_ref + 1e-12 * (1.0 + dq_ref);

  // Fit the decay over the tail of the part of the run above the noise floor.
  size_t hit = m;
  for (size_t k = 0; k < m; ++k) {
    if (dp[k] <= floor) {
      hit = k;
      break;
    }
  }
  v.reached_floor = hit < m;
  const double t0 = traj.t_begin();
  const double t_hit = hit < m ? traj.snapshots[hit].t : traj.t_end();
  const double t_cut = t0 + (1.0 - opts.tail_fraction) * (t_hit - t0);
  std::vector<double> xs;
  std::vector<double> ys;
  const auto collect = [&](double from) {
    xs.clear();
    ys.clear();
    for (size_t k = 0; k < hit; ++k) {
      if (traj.snapshots[k].t < from) continue;
      xs.push_back(traj.snapshots[k].t);
      ys.push_back(std::log(std::max(dp[k], 1e-14)));
    }
  };
  collect(t_cut);
  if (static_cast<int>(xs.size()) < opts.min_samples) collect(t0);
  if (xs.size() < 3) throw InsufficientData("too few samples above the noise floor");
  v.samples = static_cast<int>(xs.size());
  v.rate = -ls_slope(xs, ys);
  v.is_flocking = bounded && (v.rate >= opts.rate_min || v.reached_floor);
  return v;
}

std::optional<Bicluster> detect_bicluster(const Trajectory& traj, const BiclusterOptions& opts) {
  if (traj.n < 2 || traj.snapshots.size() < 2) return std::nullopt;
  const State& last = traj.snapshots.back();
  const int n = traj.n;

  // Prim's minimum spanning tree on final positions; drop its longest edge.
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, kInf);
  std::vector<int> parent(n, -1);
  best[0] = 0.0;
  for (int it = 0; it < n; ++it) {
    int u = -1;
    for (int k = 0; k < n; ++k) {
      if (!in_tree[k] && (u < 0 || best[k] < best[u])) u = k;
    }
    in_tree[u] = true;
    for (int k = 0; k < n; ++k) {
      if (in_tree[k]) continue;
      const double w = dist(last.qi(u), last.qi(k));
      if (w < best[k]) best[k] = w, parent[k] = u;
    }
  }
  int cut = -1;
  for (int k = 1; k < n; ++k) {
    if (cut < 0 || best[k] > best[cut]) cut = k;
  }
  if (!(best[cut] > 0.0)) return std::nullopt;
  // Agents reachable from 0 without the cut edge.
  std::vector<std::vector<int>> adj(n);
  for (int k = 1; k < n; ++k) {
    if (k == cut) continue;
    adj[k].push_back(parent[k]);
    adj[parent[k]].push_back(k);
  }
  std::vector<bool> seen(n, false);
  std::vector<int> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int w : adj[u]) {
      if (!seen[w]) seen[w] = true, stack.push_back(w);
    }
  }
  Bicluster b;
  for (int k = 0; k < n; ++k) (seen[k] ? b.group : b.complement).push_back(k);

  const size_t tail0 = tail_start_index(traj, opts.tail_fraction);
  b.cross_gap_initial = cross_gap(traj.snapshots.front(), b.group, b.complement);
  b.cross_gap_tail_start = cross_gap(traj.snapshots[tail0], b.group, b.complement);
  b.cross_gap_final = cross_gap(last, b.group, b.complement);

  const auto spread_ok = [&](const std::vector<int>& g, double& dp_final) {
    const double dq_ref = dispersions(traj.snapshots[tail0], g).d_q;
    double dp_max = 0.0;
    for (size_t k = 0; k < traj.snapshots.size(); ++k) {
      const auto r = dispersions(traj.snapshots[k], g);
      if (k >= tail0 && r.d_q > (1.0 + opts.growth_tol) * dq_ref + 1e-12 * (1.0 + dq_ref)) return false;
      dp_max = std::max(dp_max, r.d_p);
    }
    dp_final = dispersions(last, g).d_p;
    return dp_final <= opts.decay_fraction * dp_max || dp_final <= 1e-12 * (1.0 + max_speed(last));
  };
  if (!spread_ok(b.group, b.dp_group_final)) return std::nullopt;
  if (!spread_ok(b.complement, b.dp_complement_final)) return std::nullopt;
  if (!(b.cross_gap_final > (1.0 + opts.growth_tol) * b.cross_gap_tail_start)) return std::nullopt;
  if (!(b.cross_gap_final >= opts.growth_factor * b.cross_gap_initial)) return std::nullopt;
  return b;
}

DissipationReport verify_dissipation(const Trajectory& traj, std::span<const int> subset,
                                     const Kernel& kernel, const VelocityControl& g,
                                     const Params& params) {
  if (kernel.singular()) throw DomainError("dissipation check requires a bounded kernel");
  if (traj.snapshots.size() < 3) throw InsufficientData("dissipation check needs >= 3 snapshots");
  const int n = traj.n;
  const int d = traj.dim;
  const State probe(n, d);
  const auto in_s = resolve_subset(probe, subset);
  std::vector<bool> member(n, false);
  for (int i : in_s) member[i] = true;
  std::vector<int> out_s;
  for (int k = 0; k < n; ++k) {
    if (!member[k]) out_s.push_back(k);
  }
  const double l = static_cast<double>(in_s.size());
  const double big_n = n;
  const double kappa = params.kappa;
  const GBounds gb = g.bounds(max_speed(traj.snapshots.front()));
  const double p0 = gb.p0_max;
  const bool have_force = traj.force.size() == traj.snapshots.size();
  const bool have_vel = traj.velocity.size() == traj.snapshots.size();

  const size_t m = traj.snapshots.size();
  std::vector<double> norm_p(m);
  for (size_t k = 0; k < m; ++k) norm_p[k] = dispersions(traj.snapshots[k], in_s).norm_p;

  DissipationReport rep;
  rep.lipschitz_form = rep.max_psi_form = rep.spread_rate = -kInf;
  for (size_t k = 0; k < m; ++k) {
    const State& s = traj.snapshots[k];
    const double np = norm_p[k];
    const double nq = dispersions(s, in_s).norm_q;

    double lhs;
    if (have_force) {
      double acc = 0.0;
      double acc_dot = 0.0;
      for (int i : in_s) {
        for (int j : in_s) {
          for (int c = 0; c < d; ++c) {
            const double dp = s.p[i * d + c] - s.p[j * d + c];
            const double ddp = traj.force[k][i * d + c] - traj.force[k][j * d + c];
            acc += dp * ddp;
            acc_dot += ddp * ddp;
          }
        }
      }
      // At |P|_S = 0 the one-sided derivative of the norm is |dP_S/dt|.
      lhs = np > 1e-300 ? acc / np : std::sqrt(acc_dot);
    } else {
      if (k == 0 || k + 1 == m) continue;
      lhs = (norm_p[k + 1] - norm_p[k - 1]) / (traj.snapshots[k + 1].t - traj.snapshots[k - 1].t);
    }

    const double decay = kappa * gb.M_script * l / big_n * kernel.psi(nq) * np;
    double rhs1 = -decay;
    double rhs2 = -decay;
    if (!out_s.empty()) {
      double q_cross = kInf;
      double psi_max = 0.0;
      for (int i : in_s) {
        for (int j : out_s) {
          const double r = dist(s.qi(i), s.qi(j));
          q_cross = std::min(q_cross, r);
          psi_max = std::max(psi_max, kernel.psi(r));
        }
      }
      rhs1 += 2.0 * kappa * gb.M_gprime * (big_n - l) * p0 * kernel.lipschitz_tail(q_cross) / big_n * nq;
      rhs2 += 4.0 * kappa * p0 * gb.M_gprime * l * (big_n - l) / big_n * psi_max;
    }
    rep.lipschitz_form = std::max(rep.lipschitz_form, lhs - rhs1);
    rep.max_psi_form = std::max(rep.max_psi_form, lhs - rhs2);

    if (have_vel) {
      double rate = 0.0;
      for (int i : in_s) {
        for (int j : in_s) {
          for (int c = 0; c < d; ++c) {
            rate += (s.q[i * d + c] - s.q[j * d + c]) *
                    (traj.velocity[k][i * d + c] - traj.velocity[k][j * d + c]);
          }
        }
      }
      rep.spread_rate = std::max(rep.spread_rate, std::abs(2.0 * rate) - 2.0 * gb.M_gprime * np * nq);
    }
    ++rep.samples;
  }
  rep.max_violation = std::max({rep.lipschitz_form, rep.max_psi_form, rep.spread_rate});
  return rep;
}

}  // namespace vcflock
