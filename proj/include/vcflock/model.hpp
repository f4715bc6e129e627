#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "vcflock/gctrl.hpp"
#include "vcflock/kernel.hpp"

namespace vcflock {

struct Params {
  int n_agents = 1;
  int dim = 1;
  double kappa = 1.0;

  void validate() const;
};

/// Positions and momenta at time t, stored row-major (agent-major, N x d).
struct State {
  double t = 0.0;
  int n = 0;
  int dim = 0;
  std::vector<double> q;
  std::vector<double> p;

  State() = default;
  State(int n_agents, int d, double time = 0.0)
      : t(time), n(n_agents), dim(d), q(static_cast<size_t>(n_agents) * d), p(q.size()) {}

  std::span<double> qi(int i) { return {q.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)}; }
  std::span<double> pi(int i) { return {p.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)}; }
  std::span<const double> qi(int i) const { return {q.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)}; }
  std::span<const double> pi(int i) const { return {p.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)}; }

  /// Throws DomainError on shape mismatch or non-finite entries.
  void validate(const Params& params) const;
};

struct Derivative {
  std::vector<double> dq;
  std::vector<double> dp;
};

/// Reusable evaluator of the right-hand side; owns scratch buffers, so one
/// instance must not be shared across threads.
class RhsEvaluator {
 public:
  RhsEvaluator(const Kernel& kernel, const VelocityControl& g, const Params& params);

  /// dq_i = G(p_i), dp_i = (kappa/N) sum_k psi(|q_k - q_i|) (G(p_k) - G(p_i)).
  /// Each dp_i is summed in an order independent of agent labels, so
  /// relabelling agents permutes the output exactly.
  void operator()(const double* q, const double* p, double* dq, double* dp);

  const Params& params() const { return params_; }

 private:
  Kernel kernel_;
  VelocityControl g_;
  Params params_;
  std::vector<double> terms_;
  std::vector<int> filled_;
};

Derivative rhs(const State& state, const Kernel& kernel, const VelocityControl& g, const Params& params);

std::vector<double> momentum_sum(const State& state);
double max_speed(const State& state);
/// min over i != j of |q_i - q_j|; +inf for a single agent.
double min_pair_gap(const State& state);
/// Closest pair (i < j) and its distance; (-1, -1, inf) for a single agent.
struct ClosestPair {
  int i = -1;
  int j = -1;
  double gap = 0.0;
};
ClosestPair closest_pair(const State& state);

enum class EventKind { GapMinimum, GapBelowThreshold, StepFloorHit, Collision, StickStart };

std::string_view to_string(EventKind kind);

struct EventRecord {
  double time = 0.0;
  EventKind kind = EventKind::GapMinimum;
  int i = -1;
  int j = -1;
  double gap = 0.0;  ///< pair distance at the event
};

/// Time-indexed snapshots with optional stored derivatives.
struct Trajectory {
  int n = 0;
  int dim = 0;
  std::vector<State> snapshots;
  /// q-derivative (G(p)) per snapshot, same layout as State::q.
  std::vector<std::vector<double>> velocity;
  /// p-derivative per snapshot; empty when not recorded.
  std::vector<std::vector<double>> force;
  std::vector<EventRecord> events;

  bool empty() const { return snapshots.empty(); }
  double t_begin() const { return snapshots.front().t; }
  double t_end() const { return snapshots.back().t; }

  /// Cubic Hermite interpolation between stored snapshots (linear in p when
  /// forces are not stored). Clamps t to the stored window.
  State at(double t) const;
};

}  // namespace vcflock
