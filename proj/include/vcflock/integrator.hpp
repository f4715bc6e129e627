#pragma once

#include <utility>
#include <vector>

#include "vcflock/gctrl.hpp"
#include "vcflock/kernel.hpp"
#include "vcflock/model.hpp"

namespace vcflock {

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double dt_init = 1e-3;
  double dt_min = 1e-14;
  double dt_max = 1.0;
  /// Fraction of the closest-pair gap a strongly singular run may close in one step.
  double gap_safety = 0.5;
  /// Record GapBelowThreshold when any pair gap drops below this (0 disables).
  double gap_threshold = 0.0;
  double t_end = 10.0;
  /// Keep every stride-th accepted step (first and last are always kept).
  int stride = 1;
  /// Record per-pair gap minima.
  bool detect_gap_minima = true;
  /// Store dp/dt alongside each snapshot.
  bool store_force = true;
  long max_steps = 50'000'000;

  void validate() const;
};

/// Integrates the second-order system from state0 to cfg.t_end.
/// Weakly singular kernels are accepted only for dim == 1 (direct
/// integration while positions stay distinct); use line1d for sticking.
/// Throws StepFloorHit (carrying the partial trajectory) when the step size
/// falls below dt_min, OutOfScope for weakly singular kernels with dim >= 2.
Trajectory integrate(const State& state0, const Kernel& kernel, const VelocityControl& g,
                     const Params& params, const IntegratorConfig& cfg);

/// (time, min pairwise distance) at every snapshot, refined by the recorded
/// GapMinimum events, sorted by time.
std::vector<std::pair<double, double>> min_gap_trace(const Trajectory& traj);

}  // namespace vcflock
