#pragma once

#include <iosfwd>
#include <vector>

#include "vcflock/gctrl.hpp"
#include "vcflock/kernel.hpp"
#include "vcflock/model.hpp"

namespace vcflock {

/// Derived per-snapshot quantities written alongside the state.
struct SnapshotMetrics {
  double t = 0.0;
  double min_gap = 0.0;
  double d_p = 0.0;
  double d_q = 0.0;
  double lyapunov = 0.0;  ///< NaN when the integral cannot be evaluated
};

/// gb should be evaluated at the initial maximal speed; the Lyapunov
/// integral starts at the initial |Q|.
std::vector<SnapshotMetrics> snapshot_metrics(const Trajectory& traj, const Kernel& kernel,
                                              const GBounds& gb, double kappa);

/// One JSON object per line: t, q and p as N x d arrays, min_gap, D_P, D_Q, L.
/// Numbers use 17 significant digits; non-finite values are written as null.
void write_trajectory_jsonl(std::ostream& out, const Trajectory& traj,
                            const std::vector<SnapshotMetrics>& metrics);

/// Header `t,D_P,D_Q,min_gap,L`, one row per snapshot.
void write_plots_csv(std::ostream& out, const std::vector<SnapshotMetrics>& metrics);

/// Reads the positions and momenta back from a trajectory JSONL stream.
/// Throws ConfigError on malformed lines or inconsistent shapes.
Trajectory read_trajectory_jsonl(std::istream& in);

}  // namespace vcflock
