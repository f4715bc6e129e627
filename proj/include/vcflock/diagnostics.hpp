#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vcflock/gctrl.hpp"
#include "vcflock/kernel.hpp"
#include "vcflock/model.hpp"

namespace vcflock {

/// Pair statistics over all agents or a subset.
///
/// Norms sum over ORDERED pairs: |Q|^2 = sum_{i,j} |q_i - q_j|^2, so two agents
/// at distance 1 have |Q| = sqrt(2). Certificates depend on this convention.
struct DispersionReport {
  double d_p = 0.0;     ///< max_{i,j} |p_i - p_j|
  double d_q = 0.0;     ///< max_{i,j} |q_i - q_j|
  double norm_p = 0.0;  ///< |P| over the subset
  double norm_q = 0.0;  ///< |Q| over the subset
  std::vector<double> mean_momentum;  ///< average momentum over the subset
  std::vector<int> subset;            ///< empty means all agents
};

/// Throws DomainError for an empty or out-of-range subset.
DispersionReport dispersions(const State& state, std::span<const int> subset = {});

/// (M kappa / M_G') int_{q_norm_0}^{|Q|} psi + |P|.
double lyapunov(const State& state, double q_norm_0, const Kernel& kernel, const GBounds& gb,
                double kappa);

enum class CertificateKind { Flocking, CollisionAvoidance, Regularity };

std::string_view to_string(CertificateKind kind);

struct Certificate {
  CertificateKind kind = CertificateKind::Flocking;
  bool holds = false;
  /// Right-hand side minus left-hand side; positive exactly when holds.
  /// May be +inf (divergent tail) or -inf (not applicable).
  double margin = 0.0;
  /// Every quantity that entered the evaluation, in a stable order.
  std::vector<std::pair<std::string, double>> inputs;
  /// Explicit lower bound on pairwise distances (collision avoidance only).
  std::optional<double> bound;
  std::string note;

  std::optional<double> input(std::string_view name) const;
};

/// |P0| < (M kappa / M_G') int_{|Q0|}^inf psi.
Certificate flocking_certificate(const State& state0, const Kernel& kernel, const VelocityControl& g,
                                 double kappa);

/// Searches M > |Q0| with M_G'|P0|/(kappa M) < min{int_{|Q0|}^M psi, psi(M) min gap}.
/// The reported bound uses the smallest feasible M, which gives the largest
/// guaranteed separation. For power laws with alpha > 1 the flocking
/// condition alone certifies a positive (unquantified) separation.
Certificate collision_certificate(const State& state0, const Kernel& kernel, const VelocityControl& g,
                                  double kappa);

/// K and gamma_sup for a weakly singular kernel on the line; holds = false
/// (margin -inf) for other kernel classes.
Certificate regularity_certificate(const State& state0, const Kernel& kernel,
                                   const VelocityControl& g);

struct FlockingOptions {
  double tail_fraction = 0.5;
  /// Minimum fitted decay rate of D_P to call the run flocking.
  double rate_min = 1e-4;
  /// D_P below max(noise_abs (1 + max|p|), noise_rel D_P(0)) is treated as converged.
  double noise_rel = 1e-10;
  double noise_abs = 1e-13;
  int min_samples = 16;
  /// Allowed relative growth of D_Q across the tail window.
  double growth_tol = 0.05;
};

struct FlockingVerdict {
  bool is_flocking = false;
  double rate = 0.0;        ///< fitted exponential decay rate of D_P
  double dq_growth = 0.0;   ///< max D_Q over tail / D_Q at tail start - 1
  bool reached_floor = false;
  int samples = 0;          ///< samples used by the rate fit
};

/// Throws InsufficientData when the trajectory has fewer than min_samples snapshots.
FlockingVerdict detect_flocking(const Trajectory& traj, const FlockingOptions& opts = {});

struct BiclusterOptions {
  double tail_fraction = 0.5;
  /// Cross-group distance must reach this multiple of its initial value.
  double growth_factor = 2.0;
  double growth_tol = 0.05;
  /// In-group D_P at the end must be below this fraction of its run maximum.
  double decay_fraction = 0.1;
};

struct Bicluster {
  std::vector<int> group;       ///< contains agent 0
  std::vector<int> complement;
  double cross_gap_initial = 0.0;
  double cross_gap_tail_start = 0.0;
  double cross_gap_final = 0.0;
  double dp_group_final = 0.0;
  double dp_complement_final = 0.0;
};

/// Splits the final configuration at the longest single-linkage edge and
/// checks bounded in-group spread, growing cross-group distance and
/// decaying in-group momentum spread over the observed window. Growth on a
/// finite window is a proxy for unbounded separation.
std::optional<Bicluster> detect_bicluster(const Trajectory& traj, const BiclusterOptions& opts = {});

struct DissipationReport {
  /// Largest signed excess of d|P|_S/dt over either subsystem estimate, or of
  /// |d|Q|_S^2/dt| over 2 M_G' |P|_S |Q|_S. Non-positive when all hold.
  double max_violation = 0.0;
  double lipschitz_form = 0.0;
  double max_psi_form = 0.0;
  double spread_rate = 0.0;
  int samples = 0;
};

/// Checks the subsystem dissipation estimates at every snapshot. Uses stored
/// forces for d/dt |P|_S when available, centered differences otherwise.
/// Requires a bounded kernel.
DissipationReport verify_dissipation(const Trajectory& traj, std::span<const int> subset,
                                     const Kernel& kernel, const VelocityControl& g,
                                     const Params& params);

}  // namespace vcflock
