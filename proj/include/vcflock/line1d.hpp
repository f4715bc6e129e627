#pragma once

#include <span>
#include <utility>
#include <vector>

#include "vcflock/gctrl.hpp"
#include "vcflock/integrator.hpp"
#include "vcflock/kernel.hpp"
#include "vcflock/model.hpp"

namespace vcflock {

/// First-order reduction of the one-dimensional system with a weakly
/// singular kernel: q_i' = G(nu_i + (kappa/N) sum_k Psi(q_k - q_i)).
struct LineSystem {
  std::vector<double> q;
  std::vector<double> nu;
  double kappa = 1.0;
  Kernel kernel = Kernel::power_law(0.5);
  VelocityControl g = VelocityControl::identity();
  /// Cluster label per agent (smallest member index). Members share q and nu.
  std::vector<int> cluster;

  /// Builds the system from positions and momenta. nu values within the tie
  /// tolerance are snapped to a common value; coincident tied agents start
  /// in one cluster.
  static LineSystem from_initial(std::vector<double> q0, std::span<const double> p0,
                                 const Kernel& kernel, double kappa, const VelocityControl& g);

  int size() const { return static_cast<int>(q.size()); }
  double alpha() const;
};

/// nu_i = p_i - (kappa/N) sum_k Psi(q_k - q_i). kappa = 0 returns p0.
std::vector<double> nu_from_initial(std::span<const double> q0, std::span<const double> p0,
                                    const Kernel& kernel, double kappa);

/// p_i = nu_i + (kappa/N) sum_k Psi(q_k - q_i).
std::vector<double> recover_momentum(const LineSystem& sys, std::span<const double> q);

/// True when |a - b| < 1e-9 (1 + max(|a|, |b|)).
bool nu_tied(double a, double b);

enum class PairOutcome { Self, NeverMeet, CollideOnce, Stick };

std::vector<std::vector<PairOutcome>> predict_pairwise(std::span<const double> q0,
                                                       std::span<const double> nu);

struct LineEventLog {
  /// Collision and StickStart records (one StickStart per merged agent pair).
  std::vector<EventRecord> events;
  /// Distinct sticking instants, increasing.
  std::vector<double> sticking_times;
};

struct LineRun {
  Trajectory trajectory;  ///< q, recovered p, velocity G(p); no forces
  LineEventLog log;
  LineSystem final_system;
};

/// Integrates the reduced system from t = 0 to t_end, crossing transversal
/// collisions and merging nu-tied pairs whose gap reaches the merge tolerance.
/// Only the tolerance, step-size, stride and max_steps fields of cfg are used.
LineRun simulate_line(const LineSystem& sys, double t_end, const IntegratorConfig& cfg);

/// Two agents, alpha = 1/2, identity control, nu_1 = nu_2 = 0: the gap
/// closes as kappa^2 (t* - t)^2 and both agents rest at the midpoint after
/// t* = sqrt(q1 - q2)/kappa.
std::pair<double, double> two_body_closed_form(double q1_0, double q2_0, double kappa, double t);

struct StickingBounds {
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Coefficients of gap(t* - eps) between d1 eps^(1/alpha) and d2 eps^(1/alpha).
StickingBounds sticking_rate_bounds(double kappa, double alpha, int n, const GBounds& gb);

struct PowerFit {
  double slope = 0.0;
  double intercept = 0.0;
  int samples = 0;
};

/// Least squares of log y against log x. Requires >= 2 positive samples.
PowerFit fit_power_law(std::span<const double> x, std::span<const double> y);

/// Fits log gap(t* - eps) against log eps over snapshots with eps in
/// [eps_min, eps_max], t* and the pair taken from `event`. Throws
/// InsufficientData below 8 samples.
PowerFit fit_sticking_exponent(const Trajectory& traj, const EventRecord& event, double eps_min,
                               double eps_max);

struct RegularityExponents {
  double K = 0.0;
  double gamma_sup = 0.0;
};

/// K = m 2^(1-2 alpha) (1 - alpha) / (N M alpha), gamma_sup = 1 / max{1 - K, alpha}.
RegularityExponents regularity_exponents(int n, double alpha, const GBounds& gb);

}  // namespace vcflock
