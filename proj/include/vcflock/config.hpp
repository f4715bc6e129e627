#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vcflock/gctrl.hpp"
#include "vcflock/integrator.hpp"
#include "vcflock/kernel.hpp"
#include "vcflock/model.hpp"

namespace vcflock {

enum class InitialKind { Inline, UniformBox, TwoCluster };

struct InitialSpec {
  InitialKind kind = InitialKind::Inline;
  std::vector<double> q;  ///< row-major N x d (inline only)
  std::vector<double> p;
  std::optional<std::uint64_t> seed;
  double box = 1.0;          ///< uniform_box: positions in [-box, box]^d
  double speed = 1.0;        ///< uniform_box: momenta in [-speed, speed]^d
  double separation = 10.0;  ///< two_cluster: distance between group centres
  double group_speed = 1.0;  ///< two_cluster: groups move apart at +-group_speed
  double jitter = 0.1;       ///< two_cluster: in-group perturbation amplitude
  int group_size = 0;        ///< two_cluster: size of the first group (0 = N/2)
};

struct AnalysisSpec {
  bool flocking_certificate = true;
  bool collision_certificate = true;
  bool regularity = true;
  bool detect_flocking = true;
  bool detect_bicluster = true;
  double tail_fraction = 0.5;
};

struct SweepAxis {
  std::string name;  ///< kappa, alpha, beta, rate, eps, c or seed
  std::vector<double> values;
};

struct SweepSpec {
  std::vector<SweepAxis> axes;  ///< sorted by name; first axis varies slowest
  long max_runs = 10000;
};

struct RunConfig {
  Params params;
  std::string kernel_spec = "rational:beta=2";
  std::string gctrl_spec = "identity";
  InitialSpec initial;
  IntegratorConfig integrator;
  std::string output_dir = "out";
  AnalysisSpec analysis;
  SweepSpec sweep;

  Kernel kernel() const { return Kernel::parse(kernel_spec); }
  VelocityControl gctrl() const { return VelocityControl::parse(gctrl_spec); }
};

/// Parses the INI-style run configuration. Throws ConfigError (OutOfScope
/// for weakly singular kernels with dim >= 2).
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Re-checks cross-field consistency; used after sweep substitutions.
void validate_config(const RunConfig& cfg);

/// Copy of `base` with one value per sweep axis substituted.
RunConfig apply_sweep_point(const RunConfig& base, const std::vector<double>& point);

/// Builds the initial state from inline data or a seeded generator.
State initial_state(const RunConfig& cfg);

}  // namespace vcflock
