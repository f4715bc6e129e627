#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vcflock/config.hpp"
#include "vcflock/diagnostics.hpp"
#include "vcflock/model.hpp"

namespace vcflock {

/// Exit codes shared by the CLI subcommands.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitStepFloor = 3 };

struct RunOutcome {
  Trajectory trajectory;  ///< partial after a StepFloorHit abort
  int exit_code = kExitOk;
  std::string status = "ok";  ///< ok, step_floor or error
  std::string message;
  GBounds g_bounds;
  std::vector<Certificate> certificates;
  std::optional<FlockingVerdict> flocking;
  std::string flocking_error;
  bool bicluster_checked = false;
  std::optional<Bicluster> bicluster;
  double wall_time = 0.0;  ///< seconds
};

/// Runs one configuration in memory: integrator for bounded and strongly
/// singular kernels, the line reduction for weakly singular kernels in 1-D.
/// Config errors propagate as ConfigError; solver failures are recorded in
/// the outcome.
RunOutcome run_config(const RunConfig& cfg);

/// Certificates requested by cfg.analysis, evaluated on the initial state.
std::vector<Certificate> evaluate_certificates(const RunConfig& cfg, const State& state0);

/// Writes trajectory.jsonl, summary.json and plots.csv into dir.
void write_artifacts(const RunConfig& cfg, const RunOutcome& outcome, const std::string& dir);

int cmd_simulate(const std::string& config_path, const std::optional<std::string>& out_dir,
                 std::ostream& out, std::ostream& err);
int cmd_certify(const std::string& config_path, std::ostream& out, std::ostream& err);
/// workers <= 0 selects VCFLOCK_WORKERS or the hardware concurrency.
int cmd_sweep(const std::string& config_path, const std::optional<std::string>& out_dir, int workers,
              std::ostream& out, std::ostream& err);

struct FitRequest {
  std::string trajectory_path;
  std::pair<int, int> pair{0, 1};
  std::optional<double> t_star;
  std::optional<std::string> summary_path;  ///< StickStart time is read from here
  double eps_min = 1e-4;
  double eps_max = 1e-2;
};
int cmd_fit_exponent(const FitRequest& req, std::ostream& out, std::ostream& err);

}  // namespace vcflock
