#include <CLI11.hpp>
#include <iostream>

#include "vcflock/runner.hpp"

namespace {

// "a,b" -> pair of T.
template <class T>
bool parse_pair(const std::string& s, T& a, T& b) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) return false;
  try {
    size_t used = 0;
    const std::string l = s.substr(0, comma);
    const std::string r = s.substr(comma + 1);
    if constexpr (std::is_integral_v<T>) {
      a = static_cast<T>(std::stol(l, &used));
      if (used != l.size()) return false;
      b = static_cast<T>(std::stol(r, &used));
    } else {
      a = std::stod(l, &used);
      if (used != l.size()) return false;
      b = std::stod(r, &used);
    }
    return used == r.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Velocity-controlled flocking simulator"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out_dir;
  int workers = 0;

  auto* sim = app.add_subcommand("simulate", "integrate one configuration and write artifacts");
  sim->add_option("config", config, "run configuration (INI)")->required();
  sim->add_option("--out", out_dir, "output directory (overrides [output] dir)");

  auto* cert = app.add_subcommand("certify", "evaluate certificates on the initial state");
  cert->add_option("config", config, "run configuration (INI)")->required();

  auto* sweep = app.add_subcommand("sweep", "run the [sweep] grid and print a CSV table");
  sweep->add_option("config", config, "run configuration with a [sweep] section")->required();
  sweep->add_option("--out", out_dir, "output directory (overrides [output] dir)");
  sweep->add_option("--workers", workers, "worker threads (default: VCFLOCK_WORKERS or all cores)");

  vcflock::FitRequest fit;
  std::string pair_text;
  std::string window_text;
  std::optional<double> t_star;
  std::optional<std::string> summary;
  auto* fitcmd = app.add_subcommand("fit-exponent", "fit the pre-sticking gap exponent of one pair");
  fitcmd->add_option("trajectory", fit.trajectory_path, "trajectory.jsonl")->required();
  fitcmd->add_option("--pair", pair_text, "agent indices i,j")->required();
  fitcmd->add_option("--t-star", t_star, "sticking time (default: from --summary or first coincidence)");
  fitcmd->add_option("--summary", summary, "summary.json with the StickStart event");
  fitcmd->add_option("--window", window_text, "epsilon window a,b (default 1e-4,1e-2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : vcflock::kExitConfig;
  }

  if (*sim) return vcflock::cmd_simulate(config, out_dir, std::cout, std::cerr);
  if (*cert) return vcflock::cmd_certify(config, std::cout, std::cerr);
  if (*sweep) return vcflock::cmd_sweep(config, out_dir, workers, std::cout, std::cerr);

  if (!parse_pair(pair_text, fit.pair.first, fit.pair.second)) {
    std::cerr << "error: --pair expects i,j\n";
    return vcflock::kExitConfig;
  }
  if (!window_text.empty() && !parse_pair(window_text, fit.eps_min, fit.eps_max)) {
    std::cerr << "error: --window expects a,b\n";
    return vcflock::kExitConfig;
  }
  fit.t_star = t_star;
  fit.summary_path = summary;
  return vcflock::cmd_fit_exponent(fit, std::cout, std::cerr);
}
