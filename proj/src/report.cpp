#include "vcflock/report.hpp"

#include <cmath>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <string>

#include "spec_string.hpp"
#include "vcflock/diagnostics.hpp"
#include "vcflock/error.hpp"

namespace vcflock {

namespace {

std::string num(double v) { return std::isfinite(v) ? detail::format_number(v) : "null"; }

void write_matrix(std::ostream& out, const std::vector<double>& a, int n, int dim) {
  out << '[';
  for (int i = 0; i < n; ++i) {
    if (i) out << ',';
    out << '[';
    for (int c = 0; c < dim; ++c) {
      if (c) out << ',';
      out << num(a[static_cast<size_t>(i) * dim + c]);
    }
    out << ']';
  }
  out << ']';
}

std::vector<double> read_matrix(const nlohmann::json& j, int& n, int& dim, long line) {
  const auto bad = [line](const std::string& what) {
    return ConfigError("trajectory line " + std::to_string(line) + ": " + what);
  };
  if (!j.is_array()) throw bad("expected an N x d array");
  std::vector<double> out;
  const int rows = static_cast<int>(j.size());
  int cols = -1;
  for (const auto& row : j) {
    if (!row.is_array()) throw bad("expected an N x d array");
    if (cols < 0) cols = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != cols) throw bad("ragged array");
    for (const auto& x : row) {
      if (!x.is_number()) throw bad("non-numeric state entry");
      out.push_back(x.get<double>());
    }
  }
  if (n < 0) {
    n = rows;
    dim = cols;
  } else if (rows != n || cols != dim) {
    throw bad("shape differs from earlier lines");
  }
  return out;
}

}  // namespace

std::vector<SnapshotMetrics> snapshot_metrics(const Trajectory& traj, const Kernel& kernel,
                                              const GBounds& gb, double kappa) {
  std::vector<SnapshotMetrics> out;
  if (traj.empty()) return out;
  const double q_norm_0 = dispersions(traj.snapshots.front()).norm_q;
  out.reserve(traj.snapshots.size());
  for (const auto& s : traj.snapshots) {
    const DispersionReport r = dispersions(s);
    SnapshotMetrics m;
    m.t = s.t;
    m.min_gap = min_pair_gap(s);
    m.d_p = r.d_p;
    m.d_q = r.d_q;
    try {
      m.lyapunov = lyapunov(s, q_norm_0, kernel, gb, kappa);
    } catch (const Error&) {
      m.lyapunov = std::nan("");
    }
    out.push_back(m);
  }
  return out;
}

void write_trajectory_jsonl(std::ostream& out, const Trajectory& traj,
                            const std::vector<SnapshotMetrics>& metrics) {
  if (metrics.size() != traj.snapshots.size()) throw DomainError("metrics do not match snapshots");
  for (size_t k = 0; k < traj.snapshots.size(); ++k) {
    const State& s = traj.snapshots[k];
    const SnapshotMetrics& m = metrics[k];
    out << "{\"t\":" << num(s.t) << ",\"q\":";
    write_matrix(out, s.q, s.n, s.dim);
    out << ",\"p\":";
    write_matrix(out, s.p, s.n, s.dim);
    out << ",\"min_gap\":" << num(m.min_gap) << ",\"D_P\":" << num(m.d_p) << ",\"D_Q\":" << num(m.d_q)
        << ",\"L\":" << num(m.lyapunov) << "}\n";
  }
}

void write_plots_csv(std::ostream& out, const std::vector<SnapshotMetrics>& metrics) {
  out << "t,D_P,D_Q,min_gap,L\n";
  for (const auto& m : metrics) {
    out << num(m.t) << ',' << num(m.d_p) << ',' << num(m.d_q) << ',' << num(m.min_gap) << ','
        << num(m.lyapunov) << '\n';
  }
}

Trajectory read_trajectory_jsonl(std::istream& in) {
  Trajectory traj;
  int n = -1;
  int dim = -1;
  std::string text;
  long line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("trajectory line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.contains("t") || !j["t"].is_number() || !j.contains("q")) {
      throw ConfigError("trajectory line " + std::to_string(line) + ": missing t or q");
    }
    State s;
    s.t = j["t"].get<double>();
    s.q = read_matrix(j["q"], n, dim, line);
    s.p = j.contains("p") ? read_matrix(j["p"], n, dim, line) : std::vector<double>(s.q.size(), 0.0);
    s.n = n;
    s.dim = dim;
    if (!traj.empty() && !(s.t >= traj.t_end())) {
      throw ConfigError("trajectory line " + std::to_string(line) + ": time is not increasing");
    }
    traj.snapshots.push_back(std::move(s));
  }
  if (traj.empty()) throw InsufficientData("trajectory file has no snapshots");
  traj.n = n;
  traj.dim = dim;
  return traj;
}

}  // namespace vcflock
