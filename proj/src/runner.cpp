#include "vcflock/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <thread>

#include "spec_string.hpp"
#include "vcflock/error.hpp"
#include "vcflock/integrator.hpp"
#include "vcflock/line1d.hpp"
#include "vcflock/report.hpp"

namespace vcflock {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr EventKind kAllEvents[] = {EventKind::GapMinimum, EventKind::GapBelowThreshold,
                                    EventKind::StepFloorHit, EventKind::Collision, EventKind::StickStart};

// JSON has no infinities; they are spelled as strings.
ojson jnum(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  return v;
}

std::string_view initial_name(InitialKind k) {
  switch (k) {
    case InitialKind::Inline:
      return "inline";
    case InitialKind::UniformBox:
      return "uniform_box";
    case InitialKind::TwoCluster:
      return "two_cluster";
  }
  return "unknown";
}

ojson config_json(const RunConfig& cfg) {
  ojson j;
  j["n_agents"] = cfg.params.n_agents;
  j["dim"] = cfg.params.dim;
  j["kappa"] = cfg.params.kappa;
  j["kernel"] = cfg.kernel_spec;
  j["gctrl"] = cfg.gctrl_spec;
  j["initial"] = std::string(initial_name(cfg.initial.kind));
  j["seed"] = cfg.initial.seed ? ojson(*cfg.initial.seed) : ojson(nullptr);
  j["t_end"] = cfg.integrator.t_end;
  j["rel_tol"] = cfg.integrator.rel_tol;
  j["abs_tol"] = cfg.integrator.abs_tol;
  j["stride"] = cfg.integrator.stride;
  return j;
}

ojson certificate_json(const Certificate& c) {
  ojson j;
  j["kind"] = std::string(to_string(c.kind));
  j["holds"] = c.holds;
  j["margin"] = jnum(c.margin);
  j["bound"] = c.bound ? jnum(*c.bound) : ojson(nullptr);
  j["note"] = c.note;
  ojson in = ojson::object();
  for (const auto& [k, v] : c.inputs) in[k] = jnum(v);
  j["inputs"] = in;
  return j;
}

ojson event_json(const EventRecord& e) {
  ojson j;
  j["time"] = jnum(e.time);
  j["kind"] = std::string(to_string(e.kind));
  j["i"] = e.i;
  j["j"] = e.j;
  j["gap"] = jnum(e.gap);
  return j;
}

long count_events(const Trajectory& traj, EventKind kind) {
  long n = 0;
  for (const auto& e : traj.events) n += e.kind == kind;
  return n;
}

double trace_min_gap(const Trajectory& traj) {
  double g = std::numeric_limits<double>::infinity();
  if (traj.empty()) return std::nan("");
  for (const auto& [t, gap] : min_gap_trace(traj)) g = std::min(g, gap);
  return g;
}

State load_initial(const RunConfig& cfg) {
  try {
    return initial_state(cfg);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("[initial] ") + e.what());
  }
}

template <class F>
Certificate guarded(CertificateKind kind, F f) {
  try {
    return f();
  } catch (const Error& e) {
    Certificate c;
    c.kind = kind;
    c.margin = std::nan("");
    c.note = std::string("evaluation failed: ") + e.what();
    return c;
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + "\"";
}

std::string csv_num(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return detail::format_number(v);
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("VCFLOCK_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

std::vector<Certificate> evaluate_certificates(const RunConfig& cfg, const State& state0) {
  const Kernel kernel = cfg.kernel();
  const VelocityControl g = cfg.gctrl();
  const double kappa = cfg.params.kappa;
  std::vector<Certificate> out;
  if (cfg.analysis.flocking_certificate) {
    out.push_back(guarded(CertificateKind::Flocking,
                          [&] { return flocking_certificate(state0, kernel, g, kappa); }));
  }
  if (cfg.analysis.collision_certificate) {
    out.push_back(guarded(CertificateKind::CollisionAvoidance,
                          [&] { return collision_certificate(state0, kernel, g, kappa); }));
  }
  if (cfg.analysis.regularity) {
    out.push_back(guarded(CertificateKind::Regularity, [&] { return regularity_certificate(state0, kernel, g); }));
  }
  return out;
}

RunOutcome run_config(const RunConfig& cfg) {
  validate_config(cfg);
  const State state0 = load_initial(cfg);
  const Kernel kernel = cfg.kernel();
  const VelocityControl g = cfg.gctrl();

  RunOutcome r;
  r.g_bounds = g.bounds(max_speed(state0));
  r.certificates = evaluate_certificates(cfg, state0);

  const auto start = std::chrono::steady_clock::now();
  try {
    if (kernel.kernel_class() == KernelClass::TypeII) {
      const LineSystem sys = LineSystem::from_initial(state0.q, state0.p, kernel, cfg.params.kappa, g);
      r.trajectory = simulate_line(sys, cfg.integrator.t_end, cfg.integrator).trajectory;
    } else {
      r.trajectory = integrate(state0, kernel, g, cfg.params, cfg.integrator);
    }
  } catch (const StepFloorHit& e) {
    if (e.partial()) r.trajectory = *e.partial();
    r.exit_code = kExitStepFloor;
    r.status = "step_floor";
    r.message = e.what();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    r.exit_code = kExitFailure;
    r.status = "error";
    r.message = e.what();
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (r.trajectory.empty()) return r;
  if (cfg.analysis.detect_flocking) {
    FlockingOptions fo;
    fo.tail_fraction = cfg.analysis.tail_fraction;
    try {
      r.flocking = detect_flocking(r.trajectory, fo);
    } catch (const Error& e) {
      r.flocking_error = e.what();
    }
  }
  if (cfg.analysis.detect_bicluster && cfg.params.n_agents >= 2) {
    BiclusterOptions bo;
    bo.tail_fraction = cfg.analysis.tail_fraction;
    r.bicluster_checked = true;
    try {
      r.bicluster = detect_bicluster(r.trajectory, bo);
    } catch (const Error&) {
      r.bicluster.reset();
    }
  }
  return r;
}

void write_artifacts(const RunConfig& cfg, const RunOutcome& outcome, const std::string& dir) {
  fs::create_directories(dir);
  const Kernel kernel = cfg.kernel();
  const auto metrics = snapshot_metrics(outcome.trajectory, kernel, outcome.g_bounds, cfg.params.kappa);
  {
    std::ofstream f(fs::path(dir) / "trajectory.jsonl", std::ios::binary);
    write_trajectory_jsonl(f, outcome.trajectory, metrics);
    if (!f) throw Error("failed to write trajectory.jsonl");
  }
  {
    std::ofstream f(fs::path(dir) / "plots.csv", std::ios::binary);
    write_plots_csv(f, metrics);
    if (!f) throw Error("failed to write plots.csv");
  }

  ojson s;
  s["config"] = config_json(cfg);
  s["status"] = outcome.status;
  s["exit_code"] = outcome.exit_code;
  s["message"] = outcome.message;
  s["n_snapshots"] = outcome.trajectory.snapshots.size();
  const auto& gb = outcome.g_bounds;
  s["g_bounds"] = {{"p0_max", jnum(gb.p0_max)},
                   {"m_gprime", jnum(gb.m_gprime)},
                   {"M_gprime", jnum(gb.M_gprime)},
                   {"M_script", jnum(gb.M_script)}};
  if (!outcome.trajectory.empty()) {
    const State& last = outcome.trajectory.snapshots.back();
    const DispersionReport rep = dispersions(last);
    ojson mean = ojson::array();
    for (double m : rep.mean_momentum) mean.push_back(jnum(m));
    s["final"] = {{"t", jnum(last.t)},         {"D_P", jnum(rep.d_p)},
                  {"D_Q", jnum(rep.d_q)},      {"norm_P", jnum(rep.norm_p)},
                  {"norm_Q", jnum(rep.norm_q)}, {"mean_momentum", mean},
                  {"min_gap", jnum(min_pair_gap(last))}, {"L", jnum(metrics.back().lyapunov)}};
  } else {
    s["final"] = nullptr;
  }
  ojson certs = ojson::array();
  for (const auto& c : outcome.certificates) certs.push_back(certificate_json(c));
  s["certificates"] = certs;

  ojson det = ojson::object();
  if (outcome.flocking) {
    const auto& v = *outcome.flocking;
    det["flocking"] = {{"is_flocking", v.is_flocking},
                       {"rate", jnum(v.rate)},
                       {"dq_growth", jnum(v.dq_growth)},
                       {"reached_floor", v.reached_floor},
                       {"samples", v.samples}};
  } else if (!outcome.flocking_error.empty()) {
    det["flocking"] = {{"error", outcome.flocking_error}};
  }
  if (outcome.bicluster_checked) {
    if (outcome.bicluster) {
      const auto& b = *outcome.bicluster;
      det["bicluster"] = {{"detected", true},
                          {"group", b.group},
                          {"complement", b.complement},
                          {"cross_gap_initial", jnum(b.cross_gap_initial)},
                          {"cross_gap_final", jnum(b.cross_gap_final)},
                          {"dp_group_final", jnum(b.dp_group_final)},
                          {"dp_complement_final", jnum(b.dp_complement_final)},
                          {"note", "separation growth is measured on the simulated window only"}};
    } else {
      det["bicluster"] = {{"detected", false}};
    }
  }
  s["detectors"] = det;

  ojson counts = ojson::object();
  for (EventKind k : kAllEvents) counts[std::string(to_string(k))] = count_events(outcome.trajectory, k);
  s["event_counts"] = counts;
  ojson events = ojson::array();
  for (const auto& e : outcome.trajectory.events) {
    if (e.kind != EventKind::GapMinimum) events.push_back(event_json(e));
  }
  s["events"] = events;
  s["min_gap"] = jnum(trace_min_gap(outcome.trajectory));
  s["wall_time"] = outcome.wall_time;

  std::ofstream f(fs::path(dir) / "summary.json", std::ios::binary);
  f << s.dump(2) << '\n';
  if (!f) throw Error("failed to write summary.json");
}

int cmd_simulate(const std::string& config_path, const std::optional<std::string>& out_dir,
                 std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  RunOutcome outcome;
  try {
    cfg = load_config(config_path);
    outcome = run_config(cfg);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  const std::string dir = out_dir.value_or(cfg.output_dir);
  try {
    write_artifacts(cfg, outcome, dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  if (outcome.exit_code != kExitOk) err << outcome.status << ": " << outcome.message << '\n';
  out << "status=" << outcome.status << " snapshots=" << outcome.trajectory.snapshots.size()
      << " dir=" << dir << '\n';
  return outcome.exit_code;
}

int cmd_certify(const std::string& config_path, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = load_config(config_path);
    const State state0 = load_initial(cfg);
    const GBounds gb = cfg.gctrl().bounds(max_speed(state0));
    ojson j;
    j["config"] = config_json(cfg);
    j["g_bounds"] = {{"p0_max", jnum(gb.p0_max)},
                     {"m_gprime", jnum(gb.m_gprime)},
                     {"M_gprime", jnum(gb.M_gprime)},
                     {"M_script", jnum(gb.M_script)}};
    ojson certs = ojson::array();
    for (const auto& c : evaluate_certificates(cfg, state0)) certs.push_back(certificate_json(c));
    j["certificates"] = certs;
    out << j.dump(2) << '\n';
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::optional<std::string>& out_dir, int workers,
              std::ostream& out, std::ostream& err) {
  RunConfig base;
  try {
    base = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto& axes = base.sweep.axes;
  long total = axes.empty() ? 0 : 1;
  for (const auto& a : axes) total *= static_cast<long>(a.values.size());
  if (total == 0) {
    err << "error: sweep grid is empty\n";
    return kExitConfig;
  }
  if (total > base.sweep.max_runs) {
    err << "error: sweep has " << total << " runs, above max_runs = " << base.sweep.max_runs << '\n';
    return kExitConfig;
  }

  struct Row {
    std::vector<double> point;
    std::string status;
    std::string error;
    std::optional<bool> is_flocking;
    double rate = std::nan("");
    double min_gap = std::nan("");
    std::vector<long> counts;
  };
  std::vector<Row> rows(static_cast<size_t>(total));
  for (long r = 0; r < total; ++r) {
    long rem = r;
    std::vector<double> point(axes.size());
    for (size_t a = axes.size(); a-- > 0;) {
      const long m = static_cast<long>(axes[a].values.size());
      point[a] = axes[a].values[static_cast<size_t>(rem % m)];
      rem /= m;
    }
    rows[static_cast<size_t>(r)].point = std::move(point);
  }

  std::atomic<long> next{0};
  const auto work = [&] {
    for (long r = next++; r < total; r = next++) {
      Row& row = rows[static_cast<size_t>(r)];
      try {
        RunConfig cfg = apply_sweep_point(base, row.point);
        cfg.analysis.detect_bicluster = false;
        const RunOutcome o = run_config(cfg);
        row.status = o.status;
        row.error = o.message;
        if (o.flocking) {
          row.is_flocking = o.flocking->is_flocking;
          row.rate = o.flocking->rate;
        }
        row.min_gap = trace_min_gap(o.trajectory);
        for (EventKind k : kAllEvents) row.counts.push_back(count_events(o.trajectory, k));
      } catch (const std::exception& e) {
        row.status = "error";
        row.error = e.what();
      }
    }
  };
  const int nw = std::min<long>(resolve_workers(workers), total);
  std::vector<std::thread> pool;
  for (int w = 1; w < nw; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  for (const auto& a : axes) csv << a.name << ',';
  csv << "status,is_flocking,rate,min_gap";
  for (EventKind k : kAllEvents) csv << ",n_" << to_string(k);
  csv << ",error\n";
  bool failed = false;
  for (const auto& row : rows) {
    for (double v : row.point) csv << detail::format_number(v) << ',';
    csv << row.status << ',' << (row.is_flocking ? (*row.is_flocking ? "true" : "false") : "") << ','
        << csv_num(row.rate) << ',' << csv_num(row.min_gap);
    for (size_t k = 0; k < std::size(kAllEvents); ++k) {
      csv << ',' << (k < row.counts.size() ? std::to_string(row.counts[k]) : "");
    }
    csv << ',' << csv_field(row.error) << '\n';
    failed = failed || row.status != "ok";
  }
  out << csv.str();
  const std::string dir = out_dir.value_or(base.output_dir);
  try {
    fs::create_directories(dir);
    std::ofstream f(fs::path(dir) / "sweep.csv", std::ios::binary);
    f << csv.str();
    if (!f) throw Error("failed to write sweep.csv");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return failed ? kExitFailure : kExitOk;
}

int cmd_fit_exponent(const FitRequest& req, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(req.trajectory_path);
    if (!in) throw ConfigError("cannot open trajectory '" + req.trajectory_path + "'");
    const Trajectory traj = read_trajectory_jsonl(in);
    const int i = std::min(req.pair.first, req.pair.second);
    const int j = std::max(req.pair.first, req.pair.second);
    if (i < 0 || j >= traj.n || i == j) throw ConfigError("pair must name two distinct agents");

    std::optional<double> t_star = req.t_star;
    if (!t_star && req.summary_path) {
      std::ifstream sf(*req.summary_path);
      if (!sf) throw ConfigError("cannot open summary '" + *req.summary_path + "'");
      const auto s = nlohmann::json::parse(sf);
      for (const auto& e : s.value("events", nlohmann::json::array())) {
        if (e.value("kind", "") == "StickStart" && e.value("i", -1) == i && e.value("j", -1) == j) {
          t_star = e["time"].get<double>();
          break;
        }
      }
      if (!t_star) throw InsufficientData("summary has no StickStart for this pair");
    }
    if (!t_star) {
      // First snapshot where the two agents coincide.
      for (const auto& snap : traj.snapshots) {
        bool same = true;
        for (int c = 0; c < traj.dim; ++c) same = same && snap.qi(i)[c] == snap.qi(j)[c];
        if (same) {
          t_star = snap.t;
          break;
        }
      }
      if (!t_star) throw InsufficientData("pair never coincides; pass --t-star or --summary");
    }
    const EventRecord ev{*t_star, EventKind::StickStart, i, j, 0.0};
    const PowerFit fit = fit_sticking_exponent(traj, ev, req.eps_min, req.eps_max);
    ojson o;
    o["pair"] = {i, j};
    o["t_star"] = jnum(*t_star);
    o["window"] = {req.eps_min, req.eps_max};
    o["slope"] = jnum(fit.slope);
    o["alpha_estimate"] = jnum(1.0 / fit.slope);
    o["intercept"] = jnum(fit.intercept);
    o["samples"] = fit.samples;
    out << o.dump(2) << '\n';
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace vcflock
