#include "vcflock/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "spec_string.hpp"
#include "vcflock/error.hpp"

namespace vcflock {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("key '" + key + "': invalid number '" + t + "'");
  }
  return v;
}

long to_long(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError("key '" + key + "': expected an integer");
  return static_cast<long>(v);
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::string item;
  for (char ch : text + ",") {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!trim(item).empty()) out.push_back(to_double(key, item));
      item.clear();
    } else {
      item += ch;
    }
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false");
}

// Iterates a section, rejecting keys outside `allowed`.
template <class F>
void each_key(const pt::ptree& root, const std::string& section, const std::set<std::string>& allowed,
              F f) {
  const auto child = root.get_child_optional(section);
  if (!child) return;
  for (const auto& [key, node] : *child) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    f(key, node.data());
  }
}

const std::set<std::string> kSweepAxes = {"alpha", "beta", "c", "eps", "kappa", "rate", "seed"};

}  // namespace

void validate_config(const RunConfig& cfg) {
  try {
    cfg.params.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  cfg.integrator.validate();
  const Kernel kernel = cfg.kernel();
  cfg.gctrl();
  if (kernel.kernel_class() == KernelClass::TypeII && cfg.params.dim >= 2) {
    throw OutOfScope("out of scope: weak solutions in d≥2");
  }
  if (!(cfg.integrator.t_end > 0.0)) throw ConfigError("[integrator] t_end must be positive");

  const auto& in = cfg.initial;
  const size_t nd = static_cast<size_t>(cfg.params.n_agents) * cfg.params.dim;
  if (in.kind == InitialKind::Inline) {
    if (in.q.size() != nd || in.p.size() != nd) {
      throw ConfigError("[initial] q and p need n_agents * dim = " + std::to_string(nd) + " values each");
    }
  } else {
    if (!in.seed) throw ConfigError("[initial] generator requires a seed");
    if (in.kind == InitialKind::UniformBox && (!(in.box > 0.0) || !(in.speed >= 0.0))) {
      throw ConfigError("[initial] box must be > 0 and speed >= 0");
    }
    if (in.kind == InitialKind::TwoCluster) {
      if (cfg.params.n_agents < 2) throw ConfigError("[initial] two_cluster needs n_agents >= 2");
      if (in.group_size < 0 || in.group_size >= cfg.params.n_agents) {
        throw ConfigError("[initial] group_size must lie in [1, n_agents - 1]");
      }
      if (!(in.jitter >= 0.0) || !(in.separation > 0.0)) {
        throw ConfigError("[initial] separation must be > 0 and jitter >= 0");
      }
    }
  }
  if (!(cfg.analysis.tail_fraction > 0.0 && cfg.analysis.tail_fraction <= 1.0)) {
    throw ConfigError("[analysis] tail_fraction must lie in (0, 1]");
  }
}

RunConfig parse_config(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::set<std::string> sections = {"model", "initial", "integrator", "output", "analysis", "sweep"};
  // The INI reader drops sections without keys, so headers are checked on the raw text.
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const std::string t = trim(line);
      if (t.size() >= 2 && t.front() == '[' && t.back() == ']' && !sections.count(trim(t.substr(1, t.size() - 2)))) {
        throw ConfigError("unknown section " + t);
      }
    }
  }
  pt::ptree root;
  try {
    std::istringstream body(text);
    pt::read_ini(body, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  for (const auto& [name, node] : root) {
    if (!sections.count(name)) throw ConfigError("unknown section [" + name + "]");
    if (node.empty() && !node.data().empty()) throw ConfigError("key '" + name + "' outside a section");
  }

  RunConfig cfg;
  each_key(root, "model", {"n_agents", "dim", "kappa", "kernel", "gctrl"}, [&](const auto& k, const auto& v) {
    if (k == "n_agents") cfg.params.n_agents = static_cast<int>(to_long(k, v));
    if (k == "dim") cfg.params.dim = static_cast<int>(to_long(k, v));
    if (k == "kappa") cfg.params.kappa = to_double(k, v);
    if (k == "kernel") cfg.kernel_spec = trim(v);
    if (k == "gctrl") cfg.gctrl_spec = trim(v);
  });

  auto& ini = cfg.initial;
  bool have_q = false;
  bool have_p = false;
  std::string generator;
  each_key(root, "initial",
           {"q", "p", "generator", "seed", "box", "speed", "separation", "group_speed", "jitter", "group_size"},
           [&](const auto& k, const auto& v) {
             if (k == "q") ini.q = to_list(k, v), have_q = true;
             if (k == "p") ini.p = to_list(k, v), have_p = true;
             if (k == "generator") generator = trim(v);
             if (k == "seed") {
               const long s = to_long(k, v);
               if (s < 0) throw ConfigError("seed must be >= 0");
               ini.seed = static_cast<std::uint64_t>(s);
             }
             if (k == "box") ini.box = to_double(k, v);
             if (k == "speed") ini.speed = to_double(k, v);
             if (k == "separation") ini.separation = to_double(k, v);
             if (k == "group_speed") ini.group_speed = to_double(k, v);
             if (k == "jitter") ini.jitter = to_double(k, v);
             if (k == "group_size") ini.group_size = static_cast<int>(to_long(k, v));
           });
  if (generator.empty()) {
    if (!have_q || !have_p) throw ConfigError("[initial] needs q and p, or a generator");
    ini.kind = InitialKind::Inline;
  } else {
    if (have_q || have_p) throw ConfigError("[initial] cannot combine inline q/p with a generator");
    if (generator == "uniform_box") {
      ini.kind = InitialKind::UniformBox;
    } else if (generator == "two_cluster") {
      ini.kind = InitialKind::TwoCluster;
    } else {
      throw ConfigError("unknown generator '" + generator + "'");
    }
  }

  auto& ic = cfg.integrator;
  each_key(root, "integrator",
           {"t_end", "rel_tol", "abs_tol", "dt_init", "dt_min", "dt_max", "gap_safety", "gap_threshold",
            "max_steps", "detect_gap_minima"},
           [&](const auto& k, const auto& v) {
             if (k == "t_end") ic.t_end = to_double(k, v);
             if (k == "rel_tol") ic.rel_tol = to_double(k, v);
             if (k == "abs_tol") ic.abs_tol = to_double(k, v);
             if (k == "dt_init") ic.dt_init = to_double(k, v);
             if (k == "dt_min") ic.dt_min = to_double(k, v);
             if (k == "dt_max") ic.dt_max = to_double(k, v);
             if (k == "gap_safety") ic.gap_safety = to_double(k, v);
             if (k == "gap_threshold") ic.gap_threshold = to_double(k, v);
             if (k == "max_steps") ic.max_steps = to_long(k, v);
             if (k == "detect_gap_minima") ic.detect_gap_minima = to_bool(k, v);
           });

  each_key(root, "output", {"dir", "stride"}, [&](const auto& k, const auto& v) {
    if (k == "dir") cfg.output_dir = trim(v);
    if (k == "stride") cfg.integrator.stride = static_cast<int>(to_long(k, v));
  });

  auto& an = cfg.analysis;
  each_key(root, "analysis",
           {"flocking_certificate", "collision_certificate", "regularity", "detect_flocking", "detect_bicluster",
            "tail_fraction"},
           [&](const auto& k, const auto& v) {
             if (k == "flocking_certificate") an.flocking_certificate = to_bool(k, v);
             if (k == "collision_certificate") an.collision_certificate = to_bool(k, v);
             if (k == "regularity") an.regularity = to_bool(k, v);
             if (k == "detect_flocking") an.detect_flocking = to_bool(k, v);
             if (k == "detect_bicluster") an.detect_bicluster = to_bool(k, v);
             if (k == "tail_fraction") an.tail_fraction = to_double(k, v);
           });

  std::set<std::string> sweep_keys = kSweepAxes;
  sweep_keys.insert("max_runs");
  each_key(root, "sweep", sweep_keys, [&](const auto& k, const auto& v) {
    if (k == "max_runs") {
      cfg.sweep.max_runs = to_long(k, v);
      return;
    }
    cfg.sweep.axes.push_back({k, to_list(k, v)});
  });
  std::sort(cfg.sweep.axes.begin(), cfg.sweep.axes.end(),
            [](const SweepAxis& a, const SweepAxis& b) { return a.name < b.name; });
  if (cfg.sweep.axes.size() > 3) throw ConfigError("[sweep] supports at most 3 parameters");

  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

RunConfig apply_sweep_point(const RunConfig& base, const std::vector<double>& point) {
  if (point.size() != base.sweep.axes.size()) throw ConfigError("sweep point has wrong arity");
  RunConfig cfg = base;
  auto kernel = detail::parse_spec_string(cfg.kernel_spec);
  auto gctrl = detail::parse_spec_string(cfg.gctrl_spec);
  for (size_t a = 0; a < point.size(); ++a) {
    const std::string& name = base.sweep.axes[a].name;
    const double v = point[a];
    if (name == "kappa") {
      cfg.params.kappa = v;
    } else if (name == "seed") {
      if (cfg.initial.kind == InitialKind::Inline) throw ConfigError("seed sweep needs a generator");
      if (v < 0.0 || v != std::floor(v)) throw ConfigError("seed values must be nonnegative integers");
      cfg.initial.seed = static_cast<std::uint64_t>(v);
    } else if (name == "eps" || name == "c") {
      if (!gctrl.args.count(name)) throw ConfigError("velocity control has no parameter '" + name + "'");
      gctrl.args[name] = v;
    } else {
      if (!kernel.args.count(name)) throw ConfigError("kernel has no parameter '" + name + "'");
      kernel.args[name] = v;
    }
  }
  cfg.kernel_spec = detail::format_spec(kernel);
  cfg.gctrl_spec = detail::format_spec(gctrl);
  validate_config(cfg);
  return cfg;
}

}  // namespace vcflock
