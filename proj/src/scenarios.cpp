#include <random>

#include "vcflock/config.hpp"
#include "vcflock/error.hpp"

namespace vcflock {

namespace {

// Fixed 53-bit mapping so generated data does not depend on the standard
// library's distribution implementations.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : eng_(seed) {}
  double operator()(double lo, double hi) {
    const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace

State initial_state(const RunConfig& cfg) {
  const int n = cfg.params.n_agents;
  const int d = cfg.params.dim;
  State s(n, d);
  const auto& in = cfg.initial;
  switch (in.kind) {
    case InitialKind::Inline:
      s.q = in.q;
      s.p = in.p;
      break;
    case InitialKind::UniformBox: {
      if (!in.seed) throw ConfigError("[initial] generator requires a seed");
      Uniform u(*in.seed);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) s.qi(i)[k] = u(-in.box, in.box);
        for (int k = 0; k < d; ++k) s.pi(i)[k] = u(-in.speed, in.speed);
      }
      break;
    }
    case InitialKind::TwoCluster: {
      if (!in.seed) throw ConfigError("[initial] generator requires a seed");
      Uniform u(*in.seed);
      const int na = in.group_size > 0 ? in.group_size : n / 2;
      for (int i = 0; i < n; ++i) {
        const double side = i < na ? -1.0 : 1.0;
        for (int k = 0; k < d; ++k) {
          s.qi(i)[k] = (k == 0 ? side * 0.5 * in.separation : 0.0) + u(-in.jitter, in.jitter);
          s.pi(i)[k] = (k == 0 ? side * in.group_speed : 0.0) + u(-in.jitter, in.jitter);
        }
      }
      break;
    }
  }
  s.validate(cfg.params);
  return s;
}

}  // namespace vcflock
