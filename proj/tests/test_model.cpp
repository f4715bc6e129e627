#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_util.hpp"
#include "vcflock/error.hpp"
#include "vcflock/model.hpp"

using namespace vcflock;

namespace {

// Straightforward double loop over all k for each i.
Derivative naive_rhs(const State& s, const Kernel& k, const VelocityControl& g, double kappa) {
  Derivative d;
  d.dq.resize(s.q.size());
  d.dp.assign(s.p.size(), 0.0);
  std::vector<double> v(s.p.size());
  for (int i = 0; i < s.n; ++i) g.apply(s.p.data() + i * s.dim, v.data() + i * s.dim, s.dim);
  d.dq = v;
  for (int i = 0; i < s.n; ++i) {
    for (int j = 0; j < s.n; ++j) {
      if (i == j) continue;
      double r2 = 0.0;
      for (int c = 0; c < s.dim; ++c) r2 += std::pow(s.q[j * s.dim + c] - s.q[i * s.dim + c], 2);
      const double w = k.psi(std::sqrt(r2)) * kappa / s.n;
      for (int c = 0; c < s.dim; ++c) d.dp[i * s.dim + c] += w * (v[j * s.dim + c] - v[i * s.dim + c]);
    }
  }
  return d;
}

}  // namespace

TEST(Model, TwoAgentHandValue) {
  State s(2, 1);
  s.q = {0.0, 1.0};
  s.p = {0.0, 1.0};
  const Derivative d = rhs(s, Kernel::rational(2.0), VelocityControl::identity(), {2, 1, 1.0});
  EXPECT_DOUBLE_EQ(d.dp[0], 0.125);
  EXPECT_DOUBLE_EQ(d.dp[1], -0.125);
  EXPECT_EQ(d.dq, s.p);
}

TEST(Model, SingleAgentAndEqualMomenta) {
  State one(1, 2);
  one.q = {1.0, 2.0};
  one.p = {3.0, -4.0};
  const auto th = VelocityControl::saturating_tanh(2.0);
  Derivative d = rhs(one, Kernel::power_law(1.5), th, {1, 2, 3.0});
  EXPECT_EQ(d.dp, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(d.dq, th.apply(one.p));

  vcftest::Rng rng(5);
  State s = vcftest::random_state(rng, 7, 3, 2.0, 1.0);
  for (int i = 0; i < 7; ++i) std::copy_n(s.p.begin(), 3, s.p.begin() + 3 * i);
  d = rhs(s, Kernel::power_law(2.0), th, {7, 3, 4.0});
  for (double x : d.dp) EXPECT_EQ(x, 0.0);
}

TEST(Model, MatchesNaiveEvaluation) {
  vcftest::Rng rng(11);
  const std::vector<Kernel> kernels{Kernel::rational(1.5), Kernel::power_law(0.5), Kernel::power_law(2.0),
                                    Kernel::cucker_smale(0.5)};
  const std::vector<VelocityControl> gs{VelocityControl::identity(), VelocityControl::saturating_tanh(0.7),
                                        VelocityControl::relativistic(2.0)};
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.integer(2, 12);
    const int dim = rng.integer(1, 3);
    const State s = vcftest::random_state(rng, n, dim, 3.0, 2.0);
    const auto& k = kernels[trial % kernels.size()];
    const auto& g = gs[trial % gs.size()];
    const double kappa = rng.uniform(0.1, 5.0);
    const Derivative d = rhs(s, k, g, {n, dim, kappa});
    const Derivative ref = naive_rhs(s, k, g, kappa);
    for (size_t c = 0; c < d.dp.size(); ++c) {
      EXPECT_NEAR(d.dp[c], ref.dp[c], 1e-12 * (1.0 + std::abs(ref.dp[c])));
      EXPECT_EQ(d.dq[c], ref.dq[c]);
    }
  }
}

TEST(Model, MomentumDerivativeSumsToZero) {
  vcftest::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.integer(2, 16);
    const int dim = rng.integer(1, 3);
    const State s = vcftest::random_state(rng, n, dim, 2.0, 1.0);
    const Derivative d = rhs(s, Kernel::rational(2.0), VelocityControl::saturating_tanh(1.0), {n, dim, 2.0});
    for (int c = 0; c < dim; ++c) {
      double sum = 0.0;
      double mag = 0.0;
      for (int i = 0; i < n; ++i) {
        sum += d.dp[i * dim + c];
        mag += std::abs(d.dp[i * dim + c]);
      }
      EXPECT_LE(std::abs(sum), 1e-14 * (1.0 + mag));
    }
  }
}

TEST(Model, RelabellingPermutesOutputExactly) {
  vcftest::Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.integer(3, 10);
    const int dim = rng.integer(1, 3);
    const State s = vcftest::random_state(rng, n, dim, 2.0, 1.0);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    State t(n, dim);
    for (int i = 0; i < n; ++i) {
      std::copy_n(s.qi(perm[i]).begin(), dim, t.qi(i).begin());
      std::copy_n(s.pi(perm[i]).begin(), dim, t.pi(i).begin());
    }
    const Params par{n, dim, 1.3};
    const Derivative a = rhs(s, Kernel::power_law(1.5), VelocityControl::relativistic(1.0), par);
    const Derivative b = rhs(t, Kernel::power_law(1.5), VelocityControl::relativistic(1.0), par);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < dim; ++c) EXPECT_EQ(b.dp[i * dim + c], a.dp[perm[i] * dim + c]);
    }
  }
}

TEST(Model, CoincidentSingularAgentsThrow) {
  State s(2, 1);
  s.q = {0.5, 0.5};
  s.p = {1.0, -1.0};
  EXPECT_THROW(rhs(s, Kernel::power_law(1.5), VelocityControl::identity(), {2, 1, 1.0}), Error);
}

TEST(Model, StateHelpers) {
  State s(2, 2);
  s.p = {1.0, 0.0, -1.0, 0.0};
  EXPECT_EQ(momentum_sum(s), (std::vector<double>{0.0, 0.0}));
  s.p = {3.0, 4.0, 0.0, 1.0};
  EXPECT_EQ(max_speed(s), 5.0);
  State one(1, 1);
  one.p = {3.5};
  EXPECT_EQ(momentum_sum(one), std::vector<double>{3.5});
  EXPECT_EQ(min_pair_gap(one), INFINITY);

  State t(3, 1);
  t.q = {0.0, 1.0, 3.0};
  EXPECT_EQ(min_pair_gap(t), 1.0);
  const ClosestPair cp = closest_pair(t);
  EXPECT_EQ(cp.i, 0);
  EXPECT_EQ(cp.j, 1);
}

TEST(Model, ValidateRejectsBadState) {
  State s(2, 1);
  s.q = {0.0, NAN};
  EXPECT_THROW(s.validate({2, 1, 1.0}), DomainError);
  State ok(2, 1);
  EXPECT_THROW(ok.validate({3, 1, 1.0}), DomainError);
  EXPECT_THROW((Params{0, 1, 1.0}.validate()), DomainError);
  EXPECT_THROW((Params{2, 1, -1.0}.validate()), DomainError);
}
