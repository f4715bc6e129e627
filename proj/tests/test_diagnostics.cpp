#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vcflock/diagnostics.hpp"
#include "vcflock/error.hpp"
#include "vcflock/integrator.hpp"
#include "vcflock/line1d.hpp"

using namespace vcflock;

namespace {

State two_agent_example() {
  State s(2, 1);
  s.q = {0.0, 1.0};
  s.p = {0.5, -0.5};
  return s;
}

Trajectory run(const State& s, const Kernel& k, const VelocityControl& g, double kappa, double t_end) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  return integrate(s, k, g, {s.n, s.dim, kappa}, cfg);
}

State planted_two_groups() {
  State s(8, 1);
  for (int i = 0; i < 8; ++i) {
    const double side = i < 4 ? -1.0 : 1.0;
    s.q[i] = side * 5.0 + 0.3 * (i % 4) - 0.45;
    s.p[i] = side * 1.0 + 0.1 * ((i * 7) % 4) - 0.15;
  }
  return s;
}

}  // namespace

TEST(Dispersions, OrderedPairConvention) {
  State s(2, 1);
  s.q = {0.0, 1.0};
  auto r = dispersions(s);
  EXPECT_EQ(r.d_q, 1.0);
  EXPECT_DOUBLE_EQ(r.norm_q, std::sqrt(2.0));

  State t(3, 1);
  t.q = {0.0, 1.0, 3.0};
  r = dispersions(t);
  EXPECT_EQ(r.d_q, 3.0);
  EXPECT_DOUBLE_EQ(r.norm_q * r.norm_q, 28.0);

  State same(4, 2);
  for (int i = 0; i < 4; ++i) same.q[2 * i] = 1.0, same.p[2 * i + 1] = -2.0;
  r = dispersions(same);
  EXPECT_EQ(r.d_p, 0.0);
  EXPECT_EQ(r.d_q, 0.0);
  EXPECT_EQ(r.norm_p, 0.0);
  EXPECT_EQ(r.norm_q, 0.0);
  EXPECT_EQ(r.mean_momentum, (std::vector<double>{0.0, -2.0}));

  const std::vector<int> sub{0, 2};
  r = dispersions(t, sub);
  EXPECT_EQ(r.d_q, 3.0);
  const std::vector<int> bad{0, 5};
  EXPECT_THROW(dispersions(t, bad), DomainError);
}

TEST(Lyapunov, InitialValueAndMonotonicity) {
  const State s = two_agent_example();
  const Kernel k = Kernel::rational(2.0);
  const GBounds gb = VelocityControl::identity().bounds(max_speed(s));
  const double q0 = dispersions(s).norm_q;
  EXPECT_EQ(lyapunov(s, q0, k, gb, 10.0), dispersions(s).norm_p);

  const Trajectory tr = run(s, k, VelocityControl::identity(), 10.0, 5.0);
  double prev = INFINITY;
  for (const auto& snap : tr.snapshots) {
    const double l = lyapunov(snap, q0, k, gb, 10.0);
    EXPECT_LE(l, prev + 1e-6);
    prev = std::min(prev, l);
  }
}

TEST(FlockingCertificate, TypeIExample) {
  const State s = two_agent_example();
  const Certificate c = flocking_certificate(s, Kernel::rational(2.0), VelocityControl::identity(), 10.0);
  EXPECT_TRUE(c.holds);
  EXPECT_NEAR(*c.input("rhs"), 10.0 / (1.0 + std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(*c.input("norm_p0"), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(*c.input("M_script"), 1.0);
  EXPECT_EQ(*c.input("M_gprime"), 1.0);
  EXPECT_NEAR(c.margin, 10.0 / (1.0 + std::sqrt(2.0)) - std::sqrt(2.0), 1e-12);

  const Certificate weak = flocking_certificate(s, Kernel::rational(2.0), VelocityControl::identity(), 1.0);
  EXPECT_FALSE(weak.holds);
  EXPECT_LT(weak.margin, 0.0);

  const Certificate sing = flocking_certificate(s, Kernel::power_law(0.5), VelocityControl::identity(), 0.01);
  EXPECT_TRUE(sing.holds);
  EXPECT_EQ(sing.margin, INFINITY);
}

TEST(CollisionCertificate, ZeroMomentumSpread) {
  State s(3, 2);
  s.q = {0.0, 0.0, 2.0, 0.0, 0.0, 3.0};
  s.p = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
  const Certificate c = collision_certificate(s, Kernel::rational(2.0), VelocityControl::identity(), 1.0);
  EXPECT_TRUE(c.holds);
  ASSERT_TRUE(c.bound);
  EXPECT_NEAR(*c.bound, 2.0, 1e-12);
}

TEST(CollisionCertificate, MatchesBruteForceSearch) {
  const State s = two_agent_example();
  const Kernel k = Kernel::rational(2.0);
  for (double kappa : {20.0, 50.0, 100.0}) {
    const Certificate c = collision_certificate(s, k, VelocityControl::identity(), kappa);
    ASSERT_TRUE(c.holds) << kappa;
    ASSERT_TRUE(c.bound);
    // Independent scan with closed-form psi and its integral.
    const double q0 = std::sqrt(2.0);
    const double lhs = std::sqrt(2.0) / kappa;
    double first_feasible = NAN;
    for (double m = q0; m < 1e4; m *= 1.0 + 1e-6) {
      const double integral = 1.0 / (1.0 + q0) - 1.0 / (1.0 + m);
      const double psi = 1.0 / ((1.0 + m) * (1.0 + m));
      if (lhs < std::min(integral, psi * 1.0)) {
        first_feasible = m;
        break;
      }
    }
    ASSERT_FALSE(std::isnan(first_feasible));
    const double bf_bound = 1.0 - lhs * (1.0 + first_feasible) * (1.0 + first_feasible);
    EXPECT_GE(*c.bound, bf_bound - 1e-12);
    EXPECT_NEAR(*c.bound, bf_bound, 1e-5);
    EXPECT_GT(*c.bound, 0.0);
  }
  // At kappa = 10 the integral condition needs M > 2.66 while psi(M) > lhs needs M < 1.66.
  EXPECT_FALSE(collision_certificate(s, k, VelocityControl::identity(), 10.0).holds);
  const Certificate weak = collision_certificate(s, k, VelocityControl::identity(), 1.0);
  EXPECT_FALSE(weak.holds);
  EXPECT_FALSE(weak.bound);
}

TEST(CollisionCertificate, NotApplicableForWeakSingularity) {
  const Certificate c =
      collision_certificate(two_agent_example(), Kernel::power_law(0.5), VelocityControl::identity(), 1.0);
  EXPECT_FALSE(c.holds);
  EXPECT_EQ(c.margin, -INFINITY);
}

TEST(RegularityCertificate, Values) {
  const Certificate c =
      regularity_certificate(two_agent_example(), Kernel::power_law(0.5), VelocityControl::identity());
  EXPECT_DOUBLE_EQ(*c.input("K"), 0.5);
  EXPECT_DOUBLE_EQ(*c.input("gamma_sup"), 2.0);
  const Certificate na =
      regularity_certificate(two_agent_example(), Kernel::rational(2.0), VelocityControl::identity());
  EXPECT_FALSE(na.holds);
}

TEST(DetectFlocking, CertifiedRunFlocks) {
  const State s = two_agent_example();
  const Trajectory tr = run(s, Kernel::rational(2.0), VelocityControl::identity(), 10.0, 20.0);
  const FlockingVerdict v = detect_flocking(tr);
  EXPECT_TRUE(v.is_flocking);
  double sup_q = 0.0;
  for (const auto& snap : tr.snapshots) sup_q = std::max(sup_q, dispersions(snap).norm_q);
  EXPECT_GE(v.rate, 0.9 * 10.0 * Kernel::rational(2.0).psi(sup_q));
}

TEST(DetectFlocking, SingleAgentIsVacuous) {
  State s(1, 2);
  s.p = {1.0, 0.0};
  IntegratorConfig cfg;
  cfg.t_end = 5.0;
  cfg.dt_max = 0.1;
  const Trajectory tr = integrate(s, Kernel::rational(2.0), VelocityControl::identity(), {1, 2, 1.0}, cfg);
  ASSERT_GE(tr.snapshots.size(), 16u);
  const FlockingVerdict v = detect_flocking(tr);
  EXPECT_TRUE(v.is_flocking);
}

TEST(DetectFlocking, TooShortThrows) {
  Trajectory tr;
  tr.n = 2;
  tr.dim = 1;
  tr.snapshots.resize(3, State(2, 1));
  EXPECT_THROW(detect_flocking(tr), InsufficientData);
}

TEST(Bicluster, PlantedPartitionIsFound) {
  const State s = planted_two_groups();
  const Trajectory tr = run(s, Kernel::rational(2.0), VelocityControl::identity(), 5.0, 40.0);
  EXPECT_FALSE(detect_flocking(tr).is_flocking);
  const auto b = detect_bicluster(tr);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->group, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(b->complement, (std::vector<int>{4, 5, 6, 7}));
  EXPECT_LT(b->dp_group_final, 1e-3);
  EXPECT_LT(b->dp_complement_final, 1e-3);
  EXPECT_GE(b->cross_gap_final, 2.0 * b->cross_gap_initial);
}

TEST(Bicluster, MonoFlockAndStuckPairGiveNone) {
  const Trajectory tr = run(two_agent_example(), Kernel::rational(2.0), VelocityControl::identity(), 10.0, 20.0);
  EXPECT_FALSE(detect_bicluster(tr));

  const LineSystem sys = LineSystem::from_initial({1.0, 0.0}, std::vector<double>{-1.0, 1.0},
                                                  Kernel::power_law(0.5), 1.0, VelocityControl::identity());
  const LineRun lr = simulate_line(sys, 3.0, {});
  EXPECT_FALSE(detect_bicluster(lr.trajectory));
}

TEST(Dissipation, FullSystemAndSubsets) {
  const Trajectory tr = run(two_agent_example(), Kernel::rational(2.0), VelocityControl::identity(), 10.0, 5.0);
  const auto full = verify_dissipation(tr, {}, Kernel::rational(2.0), VelocityControl::identity(), {2, 1, 10.0});
  EXPECT_LE(full.max_violation, 1e-5);
  EXPECT_GT(full.samples, 10);

  vcftest::Rng rng(9);
  const State s = vcftest::random_state(rng, 5, 2, 2.0, 1.0);
  const auto g = VelocityControl::saturating_tanh(1.0);
  const Trajectory t5 = run(s, Kernel::rational(1.0), g, 2.0, 6.0);
  const std::vector<int> sub{0, 2, 3};
  const auto part = verify_dissipation(t5, sub, Kernel::rational(1.0), g, {5, 2, 2.0});
  EXPECT_LE(part.max_violation, 1e-4);

  State eq(3, 1);
  eq.q = {0.0, 1.0, 2.0};
  eq.p = {0.4, 0.4, 0.4};
  const Trajectory te = run(eq, Kernel::rational(2.0), VelocityControl::identity(), 1.0, 2.0);
  const auto flat = verify_dissipation(te, {}, Kernel::rational(2.0), VelocityControl::identity(), {3, 1, 1.0});
  EXPECT_LE(flat.max_violation, 1e-12);

  EXPECT_THROW(verify_dissipation(te, {}, Kernel::power_law(1.5), VelocityControl::identity(), {3, 1, 1.0}),
               DomainError);
}
