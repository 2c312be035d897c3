#include <gtest/gtest.h>

#include <cmath>

#include "provisim/simcluster.hpp"

using namespace provisim;

namespace {

WorkloadSpec quiet(std::vector<Phase> phases) {
  WorkloadSpec w;
  w.phases = std::move(phases);
  w.demand_noise = NoiseLaw::none();
  return w;
}

}  // namespace

TEST(GenDemand, Examples) {
  EXPECT_EQ(gen_demand(quiet({{0, 0}}), 3), (Vec{0, 0}));
  const Vec d = gen_demand(quiet({{0, 1000}}), 0);
  EXPECT_NEAR(d[0], 63.0, 1e-12);
  EXPECT_NEAR(d[1], 17.3, 1e-12);
}

TEST(GenDemand, Wl1Schedule) {
  auto w = WorkloadSpec::wl1();
  w.demand_noise = NoiseLaw::none();
  for (std::size_t k = 0; k < 50; ++k) {
    const bool surge = (k >= 10 && k < 25) || (k >= 30 && k < 45);
    EXPECT_NEAR(gen_demand(w, k)[0], 0.063 * (surge ? 1200 : 700), 1e-9) << k;
  }
}

TEST(GenDemand, ThinkTimeAndMultiplier) {
  auto w = quiet({{0, 1000, 1.5}});
  w.think = 14;
  EXPECT_NEAR(gen_demand(w, 0)[0], 63.0 * 0.5 * 1.5, 1e-12);
  auto wl2 = WorkloadSpec::wl2();
  wl2.demand_noise = NoiseLaw::none();
  EXPECT_GT(gen_demand(wl2, 12)[0], 0.063 * 1200);
}

TEST(GenDemand, NoiseIsSharedAndRegenerable) {
  const auto w = WorkloadSpec::wl1();
  const Vec a = gen_demand(w, 17), b = gen_demand(w, 17);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a[0] / 0.063, a[1] / 0.0173, 1e-9);
}

TEST(Serve, IdleRegion) {
  ServerModel m;
  m.measurement_noise = NoiseLaw::none();
  const NoiseStream s(1, "measurement");
  const auto r = serve(Vec{0, 0}, Vec{50, 50}, m, Vec{0, 0}, 5, 5, s, 0);
  EXPECT_EQ(r.mrt, m.r_base);
  EXPECT_EQ(r.completed, 0u);
}

TEST(Serve, ModerateLoadHasNoBacklog) {
  ServerModel m;
  const NoiseStream s(1, "measurement");
  const auto r = serve(Vec{40, 10}, Vec{80, 30}, m, Vec{0, 0}, 5, 5, s, 0);
  EXPECT_EQ(r.backlog, (Vec{0, 0}));
  EXPECT_TRUE(std::isfinite(r.mrt));
  EXPECT_LT(r.mrt, m.slo);
  EXPECT_EQ(r.completed, static_cast<std::uint64_t>(std::llround(3.0 * 50 * 5)));
}

TEST(Serve, OverloadGrowsBacklogLinearly) {
  ServerModel m;
  m.measurement_noise = NoiseLaw::none();
  const NoiseStream s(1, "measurement");
  Vec b{0, 0};
  double last_mrt = 0;
  for (int k = 1; k <= 20; ++k) {
    const auto r = serve(Vec{70, 10}, Vec{50, 50}, m, b, 5, 5, s, k);
    EXPECT_NEAR(r.backlog[0], 20.0 * 5 * k, 1e-9);
    EXPECT_EQ(r.backlog[1], 0.0);
    EXPECT_EQ(r.usage[0], 50.0);
    EXPECT_GT(r.mrt, last_mrt);
    last_mrt = r.mrt;
    b = r.backlog;
  }
  EXPECT_GT(last_mrt, 10.0);
}

TEST(Serve, InvariantsUnderNoise) {
  ServerModel m;
  m.measurement_noise = NoiseLaw::gaussian(30);
  const NoiseStream s(9, "measurement");
  Vec b{0, 0};
  for (std::size_t k = 0; k < 200; ++k) {
    const double dem = static_cast<double>((k * 37) % 101);
    const Vec d{dem, dem / 3}, a{std::max(20.0, 100.0 - dem / 2), 30};
    const auto r = serve(d, a, m, b, 5, 5, s, k);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_LE(r.usage[i], a[i]);
      EXPECT_LE(r.usage[i], d[i]);
      EXPECT_GE(r.backlog[i], 0.0);
      EXPECT_GE(r.observation[i], 0.0);
      EXPECT_LE(r.observation[i], 100.0);
    }
    EXPECT_GE(r.mrt, m.r_base);
    b = r.backlog;
  }
}

TEST(Serve, RejectsBadAllocation) {
  const NoiseStream s(1, "measurement");
  EXPECT_THROW(serve(Vec{1, 1}, Vec{120, 10}, ServerModel{}, Vec{0, 0}, 5, 5, s, 0), UsageError);
  EXPECT_THROW(serve(Vec{1, 1}, Vec{10}, ServerModel{}, Vec{0, 0}, 5, 5, s, 0), UsageError);
}

TEST(RunStatic, AbundantResourcesObeySlo) {
  const auto r = run_static(quiet({{0, 1000}}), ServerModel{}, Vec{100, 100}, 50);
  EXPECT_EQ(r.metrics.sloo, 1.0);
  EXPECT_GT(r.metrics.completed, 0u);
}

TEST(RunScenario, DeterministicMetrics) {
  ControllerSpec c;
  c.filter = FilterKind::mcc;
  c.topology = Topology::mimo;
  const auto a = run_scenario(WorkloadSpec::wl1(), ServerModel{}, c, 50);
  const auto b = run_scenario(WorkloadSpec::wl1(), ServerModel{}, c, 50);
  EXPECT_EQ(a.metrics, b.metrics);
  auto w = WorkloadSpec::wl1();
  w.seed = 43;
  EXPECT_FALSE(run_scenario(w, ServerModel{}, c, 50).metrics == a.metrics);
}

TEST(RunScenario, FirstIntervalAtFullAllocation) {
  const auto r = run_scenario(WorkloadSpec::wl1(), ServerModel{}, ControllerSpec{}, 50);
  ASSERT_EQ(r.records.size(), 50u);
  EXPECT_EQ(r.records[0].allocation, (Vec{100, 100}));
  EXPECT_EQ(r.decisions.size(), 50u);
  EXPECT_EQ(r.records[1].allocation, r.decisions[0].a_next);
  EXPECT_THROW(run_scenario(WorkloadSpec::wl1(), ServerModel{}, ControllerSpec{}, 3), UsageError);
}

TEST(Score, WeightsByCompletedRequests) {
  std::vector<StepRecord> recs(2);
  recs[0].usage = {10, 1};
  recs[0].mrt = 0.2;
  recs[0].completed = 300;
  recs[1].usage = {30, 3};
  recs[1].mrt = 1.0;
  recs[1].completed = 100;
  const auto m = score(recs, 0.5);
  EXPECT_EQ(m.completed, 400u);
  EXPECT_DOUBLE_EQ(m.amrt, (0.2 * 300 + 1.0 * 100) / 400);
  EXPECT_DOUBLE_EQ(m.sloo, 0.75);
  EXPECT_DOUBLE_EQ(m.avg_cpu_vm1, 20.0);
  EXPECT_DOUBLE_EQ(m.avg_cpu_vm2, 2.0);
}

TEST(Knee, DefaultModelInBand) {
  const ServerModel m;
  const Vec g{0.063, 0.0173};
  const auto n = calibrate_knee(m, g);
  EXPECT_GE(n, 1200u);
  EXPECT_LE(n, 1500u);
  EXPECT_GT(steady_state_mrt(m, g, 7, static_cast<double>(n)), m.slo);
  EXPECT_LE(steady_state_mrt(m, g, 7, static_cast<double>(n - 1)), m.slo);
}

TEST(Knee, EdgeCases) {
  ServerModel m;
  m.r_base = 0.6;
  EXPECT_EQ(calibrate_knee(m, Vec{0.063, 0.0173}), 0u);
  const ServerModel d;
  const auto base = calibrate_knee(d, Vec{0.063, 0.0173});
  const auto doubled = calibrate_knee(d, Vec{0.126, 0.0346});
  EXPECT_NEAR(static_cast<double>(doubled), base / 2.0, 1.0);
}

TEST(NoiseStream, Independence) {
  const NoiseStream a(1, "demand"), b(1, "measurement"), c(2, "demand");
  EXPECT_NE(a.uniform01(0, 0, 0), b.uniform01(0, 0, 0));
  EXPECT_NE(a.uniform01(0, 0, 0), c.uniform01(0, 0, 0));
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double z = a.normal(k, 0, 0);
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}
