#include <gtest/gtest.h>

#include <random>

#include "provisim/provisioner.hpp"

using provisim::AllocationPolicy;
using provisim::ControlLoop;
using provisim::ControllerSpec;
using provisim::FilterKind;
using provisim::Topology;
using provisim::Vec;

TEST(Allocate, Examples) {
  const AllocationPolicy p{0.25, 20, 100};
  EXPECT_EQ(provisim::allocate(Vec{60}, p)[0], 75.0);
  EXPECT_EQ(provisim::allocate(Vec{90}, p)[0], 100.0);
  EXPECT_EQ(provisim::allocate(Vec{10}, p)[0], 20.0);
  EXPECT_EQ(provisim::allocate(Vec{-5}, p)[0], 20.0);
}

TEST(Allocate, Properties) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ux(-20, 150), uc(0.51, 0.99);
  for (int t = 0; t < 5000; ++t) {
    const auto p = AllocationPolicy::from_ratio(uc(rng));
    const double x = ux(rng), x2 = x + std::abs(ux(rng)) / 10;
    const double a = provisim::allocate(Vec{x}, p)[0];
    EXPECT_GE(a, p.a_min);
    EXPECT_LE(a, p.a_max);
    EXPECT_LE(a, provisim::allocate(Vec{x2}, p)[0]);
    if (a > p.a_min && a < p.a_max) {
      EXPECT_NEAR(x / a, p.ratio(), 1e-12);
    }
  }
  EXPECT_THROW(provisim::allocate(Vec{NAN}, AllocationPolicy{}), provisim::InputError);
  EXPECT_THROW(AllocationPolicy::from_ratio(1.0), provisim::UsageError);
}

TEST(Smooth, MeanOfSamples) {
  const std::vector<Vec> s{{1, 10}, {2, 20}, {3, 30}};
  EXPECT_EQ(provisim::smooth(s), (Vec{2, 20}));
  EXPECT_THROW(provisim::smooth(std::vector<Vec>{}), provisim::UsageError);
}

TEST(ControlLoop, FirstStepSeedsFromObservation) {
  ControlLoop loop(ControllerSpec{}, 1);
  EXPECT_EQ(loop.current_allocation()[0], 100.0);
  const auto d = loop.control_step(Vec{50});
  EXPECT_EQ(d.a_next[0], 62.5);
  EXPECT_TRUE(d.warming_up);
  EXPECT_EQ(loop.channel_state(0)->P(0, 0), 10.0);
}

TEST(ControlLoop, ConstantInputConverges) {
  for (auto f : {FilterKind::kalman, FilterKind::hinf, FilterKind::mcc})
    for (auto t : {Topology::siso, Topology::mimo}) {
      ControllerSpec spec;
      spec.filter = f;
      spec.topology = t;
      ControlLoop loop(spec, 2);
      provisim::AllocationDecision d;
      for (int k = 0; k < 50; ++k) {
        d = loop.control_step(Vec{40, 40});
        if (k >= 20) {
          EXPECT_NEAR(d.x_next[0], 40.0, 0.4);
          EXPECT_NEAR(d.a_next[1], 50.0, 0.5);
        }
      }
      EXPECT_EQ(loop.feasibility_rejections(), 0u);
    }
}

TEST(ControlLoop, HinfMovesCloserOnStep) {
  // Settle on y = 40 (windowed W goes to 0), then compare one update toward
  // 80 from the same prior with the process variance held fixed.
  ControllerSpec spec;
  spec.filter = FilterKind::hinf;
  ControlLoop loop(spec, 1);
  for (int k = 0; k < 10; ++k) loop.control_step(Vec{40});
  const auto prior = *loop.channel_state(0);
  const auto kal = provisim::kalman_step(prior, Vec{80}, provisim::Mat{{0}}, provisim::Mat{{1}},
                                         provisim::SystemMatrices::identity(1));
  const auto hinf = provisim::hinf_step_siso(prior, 80, 0, 1, {spec.effective_theta(), provisim::Mat{{10}}});
  EXPECT_GT(hinf.x[0], kal.x[0]);
  EXPECT_LT(std::abs(80 - hinf.x[0]), std::abs(80 - kal.x[0]));
}

TEST(ControlLoop, WindowedSurgeInflatesHinfGain) {
  // Inside the loop the jump enters the window at once: W = 51.2, and the
  // theta = 0.7 gain exceeds 2, so the estimate overshoots the new level.
  ControllerSpec spec;
  spec.filter = FilterKind::hinf;
  ControlLoop loop(spec, 1);
  for (int k = 0; k < 10; ++k) loop.control_step(Vec{40});
  const auto d = loop.control_step(Vec{80});
  EXPECT_NEAR(d.w_used[0], 51.2, 1e-9);
  EXPECT_GT(loop.channel_state(0)->gain(0, 0), 2.0);
  EXPECT_GT(d.x_next[0], 120.0);
  EXPECT_EQ(d.a_next[0], 100.0);
}

TEST(ControlLoop, ResetReplaysIdentically) {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> n(50, 8);
  std::vector<Vec> ys;
  for (int k = 0; k < 60; ++k) ys.push_back({n(rng), n(rng) / 3});
  ControllerSpec spec;
  spec.filter = FilterKind::mcc;
  spec.topology = Topology::mimo;
  ControlLoop loop(spec, 2);
  std::vector<Vec> first;
  for (const auto& y : ys) first.push_back(loop.control_step(y).a_next);
  loop.reset();
  loop.reset();
  for (std::size_t k = 0; k < ys.size(); ++k) EXPECT_EQ(loop.control_step(ys[k]).a_next, first[k]);
}

TEST(ControlLoop, RejectedStepHoldsAllocation) {
  ControllerSpec spec;
  spec.filter = FilterKind::hinf;
  spec.theta = 2.0;
  spec.W0 = 0.0;
  spec.P0 = 10.0;
  spec.x0 = 50.0;
  ControlLoop loop(spec, 1);
  const auto d = loop.control_step(Vec{60});
  EXPECT_TRUE(d.held[0]);
  EXPECT_EQ(d.a_next[0], 100.0);
  EXPECT_EQ(d.feasibility_rejections, 1u);
  EXPECT_EQ(loop.channel_state(0)->x[0], 50.0);

  spec.theta = 0.7;
  ControlLoop ok(spec, 1);
  const auto d2 = ok.control_step(Vec{60});
  EXPECT_FALSE(d2.held[0]);
  EXPECT_EQ(d2.feasibility_rejections, 0u);
}

TEST(ControlLoop, WarmUpUsesW0ThenWindow) {
  ControllerSpec spec;
  spec.window = 3;
  spec.W0 = 7.0;
  ControlLoop loop(spec, 1);
  const double ys[] = {10, 12, 11, 15, 13};
  std::vector<provisim::AllocationDecision> ds;
  for (double y : ys) ds.push_back(loop.control_step(Vec{y}));
  EXPECT_TRUE(ds[2].warming_up);
  EXPECT_EQ(ds[2].w_used[0], 7.0);
  EXPECT_FALSE(ds[3].warming_up);
  // diffs 2, -1, 4: population variance 38/9, divided by T = 3
  EXPECT_NEAR(ds[3].w_used[0], 38.0 / 27.0, 1e-12);
}

TEST(ControlLoop, TopologyChannels) {
  EXPECT_EQ(ControlLoop(ControllerSpec{}, 2).channel_count(), 2u);
  ControllerSpec m;
  m.topology = Topology::mimo;
  EXPECT_EQ(ControlLoop(m, 2).channel_count(), 1u);
}

TEST(ControlLoop, RejectsBadInput) {
  ControlLoop loop(ControllerSpec{}, 2);
  EXPECT_THROW(loop.control_step(Vec{1}), provisim::UsageError);
  EXPECT_THROW(loop.control_step(Vec{1, INFINITY}), provisim::InputError);
  ControllerSpec bad;
  bad.window = 0;
  EXPECT_THROW(ControlLoop(bad, 1), provisim::UsageError);
}
