#include <cmath>

#include <gtest/gtest.h>

#include "caac/env/environment.hpp"

namespace caac::env {
namespace {

EnvConfig TwoUserConfig() {
  EnvConfig c;
  c.num_users = 2;
  c.num_antennas = 4;
  UserSpec delay;
  delay.category = QosCategory::kDelaySensitive;
  delay.arrival_prob = 0.5;
  delay.mean_arrival_bits = 10000.0;
  delay.threshold = 3.0;
  UserSpec rate;
  rate.category = QosCategory::kDelayTolerant;
  rate.arrival_prob = 0.5;
  rate.mean_arrival_bits = 10000.0;
  rate.threshold = -5e6;
  c.users = {delay, rate};
  return c;
}

TEST(Queues, ServiceAndArrival) {
  RealVec l(1), r(1), a(1);
  l << 10000.0;
  r << 2e6;
  a << 5000.0;
  EXPECT_DOUBLE_EQ(NextQueues(l, r, 1e-3, a)(0), 13000.0);
}

TEST(Queues, ClampAtZero) {
  RealVec l(1), r(1), a(1);
  l << 1000.0;
  r << 5e6;
  a << 0.0;
  EXPECT_EQ(NextQueues(l, r, 1e-3, a)(0), 0.0);
}

TEST(Channel, JakesCorrelation) {
  EXPECT_NEAR(DopplerHz(3.0, 3.5e9), (3.0 / 3.6) * 3.5e9 / 3e8, 1e-3);
  EXPECT_NEAR(DopplerHz(3.0, 3.5e9), 9.722, 1e-3);
  EXPECT_NEAR(JakesCorrelation(3.0, 3.5e9, 1e-3), 0.999067, 1e-6);
}

TEST(Channel, NoisePower) {
  EXPECT_NEAR(NoisePower(-174.0, 1e6) / 3.981e-15, 1.0, 1e-3);
  EXPECT_NEAR(NoisePower(-174.0, 1.0), std::pow(10.0, -20.4), 1e-30);
  EXPECT_NEAR(NoisePower(-174.0, 2e6) / NoisePower(-174.0, 1e6), 2.0, 1e-12);
  EXPECT_THROW(NoisePower(-174.0, 0.0), std::invalid_argument);
}

TEST(Channel, Pathloss) {
  EXPECT_NEAR(PathlossDb(100.0), 114.0, 1e-12);
  EXPECT_NEAR(PathlossDb(10.0), 74.0, 1e-12);
  EXPECT_NEAR(PathlossDb(250.0), 34.0 + 40.0 * std::log10(250.0), 1e-12);
  EXPECT_NEAR(PathlossDb(250.0), 129.918, 1e-3);
}

TEST(Costs, BoundaryExamples) {
  EnvConfig c = TwoUserConfig();
  c.users[0].arrival_prob = 0.5;
  c.users[0].mean_arrival_bits = 10000.0;  // a = 5000 bits/slot
  SysState s;
  s.queues = RealVec(2);
  s.queues << 15000.0, 0.0;
  s.channel = ComplexMat::Zero(2, 4);
  Action a;
  a.weights = RealVec::Constant(2, 0.5);
  a.power_w = 1.39;
  RealVec rates(2);
  rates << 0.0, 5e6;
  const RealVec costs = CostSignals(c, s, a, rates);
  ASSERT_EQ(costs.size(), 3);
  EXPECT_DOUBLE_EQ(costs(0), 1.39);
  EXPECT_DOUBLE_EQ(costs(1), 0.0);
  EXPECT_DOUBLE_EQ(costs(2), 0.0);
}

TEST(Costs, DelayUserNeedsArrivals) {
  EnvConfig c = TwoUserConfig();
  c.users[0].mean_arrival_bits = 0.0;
  SysState s;
  s.queues = RealVec::Zero(2);
  s.channel = ComplexMat::Zero(2, 4);
  EXPECT_THROW(Utilities(c, s, RealVec::Zero(2)), std::invalid_argument);
}

TEST(Config, ValidationRejectsBadValues) {
  EnvConfig c = TwoUserConfig();
  EXPECT_NO_THROW(c.Validate());
  c.slot_s = 0.0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = TwoUserConfig();
  c.users[1].arrival_prob = 1.5;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
}

TEST(Users, HalfDelaySensitiveWithinRanges) {
  numkit::Rng rng(9);
  TrafficRanges ranges;
  const auto users = DrawUsers(7, ranges, rng);
  ASSERT_EQ(users.size(), 7u);
  for (int k = 0; k < 7; ++k) {
    EXPECT_EQ(users[k].category,
              k < 4 ? QosCategory::kDelaySensitive : QosCategory::kDelayTolerant);
    EXPECT_GE(users[k].arrival_prob, 0.4);
    EXPECT_LE(users[k].arrival_prob, 0.6);
    EXPECT_GE(users[k].mean_arrival_bits, 5e3);
    EXPECT_LE(users[k].mean_arrival_bits, 15e3);
  }
}

TEST(Environment, FadingIsStationary) {
  // 256 entries keep the 2% band about three standard errors wide.
  EnvConfig c = TwoUserConfig();
  c.num_users = 16;
  c.num_antennas = 16;
  c.users.resize(16, c.users[0]);
  numkit::Rng master(4);
  ChannelModel model(c, master.Substream("m"), master.Substream("f"));
  double acc = 0.0;
  const int slots = 100000;
  for (int t = 0; t < slots; ++t) {
    model.Advance();
    acc += model.small_scale().cwiseAbs2().mean();
  }
  EXPECT_NEAR(acc / slots, 1.0, 0.02);
  for (Eigen::Index k = 0; k < model.distances().size(); ++k) {
    EXPECT_GE(model.distances()(k), c.min_distance_m);
    EXPECT_LE(model.distances()(k), c.cell_radius_m);
  }
}

TEST(Environment, StepStoresTransition) {
  Environment environment(TwoUserConfig(), 3);
  const SysState before = environment.state();
  Action a;
  a.weights = RealVec::Constant(2, 0.5);
  a.power_w = 2.0;
  RealVec rates(2);
  rates << 1e6, 6e6;
  const Transition tr = environment.Step(a, rates);
  EXPECT_EQ(tr.state.queues, before.queues);
  EXPECT_EQ(tr.next_state.queues, environment.state().queues);
  EXPECT_DOUBLE_EQ(tr.costs(0), 2.0);
  EXPECT_DOUBLE_EQ(tr.utilities(1), -6e6);
  EXPECT_THROW(environment.Step(a, RealVec::Constant(2, -1.0)), std::invalid_argument);
}

TEST(Environment, SameSeedSameTrajectory) {
  Environment a(TwoUserConfig(), 17), b(TwoUserConfig(), 17);
  Action act;
  act.weights = RealVec::Constant(2, 1.0);
  act.power_w = 1.0;
  for (int t = 0; t < 50; ++t) {
    a.Step(act, RealVec::Constant(2, 1e6));
    b.Step(act, RealVec::Constant(2, 1e6));
  }
  EXPECT_EQ(a.state().queues, b.state().queues);
  EXPECT_EQ((a.state().channel - b.state().channel).norm(), 0.0);
}

}  // namespace
}  // namespace caac::env
