#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "caac/numkit/rng.hpp"
#include "caac/policy/policy.hpp"

namespace caac::policy {
namespace {

PolicyConfig SmallConfig() {
  PolicyConfig c;
  c.num_users = 3;
  c.num_antennas = 2;
  c.hidden = {16, 16};
  c.output_init_scale = 0.5;
  return c;
}

RealRow RandomFeatures(numkit::Rng& rng, const PolicyConfig& c) {
  RealRow f(c.InputDim());
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.Gaussian(0, 1);
  return f;
}

TEST(Policy, SquashBoundsAndMidpoint) {
  const GaussianPolicy policy(SmallConfig());
  RealVec z = RealVec::Zero(4);
  const env::Action a = policy.Squash(z);
  EXPECT_DOUBLE_EQ(a.power_w, 0.5 * policy.config().max_power_w);
  for (double v : {-1e3, -30.0, 0.0, 30.0, 1e3}) {
    const env::Action s = policy.Squash(RealVec::Constant(4, v));
    EXPECT_GT(s.power_w, 0.0);
    EXPECT_LE(s.power_w, policy.config().max_power_w);
    EXPECT_TRUE((s.weights.array() >= policy.config().omega_min).all());
    EXPECT_TRUE((s.weights.array() <= 1.0).all());
  }
}

TEST(Policy, SquashJacobianAtZero) {
  const PolicyConfig c = SmallConfig();
  const GaussianPolicy policy(c);
  const double expected = 3 * std::log(0.25 * (1.0 - c.omega_min)) + std::log(0.25 * c.max_power_w);
  EXPECT_NEAR(policy.LogSquashJacobian(RealVec::Zero(4)), expected, 1e-12);
}

TEST(Policy, GaussianDensityAtModeWithUnitScale) {
  PolicyConfig c = SmallConfig();
  c.init_log_std = 0.0;
  c.output_init_scale = 0.0;
  const GaussianPolicy policy(c);
  numkit::Rng rng(1);
  const RealVec theta = policy.Init(rng);
  const RealRow f = RandomFeatures(rng, c);
  numkit::Tape tape;
  const GaussianPolicy::Head head = policy.Forward(tape, theta, tape.Constant(f));
  const RealMat mean = tape.Value(head.mean);
  const numkit::Tape::Var lp = policy.GaussianLogDensity(tape, head, mean);
  EXPECT_NEAR(tape.Value(lp)(0, 0), -0.5 * 4 * std::log(2.0 * std::numbers::pi), 1e-10);
}

TEST(Policy, LogProbIsGaussianMinusJacobian) {
  const PolicyConfig c = SmallConfig();
  const GaussianPolicy policy(c);
  numkit::Rng rng(2);
  const RealVec theta = policy.Init(rng);
  const RealRow f = RandomFeatures(rng, c);
  const SampledAction sa = policy.Act(theta, f, rng);
  EXPECT_NEAR(policy.LogProb(theta, f, sa.z), sa.log_prob, 1e-10);
  numkit::Tape tape;
  const GaussianPolicy::Head head = policy.Forward(tape, theta, tape.Constant(f));
  const double gauss = tape.Value(policy.GaussianLogDensity(tape, head, sa.z.transpose()))(0, 0);
  EXPECT_NEAR(sa.log_prob, gauss - policy.LogSquashJacobian(sa.z), 1e-10);
}

TEST(Policy, ScoreMatchesDirectionalFiniteDifferences) {
  const PolicyConfig c = SmallConfig();
  const GaussianPolicy policy(c);
  numkit::Rng rng(3);
  const RealVec theta = policy.Init(rng);
  const RealRow f = RandomFeatures(rng, c);
  const SampledAction sa = policy.Act(theta, f, rng);
  const RealVec score = policy.Score(theta, f, sa.z);
  for (int trial = 0; trial < 50; ++trial) {
    const auto i = static_cast<Eigen::Index>(rng.Uniform(0.0, 1.0) * theta.size()) % theta.size();
    RealVec hi = theta, lo = theta;
    hi(i) += 1e-6;
    lo(i) -= 1e-6;
    const double fd = (policy.LogProb(hi, f, sa.z) - policy.LogProb(lo, f, sa.z)) / 2e-6;
    EXPECT_NEAR(score(i), fd, 1e-4 * std::max(1.0, std::fabs(fd))) << "coordinate " << i;
  }
}

TEST(Policy, WeightedScoresMatchPerSampleScores) {
  const PolicyConfig c = SmallConfig();
  const GaussianPolicy policy(c);
  numkit::Rng rng(4);
  const RealVec theta = policy.Init(rng);
  const int b = 5;
  RealMat feats(b, c.InputDim()), z(b, 4), w(b, 2);
  RealMat expected = RealMat::Zero(2, theta.size());
  for (int t = 0; t < b; ++t) {
    feats.row(t) = RandomFeatures(rng, c);
    z.row(t) = policy.Act(theta, feats.row(t), rng).z.transpose();
    w(t, 0) = rng.Gaussian(0, 1);
    w(t, 1) = rng.Gaussian(0, 1);
    const RealVec s = policy.Score(theta, feats.row(t), z.row(t).transpose());
    expected.row(0) += w(t, 0) * s.transpose();
    expected.row(1) += w(t, 1) * s.transpose();
  }
  const RealMat got = policy.WeightedScores(theta, feats, z, w);
  EXPECT_LT((got - expected).norm(), 1e-9 * std::max(1.0, expected.norm()));
}

TEST(Policy, ScoreHasZeroMean) {
  PolicyConfig c = SmallConfig();
  c.hidden = {8};
  const GaussianPolicy policy(c);
  numkit::Rng rng(5);
  const RealVec theta = policy.Init(rng);
  const RealRow f = RandomFeatures(rng, c);
  const int n = 100000;
  RealVec sum = RealVec::Zero(theta.size()), sumsq = RealVec::Zero(theta.size());
  for (int t = 0; t < n; ++t) {
    const RealVec s = policy.Score(theta, f, policy.Act(theta, f, rng).z);
    sum += s;
    sumsq += s.cwiseAbs2();
  }
  const RealVec mean = sum / n;
  const RealVec stderr_ = ((sumsq / n - mean.cwiseAbs2()).cwiseMax(0.0) / n).cwiseSqrt();
  int violations = 0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    if (std::fabs(mean(i)) > 3.0 * stderr_(i) + 1e-12) ++violations;
  }
  // A 3-sigma band admits about 0.3% of coordinates by chance.
  EXPECT_LE(violations, std::max<int>(2, static_cast<int>(0.01 * mean.size())));
}

TEST(Policy, ZeroInputLeavesFirstLayerWeightsUntouched) {
  PolicyConfig c = SmallConfig();
  c.num_users = 2;
  const GaussianPolicy policy(c);
  numkit::Rng rng(6);
  const RealVec theta = policy.Init(rng);
  const RealRow f = RealRow::Zero(c.InputDim());
  RealVec z(3);
  z << 0.3, 0.3, -0.2;
  const RealVec s = policy.Score(theta, f, z);
  const Eigen::Index first = static_cast<Eigen::Index>(c.InputDim()) * c.hidden[0];
  EXPECT_LT(s.head(first).norm(), 1e-12);
  EXPECT_TRUE(s.allFinite());
}

TEST(Features, QueuesAreLogScaledAndChannelsNormalized) {
  env::EnvConfig ec;
  ec.num_users = 2;
  ec.num_antennas = 1;
  ec.users.resize(2);
  ec.users[0].arrival_prob = 0.5;
  ec.users[0].mean_arrival_bits = 2000.0;
  ec.users[1].arrival_prob = 1.0;
  ec.users[1].mean_arrival_bits = 500.0;
  const env::Environment environment(ec, 1);
  const FeatureScaler scaler = FeatureScaler::FromEnvironment(environment);
  env::SysState s;
  s.queues = RealVec(2);
  s.queues << 3000.0, 0.0;
  s.channel = env::ComplexMat::Constant(2, 1, numkit::Complex(scaler.channel_scale, 0.0));
  const RealRow f = scaler.StateFeatures(s);
  EXPECT_NEAR(f(0), std::log1p(3.0), 1e-12);
  EXPECT_EQ(f(1), 0.0);
  EXPECT_NEAR(f(2), 1.0, 1e-12);
  RealVec w(2);
  w << 0.25, 0.75;
  const RealRow o = scaler.UserTuple(s, w, 1);
  ASSERT_EQ(o.size(), 4);
  EXPECT_EQ(o(3), 0.75);
}

}  // namespace
}  // namespace caac::policy
