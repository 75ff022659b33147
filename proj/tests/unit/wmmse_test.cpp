#include <cmath>

#include <gtest/gtest.h>

#include "caac/numkit/rng.hpp"
#include "caac/wmmse/wmmse.hpp"

namespace caac::wmmse {
namespace {

using numkit::Complex;

ComplexMat RandomChannel(numkit::Rng& rng, int k, int m, double scale = 1.0) {
  ComplexMat h(k, m);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) h(i, j) = scale * Complex(rng.Gaussian(0, 1), rng.Gaussian(0, 1));
  }
  return h;
}

TEST(Wmmse, SingleUserIsMrt) {
  numkit::Rng rng(1);
  const ComplexMat h = RandomChannel(rng, 1, 4);
  const double p = 2.0, sigma2 = 0.5, w = 1e6;
  const PrecoderSet set = WmmsePrecode(h, RealVec::Ones(1), p, sigma2);
  const ComplexMat mrt = std::sqrt(p) * h.adjoint() / h.norm();
  // Equal up to a common phase.
  const Complex phase = (mrt.adjoint() * set.precoders)(0, 0);
  EXPECT_NEAR(std::abs(phase), p, 1e-9);
  EXPECT_NEAR(set.total_power, p, 1e-9);
  const RealVec r = Rates(h, set.precoders, sigma2, w);
  EXPECT_NEAR(r(0) / (w * std::log2(1.0 + p * h.squaredNorm() / sigma2)), 1.0, 1e-9);
}

TEST(Wmmse, OrthogonalSymmetricUsersSplitPowerEvenly) {
  ComplexMat h = ComplexMat::Zero(2, 4);
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const PrecoderSet set = WmmsePrecode(h, RealVec::Constant(2, 0.7), 4.0, 0.1);
  EXPECT_NEAR(set.precoders.col(0).squaredNorm(), 2.0, 1e-6);
  EXPECT_NEAR(set.precoders.col(1).squaredNorm(), 2.0, 1e-6);
  const RealVec r = Rates(h, set.precoders, 0.1, 1.0);
  EXPECT_NEAR(r(0), r(1), 1e-6);
}

TEST(Wmmse, VanishingWeightStarvesUser) {
  numkit::Rng rng(2);
  const ComplexMat h = RandomChannel(rng, 2, 4);
  RealVec w(2);
  w << 1e-9, 1.0;
  const double p = 1.0, sigma2 = 0.1;
  WmmseOptions opt;
  opt.max_iterations = 500;
  opt.tolerance = 1e-10;
  const PrecoderSet set = WmmsePrecode(h, w, p, sigma2, opt);
  EXPECT_LT(set.precoders.col(0).squaredNorm(), 1e-3 * p);
  const RealVec r = Rates(h, set.precoders, sigma2, 1.0);
  const double single = std::log2(1.0 + p * h.row(1).squaredNorm() / sigma2);
  EXPECT_NEAR(r(1) / single, 1.0, 1e-3);
}

TEST(Wmmse, UsesExactBudgetAndImprovesMonotonically) {
  numkit::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const ComplexMat h = RandomChannel(rng, 4, 8);
    RealVec w(4);
    for (int k = 0; k < 4; ++k) w(k) = rng.Uniform(0.05, 1.0);
    const double p = rng.Uniform(0.1, 10.0);
    const PrecoderSet set = WmmsePrecode(h, w, p, 1.0);
    EXPECT_LE(set.total_power, p * (1 + 1e-9));
    for (std::size_t i = 1; i < set.wsr_trace.size(); ++i) {
      EXPECT_GE(set.wsr_trace[i], set.wsr_trace[i - 1] * (1 - 1e-9)) << "trial " << trial;
    }
    EXPECT_TRUE((set.mse_weights.array() >= 1.0 - 1e-12).all());
  }
}

TEST(Wmmse, WeightScaleInvariance) {
  numkit::Rng rng(4);
  const ComplexMat h = RandomChannel(rng, 3, 4);
  RealVec w(3);
  w << 0.2, 0.5, 0.9;
  WmmseOptions opt;
  opt.max_iterations = 300;
  opt.tolerance = 1e-12;
  const RealVec r1 = Rates(h, WmmsePrecode(h, w, 2.0, 0.2, opt).precoders, 0.2, 1.0);
  const RealVec r2 = Rates(h, WmmsePrecode(h, 0.25 * w, 2.0, 0.2, opt).precoders, 0.2, 1.0);
  EXPECT_LT((r1 - r2).norm() / r1.norm(), 1e-3);
}

TEST(Wmmse, ZeroChannelRowGetsZeroPrecoder) {
  numkit::Rng rng(5);
  ComplexMat h = RandomChannel(rng, 2, 4);
  h.row(1).setZero();
  const PrecoderSet set = WmmsePrecode(h, RealVec::Ones(2), 1.0, 0.1);
  EXPECT_EQ(set.precoders.col(1).norm(), 0.0);
}

TEST(Rates, ZeroPrecodersGiveZeroRates) {
  numkit::Rng rng(6);
  const ComplexMat h = RandomChannel(rng, 3, 4);
  EXPECT_EQ(Rates(h, ComplexMat::Zero(4, 3), 0.1, 1e6).norm(), 0.0);
}

TEST(Rates, UnitSnrGivesBandwidth) {
  ComplexMat h = ComplexMat::Zero(1, 2);
  h(0, 0) = 1.0;
  ComplexMat v = ComplexMat::Zero(2, 1);
  v(0, 0) = std::sqrt(0.3);
  EXPECT_NEAR(Rates(h, v, 0.3, 1e6)(0), 1e6, 1e-6);
}

TEST(Rates, TwoUserHandComputedSinr) {
  ComplexMat h(2, 2);
  h << Complex(1, 0), Complex(0, 1), Complex(2, 0), Complex(0, 0);
  ComplexMat v(2, 2);
  v << Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(1, 0);
  // User 1: |h1 v1|^2 = 1, interference |h1 v2|^2 = 1. User 2: signal 0, interference 4.
  const RealVec sinr = Sinr(h, v, 0.5);
  EXPECT_NEAR(sinr(0), 1.0 / 1.5, 1e-12);
  EXPECT_NEAR(sinr(1), 0.0, 1e-12);
  RealVec w(2);
  w << 2.0, 1.0;
  EXPECT_NEAR(WeightedSumRate(w, sinr), 2.0 * std::log2(1.0 + 1.0 / 1.5), 1e-12);
}

TEST(Mrt, EqualPowerSplit) {
  numkit::Rng rng(7);
  const ComplexMat h = RandomChannel(rng, 3, 5);
  const ComplexMat v = MrtPrecoders(h, 3.0);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(v.col(k).squaredNorm(), 1.0, 1e-12);
}

}  // namespace
}  // namespace caac::wmmse
