#pragma once

#include <vector>

#include "caac/numkit/linalg.hpp"

namespace caac::wmmse {

using numkit::ComplexMat;
using numkit::RealVec;

struct WmmseOptions {
  int max_iterations = 50;
  // Stop when the weighted sum-rate changes by less than this, relatively.
  double tolerance = 1e-4;
  int max_bisection_steps = 100;
  // Relative power accuracy at which the multiplier search stops early.
  double power_tolerance = 1e-12;
};

// Downlink MISO precoders for a sum-power budget.
struct PrecoderSet {
  ComplexMat precoders;  // M x K, column k = v_k (sqrt(W))
  double total_power = 0.0;
  double mu = 0.0;       // power multiplier of the last update
  int iterations = 0;
  // Weighted sum-rate sum_k omega_k log2(1 + SINR_k) after the MRT start and
  // after every update.
  std::vector<double> wsr_trace;
  // MSE weights w_k of the last update (all >= 1).
  RealVec mse_weights;
};

// WMMSE fixed point over receiver u_k, MSE weight w_k and precoder v_k,
// initialized from equal-power MRT. The multiplier mu >= 0 is found by
// bisection so that the precoders use exactly `power_w` (or mu = 0 when the
// unconstrained update already fits). Users with an all-zero channel row get a
// zero precoder. Throws numkit::NumericalError when the power is not monotone
// in mu.
PrecoderSet WmmsePrecode(const ComplexMat& channel, const RealVec& weights, double power_w,
                         double noise_power, const WmmseOptions& options = {});

// |h_k v_k|^2 / (sum_{m != k} |h_k v_m|^2 + sigma^2).
RealVec Sinr(const ComplexMat& channel, const ComplexMat& precoders, double noise_power);

// R_k = W log2(1 + SINR_k), bits/s.
RealVec Rates(const ComplexMat& channel, const ComplexMat& precoders, double noise_power,
              double bandwidth_hz);

double WeightedSumRate(const RealVec& weights, const RealVec& sinr);

// Equal-power maximum-ratio start: v_k = sqrt(p/K) h_k^H / ||h_k||.
ComplexMat MrtPrecoders(const ComplexMat& channel, double power_w);

}  // namespace caac::wmmse
