#pragma once

#include <vector>

#include "caac/env/environment.hpp"
#include "caac/numkit/linalg.hpp"
#include "caac/numkit/rng.hpp"
#include "caac/numkit/tape.hpp"

namespace caac::policy {

using numkit::RealMat;
using numkit::RealRow;
using numkit::RealVec;

// Maps raw SI states to network inputs: queues as log(1 + L_k/a_k) with a_k the
// mean arrival per slot, channel entries in units of a reference large-scale
// amplitude.
struct FeatureScaler {
  RealVec mean_arrival_bits;  // a_k per user
  double channel_scale = 1.0;

  // Reference amplitude = median over users of sqrt(alpha_k).
  static FeatureScaler FromEnvironment(const env::Environment& environment);

  // [log1p(L_1/a_1) .. log1p(L_K/a_K), Re h_1, Im h_1, .., Re h_K, Im h_K] / scale.
  RealRow StateFeatures(const env::SysState& state) const;
  // Per-user tuple o_k = (log1p(L_k/a_k), Re h_k, Im h_k, omega_k), length 2M+2.
  RealRow UserTuple(const env::SysState& state, const RealVec& weights, int user) const;
};

struct PolicyConfig {
  int num_users = 8;
  int num_antennas = 16;
  std::vector<int> hidden = {256, 256};
  double omega_min = 1e-3;
  double max_power_w = 10.0;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  double init_log_std = -0.5;
  double output_init_scale = 0.01;

  int InputDim() const { return num_users + 2 * num_antennas * num_users; }
  int ActionDim() const { return num_users + 1; }
};

// Sampled action together with its pre-squash Gaussian draw.
struct SampledAction {
  env::Action action;
  RealVec z;  // length K+1
  double log_prob = 0.0;
};

// Fully connected tanh network emitting the mean and log-std of a diagonal
// Gaussian over z in R^{K+1}; omega_k = omega_min + (1-omega_min) sigmoid(z_k)
// and p = P_max sigmoid(z_{K+1}).
class GaussianPolicy {
 public:
  explicit GaussianPolicy(PolicyConfig config);

  const PolicyConfig& config() const { return config_; }
  Eigen::Index ParamCount() const { return param_count_; }
  // Layer widths including input and output.
  std::vector<int> LayerSizes() const;

  RealVec Init(numkit::Rng& rng) const;

  struct Head {
    numkit::Tape::Var mean;     // B x (K+1)
    numkit::Tape::Var log_std;  // B x (K+1), clipped
  };
  Head Forward(numkit::Tape& tape, const RealVec& theta, numkit::Tape::Var inputs) const;

  // Gaussian log-density of each row of z (B x 1), without the squash term.
  numkit::Tape::Var GaussianLogDensity(numkit::Tape& tape, const Head& head,
                                       const RealMat& z) const;

  SampledAction Act(const RealVec& theta, const RealRow& features, numkit::Rng& rng) const;

  // Squash map z -> (omega, p).
  env::Action Squash(const RealVec& z) const;
  // sum_j log |d squash_j / d z_j|.
  double LogSquashJacobian(const RealVec& z) const;

  // log pi(a|s) of the squashed action: Gaussian density of z minus the
  // log-Jacobian of the squash.
  double LogProb(const RealVec& theta, const RealRow& features, const RealVec& z) const;

  // grad_theta log pi(a|s).
  RealVec Score(const RealVec& theta, const RealRow& features, const RealVec& z) const;

  // Row j of the result is sum_t weights(t, j) * grad_theta log pi(a_t|s_t),
  // computed with one batched forward pass and one reverse sweep per column.
  RealMat WeightedScores(const RealVec& theta, const RealMat& features, const RealMat& z,
                         const RealMat& weights) const;

 private:
  PolicyConfig config_;
  std::vector<int> sizes_;
  Eigen::Index param_count_ = 0;
};

}  // namespace caac::policy
