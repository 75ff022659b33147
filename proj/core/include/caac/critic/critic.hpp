#pragma once

#include <functional>
#include <memory>
#include <span>

#include "caac/env/environment.hpp"
#include "caac/numkit/linalg.hpp"
#include "caac/numkit/rng.hpp"
#include "caac/numkit/tape.hpp"
#include "caac/policy/policy.hpp"

namespace caac::critic {

using numkit::RealMat;
using numkit::RealVec;

struct CriticDims {
  int num_users = 8;     // K
  int num_antennas = 16; // M
  int embed = 2;         // L1, per-user embedding width
  int attention = 64;    // L2, key/query/value width is L2/2
  int hidden = 32;       // L3, output-head hidden width

  int TupleDim() const { return 2 * num_antennas + 2; }
  int ActionDim() const { return num_users + 1; }
  int ProjDim() const { return attention / 2; }
  void Validate() const;
};

enum class Architecture { kAttentive, kSeparateFcn };

// Critic inputs for a batch of B state-action pairs.
struct CriticBatch {
  RealMat tuples;   // B x K(2M+2); user k in columns [k(2M+2), (k+1)(2M+2))
  RealMat actions;  // B x (K+1): omega_1..omega_K, p / P_max

  Eigen::Index size() const { return tuples.rows(); }
};

CriticBatch MakeCriticBatch(const policy::FeatureScaler& scaler, double max_power_w,
                            std::span<const env::SysState> states,
                            std::span<const env::Action> actions);

// K+1 average-cost Q approximators, one output column per head (head 0 is the
// power objective, head k the k-th QoS constraint).
class QModel {
 public:
  virtual ~QModel() = default;

  virtual Eigen::Index ParamCount() const = 0;
  virtual RealVec Init(numkit::Rng& rng) const = 0;
  // B x (K+1) Q values.
  virtual numkit::Tape::Var Forward(numkit::Tape& tape, const RealVec& params,
                                    const CriticBatch& batch) const = 0;
  virtual int num_heads() const = 0;

  RealMat Evaluate(const RealVec& params, const CriticBatch& batch) const;
};

// Shared per-user embeddings and a shared single-head attention layer feeding
// K+1 separate two-layer output functions.
//
// Parameter layout: for each user k, embedding W_k (2M+2 x L1) and b_k (1 x L1);
// then W^K, W^Q, W^V (L1 x L2/2 each); then for each head k = 0..K the output
// layers W1 (in_k x L3), b1, W2 (L3 x 1), b2, where in_0 = K+1+L2/2 and
// in_k = K+1+L2.
class AttentiveCritic final : public QModel {
 public:
  explicit AttentiveCritic(CriticDims dims);

  Eigen::Index ParamCount() const override { return param_count_; }
  RealVec Init(numkit::Rng& rng) const override;
  numkit::Tape::Var Forward(numkit::Tape& tape, const RealVec& params,
                            const CriticBatch& batch) const override;
  int num_heads() const override { return dims_.num_users + 1; }

  // Attention weights alpha_{k,k'} of head k >= 1 over the other users,
  // B x (K-1) in increasing k' order. Empty for K = 1.
  RealMat AttentionWeights(const RealVec& params, const CriticBatch& batch, int head) const;

  const CriticDims& dims() const { return dims_; }

 private:
  struct Trunk {
    std::vector<numkit::Tape::Var> keys;
    std::vector<numkit::Tape::Var> queries;
    std::vector<numkit::Tape::Var> values;
  };
  Trunk BuildTrunk(numkit::Tape& tape, const RealVec& params, const CriticBatch& batch) const;
  numkit::Tape::Var HeadAttention(numkit::Tape& tape, const Trunk& trunk, int user) const;

  CriticDims dims_;
  Eigen::Index trunk_params_ = 0;
  Eigen::Index param_count_ = 0;
};

// CAAC(-) critic: K+1 independent four-layer FCNs with the same layer widths
// as the attentive path (K(2M+2) -> K*L1 -> L2, action appended, -> L3 -> 1).
class FcnCritic final : public QModel {
 public:
  explicit FcnCritic(CriticDims dims);

  Eigen::Index ParamCount() const override { return param_count_; }
  RealVec Init(numkit::Rng& rng) const override;
  numkit::Tape::Var Forward(numkit::Tape& tape, const RealVec& params,
                            const CriticBatch& batch) const override;
  int num_heads() const override { return dims_.num_users + 1; }

 private:
  CriticDims dims_;
  Eigen::Index per_head_ = 0;
  Eigen::Index param_count_ = 0;
};

std::unique_ptr<QModel> MakeCritic(Architecture arch, const CriticDims& dims);

// Exact trainable-parameter count (weights + biases) from the layer shapes.
Eigen::Index ParamCount(Architecture arch, const CriticDims& dims);

// One semi-gradient TD step on a mini-batch.
struct TdBatch {
  CriticBatch current;  // (s_t, a_t)
  CriticBatch next;     // (s_{t+1}, a'_{t+1}) with a' resampled from the policy
  RealMat costs;        // B x (K+1)
};

struct TdResult {
  RealVec params;
  double loss = 0.0;  // sum_k sum_batch delta_k^2 before the step
};

// delta_k = Q_k(s,a) - (C'_k - fhat_k + Q_k(s',a')), with the target held
// fixed; params' = params - step * grad(sum delta^2).
TdResult TdUpdate(const QModel& model, const RealVec& params, const TdBatch& batch,
                  const RealVec& fhat, double step);

using NextActionSampler = std::function<env::Action(const env::SysState&)>;

// Builds the TD batch for transitions, drawing a'_{t+1} from `sampler`.
TdBatch MakeTdBatch(const policy::FeatureScaler& scaler, double max_power_w,
                    std::span<const env::Transition> transitions, const RealMat& costs,
                    const NextActionSampler& sampler);

// Splits `batch` into `minibatches` contiguous slices and applies one TdUpdate
// per slice. Returns the final parameters and the summed loss.
TdResult TrainCritic(const QModel& model, const RealVec& params, const TdBatch& batch,
                     int minibatches, const RealVec& fhat, double step);

TdBatch SliceTdBatch(const TdBatch& batch, Eigen::Index start, Eigen::Index count);

}  // namespace caac::critic
