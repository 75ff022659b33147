#include "caac/critic/critic.hpp"

#include <cmath>
#include <stdexcept>

namespace caac::critic {

using numkit::Tape;

namespace {

Eigen::Index DenseCount(Eigen::Index in, Eigen::Index out) { return (in + 1) * out; }

Eigen::Index HeadCount(Eigen::Index in, Eigen::Index hidden) {
  return DenseCount(in, hidden) + DenseCount(hidden, 1);
}

// Fills a dense layer (in x out weights then 1 x out bias) at `off`.
void InitDense(RealVec& p, Eigen::Index& off, Eigen::Index in, Eigen::Index out,
               numkit::Rng& rng, bool bias = true) {
  const double bound = in > 0 ? 1.0 / std::sqrt(static_cast<double>(in)) : 0.0;
  for (Eigen::Index i = 0; i < in * out; ++i) p(off + i) = rng.Uniform(-bound, bound);
  off += in * out;
  if (bias) {
    p.segment(off, out).setZero();
    off += out;
  }
}

Tape::Var Dense(Tape& tape, const RealVec& p, Eigen::Index& off, Tape::Var x, Eigen::Index in,
                Eigen::Index out) {
  Tape::Var w = tape.Parameter(p, off, in, out);
  off += in * out;
  Tape::Var b = tape.Parameter(p, off, 1, out);
  off += out;
  return tape.Affine(x, w, b);
}

// Two-layer output function; with zero hidden width only the final bias remains.
Tape::Var OutputHead(Tape& tape, const RealVec& p, Eigen::Index& off, Tape::Var x,
                     Eigen::Index in, Eigen::Index hidden, Eigen::Index rows) {
  if (hidden == 0) {
    Tape::Var b = tape.Parameter(p, off, 1, 1);
    off += 1;
    return tape.AddRow(tape.Constant(RealMat::Zero(rows, 1)), b);
  }
  Tape::Var h = tape.Tanh(Dense(tape, p, off, x, in, hidden));
  return Dense(tape, p, off, h, hidden, 1);
}

}  // namespace

void CriticDims::Validate() const {
  if (num_users < 1 || num_antennas < 1) throw std::invalid_argument("CriticDims: K, M >= 1");
  if (embed < 1) throw std::invalid_argument("CriticDims: L1 must be >= 1");
  if (attention < 2 || attention % 2 != 0) {
    throw std::invalid_argument("CriticDims: L2 must be a positive even number");
  }
  if (hidden < 0) throw std::invalid_argument("CriticDims: L3 must be >= 0");
}

CriticBatch MakeCriticBatch(const policy::FeatureScaler& scaler, double max_power_w,
                            std::span<const env::SysState> states,
                            std::span<const env::Action> actions) {
  if (states.size() != actions.size()) throw std::invalid_argument("MakeCriticBatch: size");
  CriticBatch batch;
  if (states.empty()) return batch;
  const int k_users = static_cast<int>(states.front().channel.rows());
  const int tuple = static_cast<int>(2 * states.front().channel.cols() + 2);
  const auto b = static_cast<Eigen::Index>(states.size());
  batch.tuples.resize(b, static_cast<Eigen::Index>(k_users) * tuple);
  batch.actions.resize(b, k_users + 1);
  for (Eigen::Index t = 0; t < b; ++t) {
    const env::Action& a = actions[t];
    for (int k = 0; k < k_users; ++k) {
      batch.tuples.block(t, static_cast<Eigen::Index>(k) * tuple, 1, tuple) =
          scaler.UserTuple(states[t], a.weights, k);
    }
    batch.actions.block(t, 0, 1, k_users) = a.weights.transpose();
    batch.actions(t, k_users) = a.power_w / max_power_w;
  }
  return batch;
}

RealMat QModel::Evaluate(const RealVec& params, const CriticBatch& batch) const {
  Tape tape;
  return tape.Value(Forward(tape, params, batch));
}

AttentiveCritic::AttentiveCritic(CriticDims dims) : dims_(dims) {
  dims_.Validate();
  const Eigen::Index k = dims_.num_users;
  const Eigen::Index t = dims_.TupleDim();
  const Eigen::Index l1 = dims_.embed;
  const Eigen::Index half = dims_.ProjDim();
  trunk_params_ = k * DenseCount(t, l1) + 3 * l1 * half;
  param_count_ = trunk_params_ + HeadCount(k + 1 + half, dims_.hidden) +
                 k * HeadCount(k + 1 + 2 * half, dims_.hidden);
}

RealVec AttentiveCritic::Init(numkit::Rng& rng) const {
  RealVec p(param_count_);
  Eigen::Index off = 0;
  const Eigen::Index k = dims_.num_users;
  const Eigen::Index half = dims_.ProjDim();
  for (Eigen::Index u = 0; u < k; ++u) InitDense(p, off, dims_.TupleDim(), dims_.embed, rng);
  for (int m = 0; m < 3; ++m) InitDense(p, off, dims_.embed, half, rng, /*bias=*/false);
  for (Eigen::Index head = 0; head <= k; ++head) {
    const Eigen::Index in = k + 1 + (head == 0 ? half : 2 * half);
    if (dims_.hidden > 0) {
      InitDense(p, off, in, dims_.hidden, rng);
      InitDense(p, off, dims_.hidden, 1, rng);
    } else {
      p(off++) = 0.0;
    }
  }
  return p;
}

AttentiveCritic::Trunk AttentiveCritic::BuildTrunk(Tape& tape, const RealVec& p,
                                                   const CriticBatch& batch) const {
  const int k_users = dims_.num_users;
  const Eigen::Index t = dims_.TupleDim();
  const Eigen::Index l1 = dims_.embed;
  const Eigen::Index half = dims_.ProjDim();
  Eigen::Index off = 0;
  std::vector<Tape::Var> embeddings;
  for (int u = 0; u < k_users; ++u) {
    Tape::Var o = tape.Constant(batch.tuples.middleCols(u * t, t));
    embeddings.push_back(tape.Tanh(Dense(tape, p, off, o, t, l1)));
  }
  Tape::Var wk = tape.Parameter(p, off, l1, half);
  off += l1 * half;
  Tape::Var wq = tape.Parameter(p, off, l1, half);
  off += l1 * half;
  Tape::Var wv = tape.Parameter(p, off, l1, half);
  Trunk trunk;
  for (Tape::Var e : embeddings) {
    trunk.keys.push_back(tape.MatMul(e, wk));
    trunk.queries.push_back(tape.MatMul(e, wq));
    trunk.values.push_back(tape.MatMul(e, wv));
  }
  return trunk;
}

namespace {

// Softmax over k' != user of k_user . q_k', as a B x (K-1) matrix.
Tape::Var AttentionLogitsSoftmax(Tape& tape, const std::vector<Tape::Var>& keys,
                                 const std::vector<Tape::Var>& queries, int user) {
  std::vector<Tape::Var> logits;
  for (int other = 0; other < static_cast<int>(queries.size()); ++other) {
    if (other == user) continue;
    logits.push_back(tape.RowSum(tape.Mul(keys[user], queries[other])));
  }
  return tape.SoftmaxRows(tape.ConcatCols(logits));
}

}  // namespace

Tape::Var AttentiveCritic::HeadAttention(Tape& tape, const Trunk& trunk, int user) const {
  const int k_users = dims_.num_users;
  const Eigen::Index rows = tape.Value(trunk.values[user]).rows();
  if (k_users == 1) return tape.Constant(RealMat::Zero(rows, dims_.ProjDim()));
  Tape::Var alpha = AttentionLogitsSoftmax(tape, trunk.keys, trunk.queries, user);
  Tape::Var sum;
  int col = 0;
  for (int other = 0; other < k_users; ++other) {
    if (other == user) continue;
    Tape::Var term = tape.ScaleRows(tape.SliceCols(alpha, col++, 1), trunk.values[other]);
    sum = sum.valid() ? tape.Add(sum, term) : term;
  }
  return sum;
}

Tape::Var AttentiveCritic::Forward(Tape& tape, const RealVec& p, const CriticBatch& batch) const {
  if (p.size() != param_count_) throw std::invalid_argument("AttentiveCritic: params size");
  const int k_users = dims_.num_users;
  const Eigen::Index half = dims_.ProjDim();
  const Eigen::Index rows = batch.size();
  const Trunk trunk = BuildTrunk(tape, p, batch);
  Tape::Var action = tape.Constant(batch.actions);

  Eigen::Index off = trunk_params_;
  std::vector<Tape::Var> q;
  // Head 0 attends to every user with weight 1 and has no own-value slot.
  Tape::Var all = trunk.values[0];
  for (int u = 1; u < k_users; ++u) all = tape.Add(all, trunk.values[u]);
  Tape::Var x0 = tape.ConcatCols({action, all});
  q.push_back(OutputHead(tape, p, off, x0, k_users + 1 + half, dims_.hidden, rows));
  for (int u = 0; u < k_users; ++u) {
    Tape::Var xk = tape.ConcatCols({action, trunk.values[u], HeadAttention(tape, trunk, u)});
    q.push_back(OutputHead(tape, p, off, xk, k_users + 1 + 2 * half, dims_.hidden, rows));
  }
  return tape.ConcatCols(q);
}

RealMat AttentiveCritic::AttentionWeights(const RealVec& params, const CriticBatch& batch,
                                          int head) const {
  if (head < 1 || head > dims_.num_users) throw std::out_of_range("AttentionWeights: head");
  if (dims_.num_users == 1) return RealMat(batch.size(), 0);
  Tape tape;
  const Trunk trunk = BuildTrunk(tape, params, batch);
  return tape.Value(AttentionLogitsSoftmax(tape, trunk.keys, trunk.queries, head - 1));
}

FcnCritic::FcnCritic(CriticDims dims) : dims_(dims) {
  dims_.Validate();
  const Eigen::Index k = dims_.num_users;
  const Eigen::Index in = k * dims_.TupleDim();
  const Eigen::Index l1k = k * dims_.embed;
  per_head_ = DenseCount(in, l1k) + DenseCount(l1k, dims_.attention) +
              HeadCount(dims_.attention + k + 1, dims_.hidden);
  param_count_ = (k + 1) * per_head_;
}

RealVec FcnCritic::Init(numkit::Rng& rng) const {
  RealVec p(param_count_);
  Eigen::Index off = 0;
  const Eigen::Index k = dims_.num_users;
  const Eigen::Index l1k = k * dims_.embed;
  for (Eigen::Index head = 0; head <= k; ++head) {
    InitDense(p, off, k * dims_.TupleDim(), l1k, rng);
    InitDense(p, off, l1k, dims_.attention, rng);
    if (dims_.hidden > 0) {
      InitDense(p, off, dims_.attention + k + 1, dims_.hidden, rng);
      InitDense(p, off, dims_.hidden, 1, rng);
    } else {
      p(off++) = 0.0;
    }
  }
  return p;
}

Tape::Var FcnCritic::Forward(Tape& tape, const RealVec& p, const CriticBatch& batch) const {
  if (p.size() != param_count_) throw std::invalid_argument("FcnCritic: params size");
  const Eigen::Index k = dims_.num_users;
  const Eigen::Index l1k = k * dims_.embed;
  Tape::Var state = tape.Constant(batch.tuples);
  Tape::Var action = tape.Constant(batch.actions);
  std::vector<Tape::Var> q;
  Eigen::Index off = 0;
  for (Eigen::Index head = 0; head <= k; ++head) {
    Tape::Var h1 = tape.Tanh(Dense(tape, p, off, state, k * dims_.TupleDim(), l1k));
    Tape::Var h2 = tape.Tanh(Dense(tape, p, off, h1, l1k, dims_.attention));
    Tape::Var x = tape.ConcatCols({action, h2});
    q.push_back(OutputHead(tape, p, off, x, dims_.attention + k + 1, dims_.hidden, batch.size()));
  }
  return tape.ConcatCols(q);
}

std::unique_ptr<QModel> MakeCritic(Architecture arch, const CriticDims& dims) {
  if (arch == Architecture::kAttentive) return std::make_unique<AttentiveCritic>(dims);
  return std::make_unique<FcnCritic>(dims);
}

Eigen::Index ParamCount(Architecture arch, const CriticDims& dims) {
  return MakeCritic(arch, dims)->ParamCount();
}

TdResult TdUpdate(const QModel& model, const RealVec& params, const TdBatch& batch,
                  const RealVec& fhat, double step) {
  const Eigen::Index b = batch.current.size();
  if (b == 0) throw std::invalid_argument("TdUpdate: empty batch");
  if (!(step > 0.0)) throw std::invalid_argument("TdUpdate: step must be > 0");
  if (batch.costs.rows() != b || batch.costs.cols() != model.num_heads() ||
      fhat.size() != model.num_heads()) {
    throw std::invalid_argument("TdUpdate: cost/estimate shape mismatch");
  }
  const RealMat q_next = model.Evaluate(params, batch.next);
  const RealMat target = (batch.costs.rowwise() - fhat.transpose()) + q_next;

  Tape tape;
  Tape::Var q = model.Forward(tape, params, batch.current);
  Tape::Var loss = tape.Sum(tape.Square(tape.Sub(q, tape.Constant(target))));
  TdResult out;
  out.loss = tape.Scalar(loss);
  if (!std::isfinite(out.loss)) throw numkit::NumericalError("TdUpdate: non-finite loss");
  const RealVec grad = tape.Backward(loss, model.ParamCount());
  out.params = params - step * grad;
  return out;
}

TdBatch MakeTdBatch(const policy::FeatureScaler& scaler, double max_power_w,
                    std::span<const env::Transition> transitions, const RealMat& costs,
                    const NextActionSampler& sampler) {
  std::vector<env::SysState> states;
  std::vector<env::Action> actions;
  std::vector<env::SysState> next_states;
  std::vector<env::Action> next_actions;
  for (const env::Transition& tr : transitions) {
    states.push_back(tr.state);
    actions.push_back(tr.action);
    next_states.push_back(tr.next_state);
    next_actions.push_back(sampler(tr.next_state));
  }
  TdBatch batch;
  batch.current = MakeCriticBatch(scaler, max_power_w, states, actions);
  batch.next = MakeCriticBatch(scaler, max_power_w, next_states, next_actions);
  batch.costs = costs;
  return batch;
}

TdBatch SliceTdBatch(const TdBatch& batch, Eigen::Index start, Eigen::Index count) {
  TdBatch out;
  out.current.tuples = batch.current.tuples.middleRows(start, count);
  out.current.actions = batch.current.actions.middleRows(start, count);
  out.next.tuples = batch.next.tuples.middleRows(start, count);
  out.next.actions = batch.next.actions.middleRows(start, count);
  out.costs = batch.costs.middleRows(start, count);
  return out;
}

TdResult TrainCritic(const QModel& model, const RealVec& params, const TdBatch& batch,
                     int minibatches, const RealVec& fhat, double step) {
  const Eigen::Index b = batch.current.size();
  if (minibatches < 1 || b % minibatches != 0) {
    throw std::invalid_argument("TrainCritic: batch size must be divisible by the update count");
  }
  const Eigen::Index size = b / minibatches;
  TdResult out{params, 0.0};
  for (int i = 0; i < minibatches; ++i) {
    TdResult r = TdUpdate(model, out.params, SliceTdBatch(batch, i * size, size), fhat, step);
    out.params = std::move(r.params);
    out.loss += r.loss;
  }
  return out;
}

}  // namespace caac::critic
