#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "caac/critic/critic.hpp"
#include "caac/numkit/rng.hpp"

namespace caac::critic {
namespace {

CriticDims Dims(int k, int m, int l1 = 2, int l2 = 8, int l3 = 4) {
  CriticDims d;
  d.num_users = k;
  d.num_antennas = m;
  d.embed = l1;
  d.attention = l2;
  d.hidden = l3;
  return d;
}

CriticBatch RandomBatch(numkit::Rng& rng, const CriticDims& d, int rows) {
  CriticBatch b;
  b.tuples.resize(rows, d.num_users * d.TupleDim());
  b.actions.resize(rows, d.ActionDim());
  for (Eigen::Index i = 0; i < b.tuples.size(); ++i) b.tuples(i) = rng.Gaussian(0, 1);
  for (Eigen::Index i = 0; i < b.actions.size(); ++i) b.actions(i) = rng.Uniform(0.01, 1.0);
  return b;
}

// Makes the embedding map of `dst` a copy of `src`, both with zero bias.
void TieEmbeddings(RealVec& p, const CriticDims& d, int src, int dst) {
  const Eigen::Index per_user = (d.TupleDim() + 1) * d.embed;
  const Eigen::Index weights = d.TupleDim() * d.embed;
  p.segment(dst * per_user, weights) = p.segment(src * per_user, weights);
  p.segment(src * per_user + weights, d.embed).setZero();
  p.segment(dst * per_user + weights, d.embed).setZero();
}

TEST(AttentiveCritic, IdenticalNeighboursShareAttentionEvenly) {
  const CriticDims d = Dims(3, 2);
  const AttentiveCritic critic(d);
  numkit::Rng rng(1);
  RealVec p = critic.Init(rng);
  TieEmbeddings(p, d, 1, 2);
  CriticBatch b = RandomBatch(rng, d, 4);
  const Eigen::Index t = d.TupleDim();
  b.tuples.middleCols(2 * t, t) = b.tuples.middleCols(t, t);
  const RealMat alpha = critic.AttentionWeights(p, b, 1);
  ASSERT_EQ(alpha.cols(), 2);
  for (Eigen::Index r = 0; r < alpha.rows(); ++r) {
    EXPECT_NEAR(alpha(r, 0), 0.5, 1e-15);
    EXPECT_NEAR(alpha(r, 1), 0.5, 1e-15);
  }
}

TEST(AttentiveCritic, SingleUserHasNoNeighbours) {
  const CriticDims d = Dims(1, 3);
  const AttentiveCritic critic(d);
  numkit::Rng rng(2);
  const RealVec p = critic.Init(rng);
  const CriticBatch b = RandomBatch(rng, d, 5);
  EXPECT_EQ(critic.AttentionWeights(p, b, 1).cols(), 0);
  const RealMat q = critic.Evaluate(p, b);
  EXPECT_EQ(q.rows(), 5);
  EXPECT_EQ(q.cols(), 2);
  EXPECT_TRUE(q.allFinite());
}

TEST(AttentiveCritic, HeadZeroCancelsOpposingValues) {
  const CriticDims d = Dims(2, 2);
  const AttentiveCritic critic(d);
  numkit::Rng rng(3);
  RealVec p = critic.Init(rng);
  TieEmbeddings(p, d, 0, 1);
  const Eigen::Index t = d.TupleDim();
  // o_2 = -o_1 with tied odd embeddings gives v_2 = -v_1.
  CriticBatch a = RandomBatch(rng, d, 3);
  a.tuples.middleCols(t, t) = -a.tuples.middleCols(0, t);
  CriticBatch b = a;
  b.tuples *= 3.0;
  const RealMat qa = critic.Evaluate(p, a);
  const RealMat qb = critic.Evaluate(p, b);
  EXPECT_LT((qa.col(0) - qb.col(0)).norm(), 1e-12);
  EXPECT_GT((qa.rightCols(2) - qb.rightCols(2)).norm(), 1e-6);
}

TEST(ParamCount, PublishedDimensions) {
  const CriticDims d = Dims(8, 16, 2, 64, 32);
  const Eigen::Index att = ParamCount(Architecture::kAttentive, d);
  const Eigen::Index fcn = ParamCount(Architecture::kSeparateFcn, d);
  // Trunk 8*(34+1)*2 + 3*2*32; head 0 (41+1)*32 + 33; heads 1..8 (73+1)*32 + 33.
  EXPECT_EQ(att, 752 + 1377 + 8 * 2401);
  // Per head (272+1)*16 + (16+1)*64 + (73+1)*32 + 33.
  EXPECT_EQ(fcn, 9 * 7857);
  EXPECT_LT(att, fcn);
}

TEST(ParamCount, DegenerateHiddenWidthLeavesScalarHeads) {
  const CriticDims d = Dims(3, 2, 2, 8, 0);
  const Eigen::Index trunk = 3 * (d.TupleDim() + 1) * 2 + 3 * 2 * 4;
  EXPECT_EQ(ParamCount(Architecture::kAttentive, d), trunk + 4);
}

TEST(ParamCount, SingleUserHasTwoHeads) {
  const AttentiveCritic critic(Dims(1, 2));
  EXPECT_EQ(critic.num_heads(), 2);
  EXPECT_EQ(MakeCritic(Architecture::kSeparateFcn, Dims(1, 2))->num_heads(), 2);
}

TEST(CriticDims, Validation) {
  EXPECT_THROW(AttentiveCritic(Dims(2, 2, 2, 7, 4)), std::invalid_argument);
  EXPECT_THROW(AttentiveCritic(Dims(0, 2)), std::invalid_argument);
  EXPECT_THROW(AttentiveCritic(Dims(2, 2, 2, 8, -1)), std::invalid_argument);
}

// Critic whose output is a fixed table, to check TD arithmetic.
class TableCritic final : public QModel {
 public:
  explicit TableCritic(int heads) : heads_(heads) {}
  Eigen::Index ParamCount() const override { return heads_; }
  RealVec Init(numkit::Rng&) const override { return RealVec::Zero(heads_); }
  numkit::Tape::Var Forward(numkit::Tape& tape, const RealVec& params,
                            const CriticBatch& batch) const override {
    // Q(s, a) = params_k * (first action entry): enough to pin the target.
    numkit::Tape::Var w = tape.Parameter(params, 0, 1, heads_);
    return tape.ScaleRows(tape.Constant(batch.actions.col(0)), tape.AddRow(
        tape.Constant(RealMat::Zero(batch.size(), heads_)), w));
  }
  int num_heads() const override { return heads_; }

 private:
  int heads_;
};

TdBatch OneTransition(double a_now, double a_next, double cost) {
  TdBatch b;
  b.current.tuples = RealMat::Zero(1, 1);
  b.current.actions = RealMat::Constant(1, 1, a_now);
  b.next.tuples = RealMat::Zero(1, 1);
  b.next.actions = RealMat::Constant(1, 1, a_next);
  b.costs = RealMat::Constant(1, 1, cost);
  return b;
}

TEST(TdUpdate, TargetArithmetic) {
  const TableCritic critic(1);
  // Q_next = w * 2 = 2 with w = 1; C' = 1, fhat = 0.5 -> target 2.5.
  // Q(s,a) = w * 2.5 = 2.5 -> delta = 0, no update.
  RealVec w = RealVec::Ones(1);
  const RealVec fhat = RealVec::Constant(1, 0.5);
  TdBatch b = OneTransition(2.5, 2.0, 1.0);
  const TdResult r = TdUpdate(critic, w, b, fhat, 0.1);
  EXPECT_NEAR(r.loss, 0.0, 1e-24);
  EXPECT_NEAR(r.params(0), 1.0, 1e-15);

  // Q(s,a) = 3 -> delta = 0.5; grad of delta^2 w.r.t. w is 2 * 0.5 * 3 = 3.
  b = OneTransition(3.0, 2.0, 1.0);
  const TdResult s = TdUpdate(critic, w, b, fhat, 0.1);
  EXPECT_NEAR(s.loss, 0.25, 1e-15);
  EXPECT_NEAR(s.params(0), 1.0 - 0.1 * 3.0, 1e-15);
}

TEST(TdUpdate, ConstantCostZeroCriticIsFixedPoint) {
  const CriticDims d = Dims(2, 2);
  const AttentiveCritic critic(d);
  numkit::Rng rng(4);
  RealVec p = critic.Init(rng);
  // Zero every head so Q = 0 identically.
  const Eigen::Index trunk = d.num_users * (d.TupleDim() + 1) * d.embed + 3 * d.embed * d.ProjDim();
  p.tail(p.size() - trunk).setZero();
  TdBatch b;
  b.current = RandomBatch(rng, d, 6);
  b.next = RandomBatch(rng, d, 6);
  b.costs = RealMat::Constant(6, 3, 1.7);
  ASSERT_LT(critic.Evaluate(p, b.current).norm(), 1e-15);
  const TdResult r = TdUpdate(critic, p, b, RealVec::Constant(3, 1.7), 0.5);
  EXPECT_NEAR(r.loss, 0.0, 1e-24);
  EXPECT_LT((r.params - p).norm(), 1e-15);
}

TEST(TdUpdate, RejectsBadInput) {
  const TableCritic critic(1);
  const TdBatch b = OneTransition(1.0, 1.0, 1.0);
  EXPECT_THROW(TdUpdate(critic, RealVec::Ones(1), b, RealVec::Ones(1), 0.0),
               std::invalid_argument);
  EXPECT_THROW(TdUpdate(critic, RealVec::Ones(1), b, RealVec::Ones(2), 0.1),
               std::invalid_argument);
  EXPECT_THROW(TrainCritic(critic, RealVec::Ones(1), b, 2, RealVec::Ones(1), 0.1),
               std::invalid_argument);
}

TEST(TrainCritic, SlicesInOrder) {
  const CriticDims d = Dims(2, 1);
  const AttentiveCritic critic(d);
  numkit::Rng rng(5);
  const RealVec p = critic.Init(rng);
  TdBatch b;
  b.current = RandomBatch(rng, d, 6);
  b.next = RandomBatch(rng, d, 6);
  b.costs = RealMat::Random(6, 3);
  const RealVec fhat = RealVec::Zero(3);
  RealVec manual = p;
  for (int i = 0; i < 3; ++i) manual = TdUpdate(critic, manual, SliceTdBatch(b, 2 * i, 2), fhat, 0.01).params;
  const TdResult r = TrainCritic(critic, p, b, 3, fhat, 0.01);
  EXPECT_EQ((r.params - manual).norm(), 0.0);
}

}  // namespace
}  // namespace caac::critic
