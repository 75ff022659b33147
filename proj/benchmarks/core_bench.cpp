#include <benchmark/benchmark.h>

#include "caac/actor/actor.hpp"
#include "caac/critic/critic.hpp"
#include "caac/numkit/rng.hpp"
#include "caac/policy/policy.hpp"
#include "caac/wmmse/wmmse.hpp"

namespace caac {
namespace {

using numkit::Complex;
using numkit::RealMat;
using numkit::RealVec;

void BM_Wmmse(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const int m = 16;
  numkit::Rng rng(1);
  numkit::ComplexMat h(k, m);
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = Complex(rng.Gaussian(0, 1), rng.Gaussian(0, 1));
  RealVec w(k);
  for (int i = 0; i < k; ++i) w(i) = rng.Uniform(0.05, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(wmmse::WmmsePrecode(h, w, 4.0, 1.0));
}
BENCHMARK(BM_Wmmse)->Arg(4)->Arg(8)->Arg(16);

void BM_PolicyWeightedScores(benchmark::State& state) {
  policy::PolicyConfig c;
  c.num_users = 8;
  c.num_antennas = 16;
  const policy::GaussianPolicy pol(c);
  numkit::Rng rng(2);
  const RealVec theta = pol.Init(rng);
  const int b = static_cast<int>(state.range(0));
  RealMat feats(b, c.InputDim()), z(b, c.num_users + 1), w(b, c.num_users + 1);
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats(i) = rng.Gaussian(0, 1);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.Gaussian(0, 1);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.Gaussian(0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(pol.WeightedScores(theta, feats, z, w));
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_PolicyWeightedScores)->Arg(20)->Arg(200);

void BM_CriticTdUpdate(benchmark::State& state) {
  const critic::CriticDims d;  // K=8, M=16
  const auto arch = state.range(0) ? critic::Architecture::kAttentive : critic::Architecture::kSeparateFcn;
  const auto model = critic::MakeCritic(arch, d);
  numkit::Rng rng(3);
  const RealVec params = model->Init(rng);
  const int b = 20;
  auto batch = [&] {
    critic::CriticBatch cb;
    cb.tuples.resize(b, d.num_users * d.TupleDim());
    cb.actions.resize(b, d.ActionDim());
    for (Eigen::Index i = 0; i < cb.tuples.size(); ++i) cb.tuples(i) = rng.Gaussian(0, 1);
    for (Eigen::Index i = 0; i < cb.actions.size(); ++i) cb.actions(i) = rng.Uniform(0, 1);
    return cb;
  };
  critic::TdBatch td{batch(), batch(), RealMat::Random(b, d.ActionDim())};
  const RealVec fhat = RealVec::Zero(d.ActionDim());
  for (auto _ : state) benchmark::DoNotOptimize(critic::TdUpdate(*model, params, td, fhat, 1e-3));
  state.SetLabel(state.range(0) ? "attentive" : "fcn");
}
BENCHMARK(BM_CriticTdUpdate)->Arg(1)->Arg(0);

void BM_DualSolve(benchmark::State& state) {
  const int k = 8;
  const int dim = static_cast<int>(state.range(0));
  numkit::Rng rng(4);
  actor::SurrogateSet s;
  s.anchor = RealVec::Zero(dim);
  s.fhat = RealVec(k + 1);
  s.ghat = RealMat(k + 1, dim);
  s.zeta = RealVec::Constant(k + 1, 10.0);
  for (int j = 0; j <= k; ++j) {
    s.fhat(j) = j == 0 ? 1.0 : rng.Uniform(-1.0, 0.3);
    for (int c = 0; c < dim; ++c) s.ghat(j, c) = rng.Gaussian(0, 1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(actor::SolveObjective(s));
}
BENCHMARK(BM_DualSolve)->Arg(1000)->Arg(80000);

}  // namespace
}  // namespace caac

BENCHMARK_MAIN();
