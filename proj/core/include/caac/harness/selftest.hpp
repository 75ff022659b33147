#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "caac/harness/config.hpp"
#include "caac/harness/metrics.hpp"

namespace caac::harness {

// Outcome of one acceptance criterion.
struct CheckResult {
  std::string id;      // "A1" .. "A8"
  std::string title;
  bool passed = false;
  std::string detail;  // measured values behind the verdict
  double seconds = 0.0;
};

using LogFn = std::function<void(const std::string&)>;

// Autodiff vs central finite differences on 100 random graphs, including the
// full attention critic.
CheckResult CheckAutodiff();
// WMMSE sum-rate monotonicity, power invariants and the K=1 closed form on
// 1000 random instances.
CheckResult CheckWmmse();
// Surrogate solvers vs dense grid search on 200 random 2-parameter instances.
CheckResult CheckSurrogateSolver();
// TD training of the attentive critic on a 2-state average-cost chain.
CheckResult CheckCriticTd();
// Recursive estimates under a frozen policy in a stationary toy environment.
CheckResult CheckEstimator();

// The five property suites above, in order.
std::vector<CheckResult> RunOracleSuites(const LogFn& log = {});

struct ReproductionOptions {
  RunConfig base;                 // full-scale settings by default
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int minus_iterations = 100;     // CAAC(-) iterations for the convergence companion
  std::string work_dir;           // per-run outputs go here when non-empty
  LogFn log;
};

// Metrics of every run needed by the reproduction criteria.
struct ReproductionRuns {
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<MetricsRow>> caac;
  std::vector<std::vector<MetricsRow>> caac_minus;
  std::vector<std::vector<MetricsRow>> ep;
  std::vector<std::vector<MetricsRow>> greedy;
};

ReproductionRuns RunReproduction(const ReproductionOptions& options);

// Full-scale reproduction band and the ordering against the baselines.
CheckResult CheckReproduction(const ReproductionRuns& runs);
// Critic parameter economy; `runs` (optional) adds the convergence companion
// to the detail line.
CheckResult CheckArchitecture(const ReproductionRuns* runs);
// Two runs with one seed produce byte-identical metrics files.
CheckResult CheckDeterminism(const std::string& work_dir);

// Mean of `column` over the last `window` rows (all rows when shorter).
double FinalWindowMean(const std::vector<MetricsRow>& rows, int window,
                       double MetricsRow::*column);

}  // namespace caac::harness
