#pragma once

#include <functional>
#include <string>
#include <vector>

#include "caac/env/environment.hpp"
#include "caac/harness/config.hpp"
#include "caac/harness/metrics.hpp"

namespace caac::harness {

struct RunOutput {
  std::vector<MetricsRow> rows;
  env::EnvConfig env;       // resolved, including the drawn users
  RealVec policy_params;    // empty for baselines
  RealVec critic_params;    // empty for baselines
  RealMat utilities;        // (iterations*B) x K raw utilities when log_raw is set
};

using RowCallback = std::function<void(const MetricsRow&)>;

// Per-user thresholds c_k and their magnitudes |c_k|, the QoS-gap and learning
// cost normalizers.
RealVec Thresholds(const env::EnvConfig& env);
RealVec ThresholdScales(const env::EnvConfig& env);

// Baseline weights: EP gives every user 1/K; greedy gives (eps + gap_k) / max_j
// (eps + gap_j) for the smoothed normalized QoS gap.
RealVec EpWeights(int num_users);
RealVec GreedyWeights(const RealVec& smoothed_gap, double epsilon);

// Runs the configured algorithm. `on_row` sees each metrics row as soon as it
// is produced. Throws numkit::NumericalError on a non-finite metric.
RunOutput Run(const RunConfig& config, const RowCallback& on_row = {});

// Runs into `dir` (created if needed): metrics.csv, run_meta.txt, parameter
// checkpoints for learning runs and utilities.csv when log_raw is set.
RunOutput RunToDirectory(const RunConfig& config, const std::string& dir);

// Resolved configuration, seed, version and drawn traffic, as text.
std::string RunMeta(const RunConfig& config, const env::EnvConfig& env);

std::string Version();

}  // namespace caac::harness
