#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "caac/actor/actor.hpp"
#include "caac/env/environment.hpp"

namespace caac::harness {

enum class Algorithm { kCaac, kCaacMinus, kEp, kGreedy };

std::string AlgorithmName(Algorithm algorithm);
// Throws ConfigError for an unknown name.
Algorithm ParseAlgorithm(std::string_view name);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // [run]
  Algorithm algorithm = Algorithm::kCaac;
  int iterations = 500;
  int batch = 200;               // B
  int critic_minibatches = 10;   // T_cri
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  bool record_wall_time = true;  // false writes wall_s = 0
  bool log_raw = false;          // also write per-slot utilities

  // [env]; env.users is left empty and drawn from the seed by ResolveEnv.
  env::EnvConfig env;
  env::TrafficRanges traffic;

  // [wmmse]
  int wmmse_max_iterations = 50;
  double wmmse_tolerance = 1e-4;

  // [learning]
  double zeta = 10.0;
  actor::StepSchedule schedule;
  double critic_lr = 1e-2;       // critic step = critic_lr * upsilon_i
  double grad_clip = 1e3;
  double omega_min = 1e-3;
  double init_log_std = -0.5;
  int dual_max_iterations = 500;
  double dual_tolerance = 1e-6;

  // [network]
  std::vector<int> policy_hidden = {256, 256};
  int critic_embed = 2;      // L1
  int critic_attention = 64; // L2
  int critic_hidden = 32;    // L3

  // [baseline]
  double baseline_power_w = 4.0;
  double greedy_smoothing = 0.99;
  double greedy_epsilon = 0.01;

  // Throws ConfigError when an invariant is violated.
  void Validate() const;
};

// Parses the sectioned key = value format documented in the README. Unknown
// sections or keys, malformed values and failed validation throw ConfigError.
RunConfig ParseConfig(std::string_view text);
RunConfig LoadConfig(const std::string& path);

// Text that ParseConfig maps back to an identical configuration.
std::string FormatConfig(const RunConfig& config);

// EnvConfig with the per-user traffic drawn from the run seed.
env::EnvConfig ResolveEnv(const RunConfig& config);

}  // namespace caac::harness
