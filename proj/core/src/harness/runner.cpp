#include "caac/harness/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "caac/actor/actor.hpp"
#include "caac/critic/critic.hpp"
#include "caac/harness/checkpoint.hpp"
#include "caac/policy/policy.hpp"
#include "caac/wmmse/wmmse.hpp"

#ifndef CAAC_VERSION
#define CAAC_VERSION "0.0.0"
#endif

namespace caac::harness {

namespace {

using Clock = std::chrono::steady_clock;

class Timer {
 public:
  explicit Timer(bool enabled) : enabled_(enabled), start_(Clock::now()) {}
  double Seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(Clock::now() - start_).count();
  }

 private:
  bool enabled_;
  Clock::time_point start_;
};

// C'_0 stays in watts; C'_k is divided by |c_k|.
RealVec CostScales(const env::EnvConfig& env) {
  RealVec s(env.num_users + 1);
  s(0) = 1.0;
  s.tail(env.num_users) = ThresholdScales(env);
  return s;
}

void CheckRow(const MetricsRow& row) {
  if (!std::isfinite(row.avg_power_w) || !std::isfinite(row.qos_gap) || !row.fhat.allFinite()) {
    throw numkit::NumericalError("iteration " + std::to_string(row.iteration) +
                                 ": non-finite metric (power " + std::to_string(row.avg_power_w) +
                                 ", qos_gap " + std::to_string(row.qos_gap) + ")");
  }
}

// Everything shared by the learning loop and the baselines: environment,
// precoder, QoS-gap bookkeeping and the raw-utility log.
class Simulation {
 public:
  explicit Simulation(const RunConfig& config)
      : env_(ResolveEnv(config), config.seed),
        qos_(Thresholds(env_.config()), ThresholdScales(env_.config())),
        cost_scales_(CostScales(env_.config())) {
    wmmse_options_.max_iterations = config.wmmse_max_iterations;
    wmmse_options_.tolerance = config.wmmse_tolerance;
    if (config.log_raw) {
      utilities_.resize(static_cast<Eigen::Index>(config.iterations) * config.batch,
                        env_.config().num_users);
    }
  }

  env::Environment& environment() { return env_; }
  const env::EnvConfig& env_config() const { return env_.config(); }

  env::Transition Step(const env::Action& action) {
    const env::SysState& s = env_.state();
    const wmmse::PrecoderSet pre = wmmse::WmmsePrecode(s.channel, action.weights, action.power_w,
                                                       env_.noise_power(), wmmse_options_);
    const RealVec rates = wmmse::Rates(s.channel, pre.precoders, env_.noise_power(),
                                       env_.config().bandwidth_hz);
    env::Transition tr = env_.Step(action, rates);
    qos_.Add(tr.utilities);
    if (utilities_.rows() > 0) utilities_.row(slot_) = tr.utilities.transpose();
    ++slot_;
    return tr;
  }

  // B x (K+1) learning costs.
  RealMat ScaledCosts(const std::vector<env::Transition>& batch) const {
    RealMat c(static_cast<Eigen::Index>(batch.size()), cost_scales_.size());
    for (std::size_t t = 0; t < batch.size(); ++t) {
      c.row(static_cast<Eigen::Index>(t)) = batch[t].costs.cwiseQuotient(cost_scales_).transpose();
    }
    return c;
  }

  static double MeanPower(const std::vector<env::Transition>& batch) {
    double p = 0.0;
    for (const env::Transition& tr : batch) p += tr.action.power_w;
    return p / static_cast<double>(batch.size());
  }

  double qos_gap() const { return qos_.Value(); }
  RealMat TakeUtilities() { return std::move(utilities_); }

 private:
  env::Environment env_;
  QosGapTracker qos_;
  RealVec cost_scales_;
  wmmse::WmmseOptions wmmse_options_;
  RealMat utilities_;
  Eigen::Index slot_ = 0;
};

void UpdateEstimate(RealVec& fhat, const RealVec& sample, double eta) {
  fhat = fhat.size() == 0 ? sample : RealVec((1.0 - eta) * fhat + eta * sample);
}

RunOutput RunBaseline(const RunConfig& config, const RowCallback& on_row) {
  const Timer timer(config.record_wall_time);
  Simulation sim(config);
  const int k_users = sim.env_config().num_users;
  const RealVec thresholds = Thresholds(sim.env_config());
  const RealVec scales = ThresholdScales(sim.env_config());
  RealVec smoothed_gap = RealVec::Zero(k_users);
  RealVec fhat;

  RunOutput out;
  out.env = sim.env_config();
  for (int i = 0; i < config.iterations; ++i) {
    std::vector<env::Transition> batch;
    batch.reserve(config.batch);
    for (int t = 0; t < config.batch; ++t) {
      env::Action a;
      a.power_w = config.baseline_power_w;
      a.weights = config.algorithm == Algorithm::kEp
                      ? EpWeights(k_users)
                      : GreedyWeights(smoothed_gap, config.greedy_epsilon);
      batch.push_back(sim.Step(a));
      const RealVec gap =
          (batch.back().utilities - thresholds).cwiseMax(0.0).cwiseQuotient(scales);
      smoothed_gap = config.greedy_smoothing * smoothed_gap + (1.0 - config.greedy_smoothing) * gap;
    }
    UpdateEstimate(fhat, sim.ScaledCosts(batch).colwise().mean().transpose(),
                   config.schedule.Eta(i));
    MetricsRow row{i, Simulation::MeanPower(batch), sim.qos_gap(), fhat, timer.Seconds()};
    CheckRow(row);
    if (on_row) on_row(row);
    out.rows.push_back(std::move(row));
  }
  out.utilities = sim.TakeUtilities();
  return out;
}

RunOutput RunLearning(const RunConfig& config, const RowCallback& on_row) {
  const Timer timer(config.record_wall_time);
  Simulation sim(config);
  const env::EnvConfig& env_cfg = sim.env_config();
  const int k_users = env_cfg.num_users;
  const numkit::Rng master(config.seed);

  const policy::FeatureScaler scaler = policy::FeatureScaler::FromEnvironment(sim.environment());
  policy::PolicyConfig pcfg;
  pcfg.num_users = k_users;
  pcfg.num_antennas = env_cfg.num_antennas;
  pcfg.hidden = config.policy_hidden;
  pcfg.omega_min = config.omega_min;
  pcfg.max_power_w = env_cfg.max_power_w;
  pcfg.init_log_std = config.init_log_std;
  const policy::GaussianPolicy policy(pcfg);

  critic::CriticDims dims;
  dims.num_users = k_users;
  dims.num_antennas = env_cfg.num_antennas;
  dims.embed = config.critic_embed;
  dims.attention = config.critic_attention;
  dims.hidden = config.critic_hidden;
  const auto arch = config.algorithm == Algorithm::kCaacMinus ? critic::Architecture::kSeparateFcn
                                                              : critic::Architecture::kAttentive;
  const std::unique_ptr<critic::QModel> critic = critic::MakeCritic(arch, dims);

  numkit::Rng init_rng = master.Substream("policy/init");
  RealVec theta = policy.Init(init_rng);
  numkit::Rng critic_init_rng = master.Substream("critic/init");
  RealVec omega = critic->Init(critic_init_rng);
  numkit::Rng action_rng = master.Substream("policy/actions");
  numkit::Rng next_action_rng = master.Substream("critic/next_actions");

  const RealVec zeta = RealVec::Constant(k_users + 1, config.zeta);
  actor::DualSolveOptions dual_options{config.dual_max_iterations, config.dual_tolerance};
  actor::EstimatorState estimates;
  RealVec warm_lambda;

  RunOutput out;
  out.env = env_cfg;
  const Eigen::Index in_dim = pcfg.InputDim();
  for (int i = 0; i < config.iterations; ++i) {
    // Interact.
    std::vector<env::Transition> batch;
    batch.reserve(config.batch);
    RealMat features(config.batch, in_dim);
    RealMat z(config.batch, k_users + 1);
    for (int t = 0; t < config.batch; ++t) {
      features.row(t) = scaler.StateFeatures(sim.environment().state());
      const policy::SampledAction sa = policy.Act(theta, features.row(t), action_rng);
      z.row(t) = sa.z.transpose();
      batch.push_back(sim.Step(sa.action));
    }
    const RealMat costs = sim.ScaledCosts(batch);
    const double eta = config.schedule.Eta(i);

    // Critic, trained against the updated average-cost estimates.
    RealVec fhat_next = estimates.fhat;
    UpdateEstimate(fhat_next, costs.colwise().mean().transpose(), eta);
    const critic::TdBatch td = critic::MakeTdBatch(
        scaler, env_cfg.max_power_w, batch, costs, [&](const env::SysState& s) {
          return policy.Act(theta, scaler.StateFeatures(s), next_action_rng).action;
        });
    omega = critic::TrainCritic(*critic, omega, td, config.critic_minibatches, fhat_next,
                                config.critic_lr * config.schedule.Upsilon(i))
                .params;

    // Actor.
    const RealMat q = critic->Evaluate(omega, td.current);
    const actor::SaaEstimate saa = actor::SaaEstimates(
        costs, q, [&](const RealMat& w) { return policy.WeightedScores(theta, features, z, w); });
    estimates = actor::RecursiveUpdate(estimates, saa, eta);
    actor::SurrogateSet sur;
    sur.anchor = theta;
    sur.fhat = estimates.fhat;
    sur.ghat = estimates.ghat;
    actor::ClipRows(sur.ghat, config.grad_clip);
    sur.zeta = zeta;
    const actor::ObjectiveSolution sol = actor::SolveObjective(sur, warm_lambda, dual_options);
    if (sol.feasible) warm_lambda = sol.lambda;
    theta = actor::Blend(theta, sol.theta, config.schedule.Mu(i));
    if (!theta.allFinite()) throw numkit::NumericalError("policy parameters became non-finite");

    MetricsRow row{i, Simulation::MeanPower(batch), sim.qos_gap(), estimates.fhat,
                   timer.Seconds()};
    CheckRow(row);
    if (on_row) on_row(row);
    out.rows.push_back(std::move(row));
  }
  out.policy_params = std::move(theta);
  out.critic_params = std::move(omega);
  out.utilities = sim.TakeUtilities();
  return out;
}

void WriteUtilities(const std::string& path, const RealMat& u) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (Eigen::Index k = 0; k < u.cols(); ++k) out << (k ? "," : "") << "u_" << (k + 1);
  out << '\n';
  char buf[64];
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", u(t, k));
      out << (k ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace

RealVec Thresholds(const env::EnvConfig& env) {
  RealVec c(env.num_users);
  for (int k = 0; k < env.num_users; ++k) c(k) = env.users[k].threshold;
  return c;
}

RealVec ThresholdScales(const env::EnvConfig& env) { return Thresholds(env).cwiseAbs(); }

RealVec EpWeights(int num_users) { return RealVec::Constant(num_users, 1.0 / num_users); }

RealVec GreedyWeights(const RealVec& smoothed_gap, double epsilon) {
  const RealVec priority = smoothed_gap.array() + epsilon;
  return priority / priority.maxCoeff();
}

RunOutput Run(const RunConfig& config, const RowCallback& on_row) {
  config.Validate();
  if (config.algorithm == Algorithm::kEp || config.algorithm == Algorithm::kGreedy) {
    return RunBaseline(config, on_row);
  }
  return RunLearning(config, on_row);
}

std::string Version() { return CAAC_VERSION; }

std::string RunMeta(const RunConfig& config, const env::EnvConfig& env) {
  std::ostringstream o;
  o << "# caac " << Version() << "\n"
    << "# seed " << config.seed << "\n";
  char buf[160];
  for (int k = 0; k < env.num_users; ++k) {
    const env::UserSpec& u = env.users[k];
    std::snprintf(buf, sizeof(buf), "# user %d category %d arrival_prob %.17g mean_arrival_bits %.17g threshold %.17g\n",
                  k + 1, static_cast<int>(u.category), u.arrival_prob, u.mean_arrival_bits,
                  u.threshold);
    o << buf;
  }
  o << FormatConfig(config);
  return o.str();
}

RunOutput RunToDirectory(const RunConfig& config, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  const env::EnvConfig env = ResolveEnv(config);
  {
    std::ofstream meta(base / "run_meta.txt");
    if (!meta) throw std::runtime_error("cannot write run_meta.txt in '" + dir + "'");
    meta << RunMeta(config, env);
  }
  MetricsWriter writer((base / "metrics.csv").string(), config.env.num_users);
  RunOutput out = Run(config, [&](const MetricsRow& row) { writer.Append(row); });
  if (out.policy_params.size() > 0) {
    std::vector<int> layers;
    layers.push_back(config.env.num_users + 2 * config.env.num_antennas * config.env.num_users);
    for (int h : config.policy_hidden) layers.push_back(h);
    layers.push_back(2 * (config.env.num_users + 1));
    SaveCheckpoint((base / "policy.params").string(),
                   {"policy", config.env.num_users, config.env.num_antennas, layers,
                    out.policy_params});
    SaveCheckpoint((base / "critic.params").string(),
                   {config.algorithm == Algorithm::kCaacMinus ? "critic_fcn" : "critic_attentive",
                    config.env.num_users, config.env.num_antennas,
                    {config.critic_embed, config.critic_attention, config.critic_hidden},
                    out.critic_params});
  }
  if (config.log_raw) WriteUtilities((base / "utilities.csv").string(), out.utilities);
  return out;
}

}  // namespace caac::harness
