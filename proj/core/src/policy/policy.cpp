#include "caac/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace caac::policy {

using numkit::Tape;

namespace {

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double Softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log sigmoid'(z) = -softplus(z) - softplus(-z)
double LogSigmoidSlope(double z) { return -Softplus(z) - Softplus(-z); }

}  // namespace

FeatureScaler FeatureScaler::FromEnvironment(const env::Environment& environment) {
  const env::EnvConfig& cfg = environment.config();
  FeatureScaler s;
  s.mean_arrival_bits.resize(cfg.num_users);
  for (int k = 0; k < cfg.num_users; ++k) {
    s.mean_arrival_bits(k) = cfg.users[k].MeanArrivalPerSlot();
  }
  RealVec amp = environment.channel_model().Amplitudes();
  std::sort(amp.data(), amp.data() + amp.size());
  const Eigen::Index n = amp.size();
  s.channel_scale = (n % 2 == 1) ? amp(n / 2) : 0.5 * (amp(n / 2 - 1) + amp(n / 2));
  return s;
}

RealRow FeatureScaler::StateFeatures(const env::SysState& state) const {
  const Eigen::Index k_users = state.channel.rows();
  const Eigen::Index m = state.channel.cols();
  RealRow f(k_users + 2 * m * k_users);
  for (Eigen::Index k = 0; k < k_users; ++k) f(k) = std::log1p(state.queues(k) / mean_arrival_bits(k));
  Eigen::Index c = k_users;
  for (Eigen::Index k = 0; k < k_users; ++k) {
    f.segment(c, m) = state.channel.row(k).real() / channel_scale;
    f.segment(c + m, m) = state.channel.row(k).imag() / channel_scale;
    c += 2 * m;
  }
  return f;
}

RealRow FeatureScaler::UserTuple(const env::SysState& state, const RealVec& weights,
                                 int user) const {
  const Eigen::Index m = state.channel.cols();
  RealRow o(2 * m + 2);
  o(0) = std::log1p(state.queues(user) / mean_arrival_bits(user));
  o.segment(1, m) = state.channel.row(user).real() / channel_scale;
  o.segment(1 + m, m) = state.channel.row(user).imag() / channel_scale;
  o(2 * m + 1) = weights(user);
  return o;
}

GaussianPolicy::GaussianPolicy(PolicyConfig config) : config_(std::move(config)) {
  if (config_.num_users < 1 || config_.num_antennas < 1) {
    throw std::invalid_argument("GaussianPolicy: K and M must be >= 1");
  }
  if (!(config_.omega_min > 0.0 && config_.omega_min < 1.0)) {
    throw std::invalid_argument("GaussianPolicy: omega_min must lie in (0,1)");
  }
  sizes_.push_back(config_.InputDim());
  for (int h : config_.hidden) {
    if (h < 1) throw std::invalid_argument("GaussianPolicy: hidden width must be >= 1");
    sizes_.push_back(h);
  }
  sizes_.push_back(2 * config_.ActionDim());
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    param_count_ += static_cast<Eigen::Index>(sizes_[l] + 1) * sizes_[l + 1];
  }
}

std::vector<int> GaussianPolicy::LayerSizes() const { return sizes_; }

RealVec GaussianPolicy::Init(numkit::Rng& rng) const {
  RealVec theta(param_count_);
  Eigen::Index off = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    const double scale = (l + 1 == layers) ? config_.output_init_scale : 1.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(in) * out; ++i) {
      theta(off + i) = scale * rng.Uniform(-bound, bound);
    }
    off += static_cast<Eigen::Index>(in) * out;
    for (int j = 0; j < out; ++j) {
      const bool log_std_bias = (l + 1 == layers) && j >= config_.ActionDim();
      theta(off + j) = log_std_bias ? config_.init_log_std : 0.0;
    }
    off += out;
  }
  return theta;
}

GaussianPolicy::Head GaussianPolicy::Forward(Tape& tape, const RealVec& theta,
                                             Tape::Var inputs) const {
  if (theta.size() != param_count_) throw std::invalid_argument("GaussianPolicy: theta size");
  Tape::Var x = inputs;
  Eigen::Index off = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Tape::Var w = tape.Parameter(theta, off, in, out);
    off += static_cast<Eigen::Index>(in) * out;
    Tape::Var b = tape.Parameter(theta, off, 1, out);
    off += out;
    x = tape.Affine(x, w, b);
    if (l + 1 < layers) x = tape.Tanh(x);
  }
  const int d = config_.ActionDim();
  Head head;
  head.mean = tape.SliceCols(x, 0, d);
  head.log_std = tape.Clamp(tape.SliceCols(x, d, d), config_.log_std_min, config_.log_std_max);
  return head;
}

Tape::Var GaussianPolicy::GaussianLogDensity(Tape& tape, const Head& head,
                                             const RealMat& z) const {
  Tape::Var diff = tape.Sub(tape.Constant(z), head.mean);
  Tape::Var scaled = tape.Mul(diff, tape.Exp(tape.Scale(head.log_std, -1.0)));
  // -0.5 t^2 - log sigma - 0.5 log(2 pi), summed over action dimensions.
  Tape::Var per_dim =
      tape.AddScalar(tape.Sub(tape.Scale(tape.Square(scaled), -0.5), head.log_std),
                     -0.5 * std::log(2.0 * std::numbers::pi));
  return tape.RowSum(per_dim);
}

env::Action GaussianPolicy::Squash(const RealVec& z) const {
  const int k_users = config_.num_users;
  env::Action a;
  a.weights.resize(k_users);
  for (int k = 0; k < k_users; ++k) {
    a.weights(k) = config_.omega_min + (1.0 - config_.omega_min) * Sigmoid(z(k));
  }
  a.power_w = config_.max_power_w * Sigmoid(z(k_users));
  // Saturated sigmoids can round to the closed bounds; keep p strictly positive.
  a.power_w = std::max(a.power_w, std::numeric_limits<double>::min());
  a.weights = a.weights.cwiseMin(1.0);
  return a;
}

double GaussianPolicy::LogSquashJacobian(const RealVec& z) const {
  const int k_users = config_.num_users;
  double total = 0.0;
  for (int k = 0; k < k_users; ++k) {
    total += std::log(1.0 - config_.omega_min) + LogSigmoidSlope(z(k));
  }
  total += std::log(config_.max_power_w) + LogSigmoidSlope(z(k_users));
  return total;
}

SampledAction GaussianPolicy::Act(const RealVec& theta, const RealRow& features,
                                  numkit::Rng& rng) const {
  Tape tape;
  const Head head = Forward(tape, theta, tape.Constant(features));
  const RealMat& mean = tape.Value(head.mean);
  const RealMat& log_std = tape.Value(head.log_std);
  if (!mean.allFinite() || !log_std.allFinite()) {
    throw numkit::NumericalError("GaussianPolicy::Act: non-finite network output");
  }
  const int d = config_.ActionDim();
  SampledAction out;
  out.z.resize(d);
  double log_density = 0.0;
  for (int j = 0; j < d; ++j) {
    const double sigma = std::exp(log_std(0, j));
    const double eps = rng.Gaussian(0.0, 1.0);
    out.z(j) = mean(0, j) + sigma * eps;
    log_density += -0.5 * eps * eps - log_std(0, j) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  out.action = Squash(out.z);
  out.log_prob = log_density - LogSquashJacobian(out.z);
  return out;
}

double GaussianPolicy::LogProb(const RealVec& theta, const RealRow& features,
                               const RealVec& z) const {
  Tape tape;
  const Head head = Forward(tape, theta, tape.Constant(features));
  Tape::Var lp = GaussianLogDensity(tape, head, z.transpose());
  return tape.Scalar(lp) - LogSquashJacobian(z);
}

RealVec GaussianPolicy::Score(const RealVec& theta, const RealRow& features,
                              const RealVec& z) const {
  Tape tape;
  const Head head = Forward(tape, theta, tape.Constant(features));
  Tape::Var lp = GaussianLogDensity(tape, head, z.transpose());
  return tape.Backward(lp, param_count_);
}

RealMat GaussianPolicy::WeightedScores(const RealVec& theta, const RealMat& features,
                                       const RealMat& z, const RealMat& weights) const {
  if (features.rows() != z.rows() || weights.rows() != z.rows()) {
    throw std::invalid_argument("GaussianPolicy::WeightedScores: batch size mismatch");
  }
  Tape tape;
  const Head head = Forward(tape, theta, tape.Constant(features));
  Tape::Var lp = GaussianLogDensity(tape, head, z);
  RealMat out(weights.cols(), param_count_);
  for (Eigen::Index j = 0; j < weights.cols(); ++j) {
    Tape::Var weighted = tape.Sum(tape.Mul(lp, tape.Constant(weights.col(j))));
    out.row(j) = tape.Backward(weighted, param_count_).transpose();
  }
  if (!out.allFinite()) throw numkit::NumericalError("GaussianPolicy: non-finite score");
  return out;
}

}  // namespace caac::policy
