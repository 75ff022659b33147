#include "caac/env/environment.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "caac/numkit/special.hpp"

namespace caac::env {

namespace {

constexpr double kSpeedOfLight = 3.0e8;

void Require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("EnvConfig: " + what);
}

}  // namespace

void EnvConfig::Validate() const {
  Require(num_users >= 1, "K must be >= 1");
  Require(num_antennas >= 1, "M must be >= 1");
  Require(slot_s > 0.0, "slot duration must be > 0");
  Require(bandwidth_hz > 0.0, "bandwidth must be > 0");
  Require(cell_radius_m > min_distance_m && min_distance_m > 0.0,
          "need 0 < min distance < cell radius");
  Require(speed_kmh >= 0.0, "speed must be >= 0");
  Require(carrier_hz > 0.0, "carrier must be > 0");
  Require(max_power_w > 0.0, "max power must be > 0");
  Require(static_cast<int>(users.size()) == num_users, "one UserSpec per user required");
  for (const UserSpec& u : users) {
    Require(u.arrival_prob >= 0.0 && u.arrival_prob <= 1.0, "P_k outside [0,1]");
    Require(u.mean_arrival_bits > 0.0, "lambda_k must be > 0");
    Require(std::isfinite(u.threshold), "threshold must be finite");
  }
}

std::vector<UserSpec> DrawUsers(int num_users, const TrafficRanges& ranges, numkit::Rng& rng) {
  std::vector<UserSpec> users(num_users);
  const int delay_users = (num_users + 1) / 2;
  for (int k = 0; k < num_users; ++k) {
    UserSpec& u = users[k];
    u.arrival_prob = rng.Uniform(ranges.arrival_prob_min, ranges.arrival_prob_max);
    u.mean_arrival_bits = rng.Uniform(ranges.mean_arrival_bits_min, ranges.mean_arrival_bits_max);
    if (k < delay_users) {
      u.category = QosCategory::kDelaySensitive;
      u.threshold = ranges.delay_threshold_slots;
    } else {
      u.category = QosCategory::kDelayTolerant;
      u.threshold = -ranges.rate_threshold_bps;
    }
  }
  return users;
}

double NoisePower(double noise_dbm_per_hz, double bandwidth_hz) {
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("NoisePower: bandwidth must be > 0");
  return std::pow(10.0, (noise_dbm_per_hz + 10.0 * std::log10(bandwidth_hz) - 30.0) / 10.0);
}

double NoisePower(const EnvConfig& config) {
  return NoisePower(config.noise_dbm_per_hz, config.bandwidth_hz);
}

double PathlossDb(double distance_m) {
  if (!(distance_m > 0.0)) throw std::invalid_argument("PathlossDb: distance must be > 0");
  return 34.0 + 40.0 * std::log10(distance_m);
}

double DopplerHz(double speed_kmh, double carrier_hz) {
  return speed_kmh / 3.6 * carrier_hz / kSpeedOfLight;
}

double JakesCorrelation(double speed_kmh, double carrier_hz, double slot_s) {
  return numkit::BesselJ0(2.0 * std::numbers::pi * DopplerHz(speed_kmh, carrier_hz) * slot_s);
}

ChannelModel::ChannelModel(const EnvConfig& config, numkit::Rng mobility, numkit::Rng fading)
    : min_distance_m_(config.min_distance_m),
      cell_radius_m_(config.cell_radius_m),
      mobility_rng_(std::move(mobility)),
      fading_rng_(std::move(fading)),
      rho_(JakesCorrelation(config.speed_kmh, config.carrier_hz, config.slot_s)),
      doppler_(DopplerHz(config.speed_kmh, config.carrier_hz)),
      step_m_(config.speed_kmh / 3.6 * config.slot_s) {
  const int k_users = config.num_users;
  pos_x_.resize(k_users);
  pos_y_.resize(k_users);
  heading_.resize(k_users);
  const double r_min2 = config.min_distance_m * config.min_distance_m;
  const double r_max2 = config.cell_radius_m * config.cell_radius_m;
  for (int k = 0; k < k_users; ++k) {
    // Uniform over the annulus area.
    const double r = std::sqrt(mobility_rng_.Uniform(r_min2, r_max2));
    const double phi = mobility_rng_.Uniform(0.0, 2.0 * std::numbers::pi);
    pos_x_(k) = r * std::cos(phi);
    pos_y_(k) = r * std::sin(phi);
    heading_(k) = mobility_rng_.Uniform(0.0, 2.0 * std::numbers::pi);
  }
  RefreshDistances();

  small_scale_.resize(k_users, config.num_antennas);
  const double s = std::sqrt(0.5);
  for (Eigen::Index i = 0; i < small_scale_.size(); ++i) {
    small_scale_(i) = {fading_rng_.Gaussian(0.0, s), fading_rng_.Gaussian(0.0, s)};
  }
}

void ChannelModel::RefreshDistances() {
  distance_ = (pos_x_.array().square() + pos_y_.array().square()).sqrt();
}

void ChannelModel::Advance() {
  const double r_min = min_distance_m_;
  const double r_max = cell_radius_m_;
  for (Eigen::Index k = 0; k < pos_x_.size(); ++k) {
    const double nx = pos_x_(k) + step_m_ * std::cos(heading_(k));
    const double ny = pos_y_(k) + step_m_ * std::sin(heading_(k));
    const double nr = std::hypot(nx, ny);
    if (nr > r_max || nr < r_min) {
      heading_(k) += std::numbers::pi;
    } else {
      pos_x_(k) = nx;
      pos_y_(k) = ny;
    }
  }
  RefreshDistances();

  const double innov = std::sqrt(std::max(0.0, 1.0 - rho_ * rho_));
  const double s = std::sqrt(0.5);
  for (Eigen::Index i = 0; i < small_scale_.size(); ++i) {
    const numkit::Complex u{fading_rng_.Gaussian(0.0, s), fading_rng_.Gaussian(0.0, s)};
    small_scale_(i) = rho_ * small_scale_(i) + innov * u;
  }
}

RealVec ChannelModel::Amplitudes() const {
  return distance_.unaryExpr([](double d) { return std::pow(10.0, -PathlossDb(d) / 20.0); });
}

ComplexMat ChannelModel::Channel() const {
  return Amplitudes().asDiagonal() * small_scale_;
}

RealVec NextQueues(const RealVec& queues, const RealVec& rates_bps, double slot_s,
                   const RealVec& arrivals_bits) {
  if (!rates_bps.allFinite()) throw std::invalid_argument("NextQueues: non-finite rate");
  return (queues - rates_bps * slot_s).cwiseMax(0.0) + arrivals_bits;
}

RealVec Utilities(const EnvConfig& config, const SysState& state, const RealVec& rates_bps) {
  const int k_users = config.num_users;
  RealVec u(k_users);
  for (int k = 0; k < k_users; ++k) {
    const UserSpec& spec = config.users[k];
    if (spec.category == QosCategory::kDelaySensitive) {
      const double a = spec.MeanArrivalPerSlot();
      if (!(a > 0.0)) {
        throw std::invalid_argument("Utilities: delay-sensitive user with zero mean arrival");
      }
      u(k) = state.queues(k) / a;
    } else {
      u(k) = -rates_bps(k);
    }
  }
  return u;
}

RealVec CostSignals(const EnvConfig& config, const SysState& state, const Action& action,
                    const RealVec& rates_bps) {
  const RealVec u = Utilities(config, state, rates_bps);
  RealVec costs(config.num_users + 1);
  costs(0) = action.power_w;
  for (int k = 0; k < config.num_users; ++k) costs(k + 1) = u(k) - config.users[k].threshold;
  return costs;
}

void ValidateAction(const EnvConfig& config, const Action& action) {
  if (action.weights.size() != config.num_users) {
    throw std::invalid_argument("Action: weight vector has wrong length");
  }
  if (!(action.weights.array() > 0.0).all() || !(action.weights.array() <= 1.0).all()) {
    throw std::invalid_argument("Action: weights must lie in (0, 1]");
  }
  if (!(action.power_w > 0.0 && action.power_w <= config.max_power_w)) {
    throw std::invalid_argument("Action: power must lie in (0, P_max]");
  }
}

Environment::Environment(EnvConfig config, std::uint64_t seed)
    : config_((config.Validate(), std::move(config))),
      arrival_rng_(numkit::Rng(seed).Substream("env/arrivals")),
      channel_(config_, numkit::Rng(seed).Substream("env/mobility"),
               numkit::Rng(seed).Substream("env/fading")),
      noise_power_(NoisePower(config_)) {
  state_.queues = DrawArrivals();
  state_.channel = channel_.Channel();
}

RealVec Environment::DrawArrivals() {
  RealVec a = RealVec::Zero(config_.num_users);
  for (int k = 0; k < config_.num_users; ++k) {
    const UserSpec& u = config_.users[k];
    if (arrival_rng_.Bernoulli(u.arrival_prob)) {
      a(k) = static_cast<double>(arrival_rng_.Poisson(u.mean_arrival_bits));
    }
  }
  return a;
}

Transition Environment::Step(const Action& action, const RealVec& rates_bps) {
  ValidateAction(config_, action);
  if (rates_bps.size() != config_.num_users || !rates_bps.allFinite()) {
    throw std::invalid_argument("Environment::Step: rates must be finite, one per user");
  }
  if ((rates_bps.array() < 0.0).any()) {
    throw std::invalid_argument("Environment::Step: rates must be >= 0");
  }
  Transition tr;
  tr.state = state_;
  tr.action = action;
  tr.utilities = Utilities(config_, state_, rates_bps);
  tr.costs = CostSignals(config_, state_, action, rates_bps);

  const RealVec arrivals = DrawArrivals();
  state_.queues = NextQueues(state_.queues, rates_bps, config_.slot_s, arrivals);
  channel_.Advance();
  state_.channel = channel_.Channel();
  tr.next_state = state_;
  return tr;
}

}  // namespace caac::env
