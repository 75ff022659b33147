#pragma once

#include <cstdint>
#include <vector>

#include "caac/numkit/linalg.hpp"
#include "caac/numkit/rng.hpp"

namespace caac::env {

using numkit::ComplexMat;
using numkit::RealVec;

enum class QosCategory : int {
  kDelaySensitive = 1,  // utility L_k / a_k (slots of average arrival)
  kDelayTolerant = 2,   // utility -R_k (bits/s)
};

struct UserSpec {
  QosCategory category = QosCategory::kDelaySensitive;
  double arrival_prob = 0.5;          // P_k
  double mean_arrival_bits = 1.0e4;   // lambda_k
  // Stored so that every constraint reads utility - threshold <= 0:
  // delay users hold a positive slot count, rate users the negated rate.
  double threshold = 3.0;

  // a_k = P_k * lambda_k, bits per slot.
  double MeanArrivalPerSlot() const { return arrival_prob * mean_arrival_bits; }
};

struct EnvConfig {
  int num_users = 8;       // K
  int num_antennas = 16;   // M
  double cell_radius_m = 500.0;
  double min_distance_m = 35.0;
  double speed_kmh = 3.0;
  double carrier_hz = 3.5e9;
  double slot_s = 1.0e-3;
  double bandwidth_hz = 1.0e6;
  double noise_dbm_per_hz = -174.0;
  double max_power_w = 10.0;
  std::vector<UserSpec> users;

  // Throws std::invalid_argument when an invariant is violated.
  void Validate() const;
};

// Traffic and QoS ranges used to populate EnvConfig::users.
struct TrafficRanges {
  double arrival_prob_min = 0.4;
  double arrival_prob_max = 0.6;
  double mean_arrival_bits_min = 5.0e3;
  double mean_arrival_bits_max = 15.0e3;
  double delay_threshold_slots = 3.0;
  double rate_threshold_bps = 5.0e6;
};

// Lower half of the indices delay-sensitive, the rest delay-tolerant; P_k and
// lambda_k drawn uniformly from `ranges`.
std::vector<UserSpec> DrawUsers(int num_users, const TrafficRanges& ranges, numkit::Rng& rng);

// sigma^2 = 10^((delta0 + 10 lg W - 30) / 10) watts.
double NoisePower(const EnvConfig& config);
double NoisePower(double noise_dbm_per_hz, double bandwidth_hz);

// 34 + 40 lg(d) dB.
double PathlossDb(double distance_m);

// f_d = v / c * f0.
double DopplerHz(double speed_kmh, double carrier_hz);

// rho = J0(2 pi f_d tau).
double JakesCorrelation(double speed_kmh, double carrier_hz, double slot_s);

struct SysState {
  RealVec queues;  // bits, length K
  ComplexMat channel;  // K x M, row k = h_k including the large-scale amplitude
};

// Scheduling action handed to the precoder.
struct Action {
  RealVec weights;  // omega in (0,1]^K
  double power_w = 0.0;
};

struct Transition {
  SysState state;
  Action action;
  RealVec costs;      // C'_0 .. C'_K
  RealVec utilities;  // U(rho_k, k, t) per user, raw units
  SysState next_state;
};

// Per-user mobility plus Jakes small-scale fading.
class ChannelModel {
 public:
  ChannelModel(const EnvConfig& config, numkit::Rng mobility, numkit::Rng fading);

  // Moves users, refreshes large-scale gains and advances the AR(1) process.
  void Advance();

  // K x M channel including sqrt(alpha_k).
  ComplexMat Channel() const;

  const ComplexMat& small_scale() const { return small_scale_; }
  const RealVec& distances() const { return distance_; }
  // sqrt(alpha_k) = 10^(-PL/20).
  RealVec Amplitudes() const;
  double correlation() const { return rho_; }
  double doppler_hz() const { return doppler_; }

 private:
  void RefreshDistances();

  double min_distance_m_;
  double cell_radius_m_;
  numkit::Rng mobility_rng_;
  numkit::Rng fading_rng_;
  double rho_;
  double doppler_;
  double step_m_;
  RealVec pos_x_;
  RealVec pos_y_;
  RealVec heading_;
  RealVec distance_;
  ComplexMat small_scale_;
};

// L' = max(0, L - R tau) + A.
RealVec NextQueues(const RealVec& queues, const RealVec& rates_bps, double slot_s,
                   const RealVec& arrivals_bits);

// Raw utility per user: L_k / a_k for delay-sensitive users, -R_k otherwise.
RealVec Utilities(const EnvConfig& config, const SysState& state, const RealVec& rates_bps);

// C'_0 = p; C'_k = U_k - c_k.
RealVec CostSignals(const EnvConfig& config, const SysState& state, const Action& action,
                    const RealVec& rates_bps);

// The CMDP environment: one instance per run.
class Environment {
 public:
  Environment(EnvConfig config, std::uint64_t seed);

  const EnvConfig& config() const { return config_; }
  const SysState& state() const { return state_; }
  const ChannelModel& channel_model() const { return channel_; }
  double noise_power() const { return noise_power_; }

  // Applies `action` with the achieved `rates_bps` to the current state and
  // returns the stored transition; the environment moves to next_state.
  Transition Step(const Action& action, const RealVec& rates_bps);

  // One slot of arrivals A_k (bits): lambda_k-Poisson with probability P_k.
  RealVec DrawArrivals();

 private:
  EnvConfig config_;
  numkit::Rng arrival_rng_;
  ChannelModel channel_;
  double noise_power_;
  SysState state_;
};

void ValidateAction(const EnvConfig& config, const Action& action);

}  // namespace caac::env
