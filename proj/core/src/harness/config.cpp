#include "caac/harness/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "caac/numkit/rng.hpp"

namespace caac::harness {

namespace {

struct RawValue {
  std::string text;                // scalar token (strings unquoted)
  std::vector<std::string> items;  // array elements
  bool is_array = false;
  bool is_string = false;
  int line = 0;
};

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void Fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

std::string StripComment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

RawValue ParseValue(const std::string& text, int line) {
  RawValue v;
  v.line = line;
  if (text.empty()) Fail(line, "missing value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') Fail(line, "unterminated string");
    v.text = text.substr(1, text.size() - 2);
    v.is_string = true;
    return v;
  }
  if (text.front() == '[') {
    if (text.back() != ']') Fail(line, "unterminated array");
    v.is_array = true;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = Trim(item);
      if (item.empty()) Fail(line, "empty array element");
      v.items.push_back(item);
    }
    return v;
  }
  v.text = text;
  return v;
}

double ToDouble(const RawValue& v) {
  if (v.is_array || v.is_string) Fail(v.line, "expected a number");
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.text.c_str(), &end);
  if (end == v.text.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
    Fail(v.line, "malformed number '" + v.text + "'");
  }
  return x;
}

long long ToInteger(const std::string& text, int line) {
  char* end = nullptr;
  errno = 0;
  const long long x = std::strtoll(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE) {
    Fail(line, "malformed integer '" + text + "'");
  }
  return x;
}

int ToInt(const RawValue& v) {
  if (v.is_array || v.is_string) Fail(v.line, "expected an integer");
  const long long x = ToInteger(v.text, v.line);
  if (x < -2147483647LL || x > 2147483647LL) Fail(v.line, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t ToUint64(const RawValue& v) {
  if (v.is_array || v.is_string || v.text.empty() || v.text[0] == '-') {
    Fail(v.line, "expected a non-negative integer");
  }
  char* end = nullptr;
  errno = 0;
  const unsigned long long x = std::strtoull(v.text.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) Fail(v.line, "malformed integer '" + v.text + "'");
  return x;
}

bool ToBool(const RawValue& v) {
  if (v.text == "true" && !v.is_string) return true;
  if (v.text == "false" && !v.is_string) return false;
  Fail(v.line, "expected true or false");
}

std::string ToString(const RawValue& v) {
  if (!v.is_string) Fail(v.line, "expected a quoted string");
  return v.text;
}

std::vector<int> ToIntList(const RawValue& v) {
  if (!v.is_array) Fail(v.line, "expected an array");
  std::vector<int> out;
  for (const std::string& item : v.items) out.push_back(static_cast<int>(ToInteger(item, v.line)));
  return out;
}

using Setter = std::function<void(RunConfig&, const RawValue&)>;

const std::map<std::string, Setter>& Setters() {
  static const std::map<std::string, Setter> table = {
      {"run.algorithm", [](RunConfig& c, const RawValue& v) {
         try {
           c.algorithm = ParseAlgorithm(ToString(v));
         } catch (const ConfigError& e) {
           Fail(v.line, e.what());
         }
       }},
      {"run.iterations", [](RunConfig& c, const RawValue& v) { c.iterations = ToInt(v); }},
      {"run.batch", [](RunConfig& c, const RawValue& v) { c.batch = ToInt(v); }},
      {"run.critic_minibatches",
       [](RunConfig& c, const RawValue& v) { c.critic_minibatches = ToInt(v); }},
      {"run.seed", [](RunConfig& c, const RawValue& v) { c.seed = ToUint64(v); }},
      {"run.output_dir", [](RunConfig& c, const RawValue& v) { c.output_dir = ToString(v); }},
      {"run.record_wall_time",
       [](RunConfig& c, const RawValue& v) { c.record_wall_time = ToBool(v); }},
      {"run.log_raw", [](RunConfig& c, const RawValue& v) { c.log_raw = ToBool(v); }},

      {"env.users", [](RunConfig& c, const RawValue& v) { c.env.num_users = ToInt(v); }},
      {"env.antennas", [](RunConfig& c, const RawValue& v) { c.env.num_antennas = ToInt(v); }},
      {"env.cell_radius_m", [](RunConfig& c, const RawValue& v) { c.env.cell_radius_m = ToDouble(v); }},
      {"env.min_distance_m",
       [](RunConfig& c, const RawValue& v) { c.env.min_distance_m = ToDouble(v); }},
      {"env.speed_kmh", [](RunConfig& c, const RawValue& v) { c.env.speed_kmh = ToDouble(v); }},
      {"env.carrier_hz", [](RunConfig& c, const RawValue& v) { c.env.carrier_hz = ToDouble(v); }},
      {"env.slot_s", [](RunConfig& c, const RawValue& v) { c.env.slot_s = ToDouble(v); }},
      {"env.bandwidth_hz", [](RunConfig& c, const RawValue& v) { c.env.bandwidth_hz = ToDouble(v); }},
      {"env.noise_dbm_per_hz",
       [](RunConfig& c, const RawValue& v) { c.env.noise_dbm_per_hz = ToDouble(v); }},
      {"env.max_power_w", [](RunConfig& c, const RawValue& v) { c.env.max_power_w = ToDouble(v); }},
      {"env.arrival_prob_min",
       [](RunConfig& c, const RawValue& v) { c.traffic.arrival_prob_min = ToDouble(v); }},
      {"env.arrival_prob_max",
       [](RunConfig& c, const RawValue& v) { c.traffic.arrival_prob_max = ToDouble(v); }},
      {"env.mean_arrival_bits_min",
       [](RunConfig& c, const RawValue& v) { c.traffic.mean_arrival_bits_min = ToDouble(v); }},
      {"env.mean_arrival_bits_max",
       [](RunConfig& c, const RawValue& v) { c.traffic.mean_arrival_bits_max = ToDouble(v); }},
      {"env.delay_threshold_slots",
       [](RunConfig& c, const RawValue& v) { c.traffic.delay_threshold_slots = ToDouble(v); }},
      {"env.rate_threshold_bps",
       [](RunConfig& c, const RawValue& v) { c.traffic.rate_threshold_bps = ToDouble(v); }},

      {"wmmse.max_iterations",
       [](RunConfig& c, const RawValue& v) { c.wmmse_max_iterations = ToInt(v); }},
      {"wmmse.tolerance", [](RunConfig& c, const RawValue& v) { c.wmmse_tolerance = ToDouble(v); }},

      {"learning.zeta", [](RunConfig& c, const RawValue& v) { c.zeta = ToDouble(v); }},
      {"learning.kappa1", [](RunConfig& c, const RawValue& v) { c.schedule.kappa1 = ToDouble(v); }},
      {"learning.kappa2", [](RunConfig& c, const RawValue& v) { c.schedule.kappa2 = ToDouble(v); }},
      {"learning.kappa3", [](RunConfig& c, const RawValue& v) { c.schedule.kappa3 = ToDouble(v); }},
      {"learning.critic_lr", [](RunConfig& c, const RawValue& v) { c.critic_lr = ToDouble(v); }},
      {"learning.grad_clip", [](RunConfig& c, const RawValue& v) { c.grad_clip = ToDouble(v); }},
      {"learning.omega_min", [](RunConfig& c, const RawValue& v) { c.omega_min = ToDouble(v); }},
      {"learning.init_log_std",
       [](RunConfig& c, const RawValue& v) { c.init_log_std = ToDouble(v); }},
      {"learning.dual_max_iterations",
       [](RunConfig& c, const RawValue& v) { c.dual_max_iterations = ToInt(v); }},
      {"learning.dual_tolerance",
       [](RunConfig& c, const RawValue& v) { c.dual_tolerance = ToDouble(v); }},

      {"network.policy_hidden",
       [](RunConfig& c, const RawValue& v) { c.policy_hidden = ToIntList(v); }},
      {"network.critic_embed", [](RunConfig& c, const RawValue& v) { c.critic_embed = ToInt(v); }},
      {"network.critic_attention",
       [](RunConfig& c, const RawValue& v) { c.critic_attention = ToInt(v); }},
      {"network.critic_hidden", [](RunConfig& c, const RawValue& v) { c.critic_hidden = ToInt(v); }},

      {"baseline.power_w", [](RunConfig& c, const RawValue& v) { c.baseline_power_w = ToDouble(v); }},
      {"baseline.greedy_smoothing",
       [](RunConfig& c, const RawValue& v) { c.greedy_smoothing = ToDouble(v); }},
      {"baseline.greedy_epsilon",
       [](RunConfig& c, const RawValue& v) { c.greedy_epsilon = ToDouble(v); }},
  };
  return table;
}

void Check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

std::string Num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string Bool(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string AlgorithmName(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kCaac:
      return "caac";
    case Algorithm::kCaacMinus:
      return "caac_minus";
    case Algorithm::kEp:
      return "ep";
    case Algorithm::kGreedy:
      return "greedy";
  }
  return "unknown";
}

Algorithm ParseAlgorithm(std::string_view name) {
  if (name == "caac") return Algorithm::kCaac;
  if (name == "caac_minus") return Algorithm::kCaacMinus;
  if (name == "ep") return Algorithm::kEp;
  if (name == "greedy") return Algorithm::kGreedy;
  throw ConfigError("unknown algorithm '" + std::string(name) +
                    "' (expected caac, caac_minus, ep or greedy)");
}

void RunConfig::Validate() const {
  Check(iterations >= 1, "run.iterations must be >= 1");
  Check(batch >= 1, "run.batch must be >= 1");
  Check(critic_minibatches >= 1, "run.critic_minibatches must be >= 1");
  Check(batch % critic_minibatches == 0, "run.batch must be a multiple of run.critic_minibatches");
  Check(traffic.arrival_prob_min >= 0.0 && traffic.arrival_prob_min <= traffic.arrival_prob_max &&
            traffic.arrival_prob_max <= 1.0,
        "need 0 <= arrival_prob_min <= arrival_prob_max <= 1");
  Check(traffic.mean_arrival_bits_min > 0.0 &&
            traffic.mean_arrival_bits_min <= traffic.mean_arrival_bits_max,
        "need 0 < mean_arrival_bits_min <= mean_arrival_bits_max");
  Check(traffic.delay_threshold_slots > 0.0, "env.delay_threshold_slots must be > 0");
  Check(traffic.rate_threshold_bps > 0.0, "env.rate_threshold_bps must be > 0");
  Check(traffic.arrival_prob_min > 0.0, "env.arrival_prob_min must be > 0");
  try {
    ResolveEnv(*this).Validate();
    schedule.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  Check(wmmse_max_iterations >= 1, "wmmse.max_iterations must be >= 1");
  Check(wmmse_tolerance > 0.0, "wmmse.tolerance must be > 0");
  Check(zeta > 0.0, "learning.zeta must be > 0");
  Check(critic_lr > 0.0, "learning.critic_lr must be > 0");
  Check(grad_clip > 0.0, "learning.grad_clip must be > 0");
  Check(omega_min > 0.0 && omega_min < 1.0, "learning.omega_min must lie in (0,1)");
  Check(dual_max_iterations >= 1, "learning.dual_max_iterations must be >= 1");
  Check(dual_tolerance > 0.0, "learning.dual_tolerance must be > 0");
  Check(!policy_hidden.empty(), "network.policy_hidden must not be empty");
  for (int h : policy_hidden) Check(h >= 1, "network.policy_hidden widths must be >= 1");
  Check(critic_embed >= 1, "network.critic_embed must be >= 1");
  Check(critic_attention >= 2 && critic_attention % 2 == 0,
        "network.critic_attention must be even and >= 2");
  Check(critic_hidden >= 0, "network.critic_hidden must be >= 0");
  Check(baseline_power_w > 0.0 && baseline_power_w <= env.max_power_w,
        "baseline.power_w must lie in (0, env.max_power_w]");
  Check(greedy_smoothing >= 0.0 && greedy_smoothing < 1.0,
        "baseline.greedy_smoothing must lie in [0,1)");
  Check(greedy_epsilon > 0.0, "baseline.greedy_epsilon must be > 0");
}

RunConfig ParseConfig(std::string_view text) {
  RunConfig config;
  const auto& setters = Setters();
  std::map<std::string, int> seen;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = Trim(StripComment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') Fail(line_no, "malformed section header");
      section = Trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "env" && section != "wmmse" && section != "learning" &&
          section != "network" && section != "baseline") {
        Fail(line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) Fail(line_no, "expected key = value");
    if (section.empty()) Fail(line_no, "key outside of a section");
    const std::string key = section + "." + Trim(line.substr(0, eq));
    const auto it = setters.find(key);
    if (it == setters.end()) Fail(line_no, "unknown key '" + key + "'");
    if (seen.count(key)) Fail(line_no, "duplicate key '" + key + "'");
    seen[key] = line_no;
    it->second(config, ParseValue(Trim(line.substr(eq + 1)), line_no));
  }
  config.Validate();
  return config;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string FormatConfig(const RunConfig& c) {
  std::ostringstream o;
  o << "[run]\n"
    << "algorithm = \"" << AlgorithmName(c.algorithm) << "\"\n"
    << "iterations = " << c.iterations << "\n"
    << "batch = " << c.batch << "\n"
    << "critic_minibatches = " << c.critic_minibatches << "\n"
    << "seed = " << c.seed << "\n"
    << "output_dir = \"" << c.output_dir << "\"\n"
    << "record_wall_time = " << Bool(c.record_wall_time) << "\n"
    << "log_raw = " << Bool(c.log_raw) << "\n\n";
  o << "[env]\n"
    << "users = " << c.env.num_users << "\n"
    << "antennas = " << c.env.num_antennas << "\n"
    << "cell_radius_m = " << Num(c.env.cell_radius_m) << "\n"
    << "min_distance_m = " << Num(c.env.min_distance_m) << "\n"
    << "speed_kmh = " << Num(c.env.speed_kmh) << "\n"
    << "carrier_hz = " << Num(c.env.carrier_hz) << "\n"
    << "slot_s = " << Num(c.env.slot_s) << "\n"
    << "bandwidth_hz = " << Num(c.env.bandwidth_hz) << "\n"
    << "noise_dbm_per_hz = " << Num(c.env.noise_dbm_per_hz) << "\n"
    << "max_power_w = " << Num(c.env.max_power_w) << "\n"
    << "arrival_prob_min = " << Num(c.traffic.arrival_prob_min) << "\n"
    << "arrival_prob_max = " << Num(c.traffic.arrival_prob_max) << "\n"
    << "mean_arrival_bits_min = " << Num(c.traffic.mean_arrival_bits_min) << "\n"
    << "mean_arrival_bits_max = " << Num(c.traffic.mean_arrival_bits_max) << "\n"
    << "delay_threshold_slots = " << Num(c.traffic.delay_threshold_slots) << "\n"
    << "rate_threshold_bps = " << Num(c.traffic.rate_threshold_bps) << "\n\n";
  o << "[wmmse]\n"
    << "max_iterations = " << c.wmmse_max_iterations << "\n"
    << "tolerance = " << Num(c.wmmse_tolerance) << "\n\n";
  o << "[learning]\n"
    << "zeta = " << Num(c.zeta) << "\n"
    << "kappa1 = " << Num(c.schedule.kappa1) << "\n"
    << "kappa2 = " << Num(c.schedule.kappa2) << "\n"
    << "kappa3 = " << Num(c.schedule.kappa3) << "\n"
    << "critic_lr = " << Num(c.critic_lr) << "\n"
    << "grad_clip = " << Num(c.grad_clip) << "\n"
    << "omega_min = " << Num(c.omega_min) << "\n"
    << "init_log_std = " << Num(c.init_log_std) << "\n"
    << "dual_max_iterations = " << c.dual_max_iterations << "\n"
    << "dual_tolerance = " << Num(c.dual_tolerance) << "\n\n";
  o << "[network]\n"
    << "policy_hidden = [";
  for (std::size_t i = 0; i < c.policy_hidden.size(); ++i) {
    o << (i ? ", " : "") << c.policy_hidden[i];
  }
  o << "]\n"
    << "critic_embed = " << c.critic_embed << "\n"
    << "critic_attention = " << c.critic_attention << "\n"
    << "critic_hidden = " << c.critic_hidden << "\n\n";
  o << "[baseline]\n"
    << "power_w = " << Num(c.baseline_power_w) << "\n"
    << "greedy_smoothing = " << Num(c.greedy_smoothing) << "\n"
    << "greedy_epsilon = " << Num(c.greedy_epsilon) << "\n";
  return o.str();
}

env::EnvConfig ResolveEnv(const RunConfig& config) {
  env::EnvConfig env = config.env;
  if (env.num_users < 1) throw std::invalid_argument("K must be >= 1");
  numkit::Rng rng = numkit::Rng(config.seed).Substream("config/users");
  env.users = env::DrawUsers(env.num_users, config.traffic, rng);
  return env;
}

}  // namespace caac::harness
