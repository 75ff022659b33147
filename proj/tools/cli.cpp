#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "caac/harness/config.hpp"
#include "caac/harness/runner.hpp"
#include "caac/harness/selftest.hpp"
#include "caac/numkit/linalg.hpp"

namespace caac::tools {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitOther = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algo;
  std::optional<int> iters;
  std::optional<std::string> out;
  bool log_raw = false;
  bool no_wall_time = false;
};

void AddOverrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--algo", o.algo, "caac, caac_minus, ep or greedy");
  cmd->add_option("--iters", o.iters, "Number of policy iterations");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_flag("--log-raw", o.log_raw, "Also write per-slot utilities (utilities.csv)");
  cmd->add_flag("--no-wall-time", o.no_wall_time, "Write wall_s = 0 for byte-stable metrics");
}

harness::RunConfig Resolve(const std::string& path, const Overrides& o) {
  harness::RunConfig c = harness::LoadConfig(path);
  if (o.seed) c.seed = *o.seed;
  if (o.algo) c.algorithm = harness::ParseAlgorithm(*o.algo);
  if (o.iters) c.iterations = *o.iters;
  if (o.out) c.output_dir = *o.out;
  if (o.log_raw) c.log_raw = true;
  if (o.no_wall_time) c.record_wall_time = false;
  c.Validate();
  return c;
}

std::vector<int> ParseUserList(const std::string& text) {
  std::vector<int> users;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const long k = std::strtol(item.c_str(), &end, 10);
    if (item.empty() || *end != '\0' || k < 1) {
      throw harness::ConfigError("--users: expected a comma-separated list of positive integers");
    }
    users.push_back(static_cast<int>(k));
  }
  if (users.empty()) throw harness::ConfigError("--users: empty list");
  return users;
}

int SweepThreads(std::size_t jobs) {
  int threads = 1;
  if (const char* env = std::getenv("CAAC_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) threads = n;
  }
  return std::max(1, std::min(threads, static_cast<int>(jobs)));
}

int RunCommand(const std::string& config_path, const Overrides& o) {
  const harness::RunConfig c = Resolve(config_path, o);
  std::fprintf(stderr, "caac run: algorithm %s, seed %llu, %d iterations -> %s\n",
               harness::AlgorithmName(c.algorithm).c_str(),
               static_cast<unsigned long long>(c.seed), c.iterations, c.output_dir.c_str());
  const harness::RunOutput out = harness::RunToDirectory(c, c.output_dir);
  const harness::MetricsRow& last = out.rows.back();
  std::printf("final iteration %d: avg_power_w %.6g, qos_gap %.6g\n", last.iteration,
              last.avg_power_w, last.qos_gap);
  return kExitOk;
}

int SweepCommand(const std::string& config_path, const Overrides& o, const std::string& users) {
  const harness::RunConfig base = Resolve(config_path, o);
  std::vector<harness::RunConfig> jobs;
  for (int k : ParseUserList(users)) {
    harness::RunConfig c = base;
    c.env.num_users = k;
    c.output_dir = (std::filesystem::path(base.output_dir) / ("K" + std::to_string(k))).string();
    c.Validate();
    jobs.push_back(std::move(c));
  }
  const int threads = SweepThreads(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        harness::RunToDirectory(jobs[j], jobs[j].output_dir);
        std::lock_guard<std::mutex> lock(mu);
        std::fprintf(stderr, "caac sweep: K=%d done -> %s\n", jobs[j].env.num_users,
                     jobs[j].output_dir.c_str());
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return kExitOk;
}

int SelftestCommand() {
  const std::vector<harness::CheckResult> results =
      harness::RunOracleSuites([](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); });
  bool ok = true;
  for (const harness::CheckResult& r : results) {
    std::printf("%s %s: %s (%s, %.1fs)\n", r.id.c_str(), r.passed ? "PASS" : "FAIL",
                r.title.c_str(), r.detail.c_str(), r.seconds);
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitOther;
}

}  // namespace

int Cli(int argc, char** argv) {
  CLI::App app{"caac: constrained actor attentive critic scheduler"};
  app.set_version_flag("--version", harness::Version());
  app.require_subcommand(1);

  std::string run_config;
  Overrides run_overrides;
  CLI::App* run = app.add_subcommand("run", "Train or evaluate one configuration");
  run->add_option("--config", run_config, "Config file")->required();
  AddOverrides(run, run_overrides);

  std::string sweep_config;
  std::string sweep_users = "4,8,12,16";
  Overrides sweep_overrides;
  CLI::App* sweep = app.add_subcommand("sweep", "One run per user count, into <out>/K<K>/");
  sweep->add_option("--config", sweep_config, "Config file")->required();
  sweep->add_option("--users", sweep_users, "Comma-separated user counts");
  AddOverrides(sweep, sweep_overrides);

  app.add_subcommand("selftest", "Run the oracle property suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return RunCommand(run_config, run_overrides);
    if (*sweep) return SweepCommand(sweep_config, sweep_overrides, sweep_users);
    return SelftestCommand();
  } catch (const harness::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const numkit::NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
}

}  // namespace caac::tools
