#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "caac/harness/metrics.hpp"

namespace {

namespace fs = std::filesystem;

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("caac_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int Exec(const std::string& args) {
  const std::string cmd = std::string(CAAC_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path WriteConfig(const fs::path& dir, const std::string& extra = "") {
  const fs::path path = dir / "tiny.toml";
  std::ofstream(path) << "[run]\n"
                         "algorithm = \"caac\"\n"
                         "iterations = 2\n"
                         "batch = 4\n"
                         "critic_minibatches = 2\n"
                         "output_dir = \"" << (dir / "out").string() << "\"\n"
                      << extra
                      << "\n[env]\nusers = 2\nantennas = 2\n"
                         "\n[network]\npolicy_hidden = [8]\ncritic_attention = 4\ncritic_hidden = 4\n";
  return path;
}

TEST(Cli, RunWritesOneRowPerIteration) {
  const fs::path dir = Scratch("run");
  const fs::path cfg = WriteConfig(dir);
  ASSERT_EQ(Exec("run --config " + cfg.string() + " --iters 3 --no-wall-time"), 0);
  const auto rows = caac::harness::ReadMetricsCsv((dir / "out" / "metrics.csv").string());
  ASSERT_EQ(rows.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(rows[i].iteration, i);
  EXPECT_TRUE(fs::exists(dir / "out" / "policy.params"));
  EXPECT_TRUE(fs::exists(dir / "out" / "run_meta.txt"));
}

TEST(Cli, OverridesAlgorithmAndOutput) {
  const fs::path dir = Scratch("override");
  const fs::path cfg = WriteConfig(dir);
  const fs::path out = dir / "ep";
  ASSERT_EQ(Exec("run --config " + cfg.string() + " --algo ep --log-raw --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "metrics.csv"));
  EXPECT_TRUE(fs::exists(out / "utilities.csv"));
  EXPECT_FALSE(fs::exists(out / "policy.params"));
}

TEST(Cli, SweepWritesOneDirectoryPerUserCount) {
  const fs::path dir = Scratch("sweep");
  const fs::path cfg = WriteConfig(dir);
  ASSERT_EQ(Exec("sweep --config " + cfg.string() + " --users 1,3 --iters 1"), 0);
  for (const char* k : {"K1", "K3"}) {
    const auto rows = caac::harness::ReadMetricsCsv((dir / "out" / k / "metrics.csv").string());
    EXPECT_EQ(rows.size(), 1u) << k;
  }
  EXPECT_EQ(caac::harness::ReadMetricsCsv((dir / "out" / "K3" / "metrics.csv").string())[0].fhat.size(),
            4);
}

TEST(Cli, ConfigErrorsExitWithOne) {
  const fs::path dir = Scratch("bad");
  EXPECT_EQ(Exec("run --config " + WriteConfig(dir, "unknown_key = 3\n").string()), 1);
  EXPECT_EQ(Exec("run --config " + (dir / "missing.toml").string()), 1);
  EXPECT_EQ(Exec("run --config " + WriteConfig(dir).string() + " --algo nope"), 1);
  EXPECT_EQ(Exec("sweep --config " + WriteConfig(dir).string() + " --users 2,x"), 1);
}

TEST(Cli, SelftestPasses) { EXPECT_EQ(Exec("selftest"), 0); }

}  // namespace
