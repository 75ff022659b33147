#include "caac/harness/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace caac::harness {

namespace {

constexpr const char* kMagic = "caac-params v1";

std::string ExpectKey(std::istream& in, const std::string& key, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing '" + key + "'");
  if (line.rfind(key + " ", 0) != 0 && line != key) {
    throw std::runtime_error(path + ": expected '" + key + "', got '" + line + "'");
  }
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

}  // namespace

void SaveCheckpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << kMagic << '\n'
      << "kind " << c.kind << '\n'
      << "users " << c.num_users << '\n'
      << "antennas " << c.num_antennas << '\n'
      << "layers";
  for (int w : c.layers) out << ' ' << w;
  out << '\n' << "count " << c.params.size() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < c.params.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", c.params(i));
    out << buf << '\n';
  }
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw std::runtime_error(path + ": not a caac-params v1 file");
  }
  Checkpoint c;
  c.kind = ExpectKey(in, "kind", path);
  c.num_users = std::stoi(ExpectKey(in, "users", path));
  c.num_antennas = std::stoi(ExpectKey(in, "antennas", path));
  std::istringstream layers(ExpectKey(in, "layers", path));
  for (int w; layers >> w;) c.layers.push_back(w);
  const long long count = std::stoll(ExpectKey(in, "count", path));
  if (count < 0) throw std::runtime_error(path + ": negative count");
  c.params.resize(count);
  for (long long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated parameter list");
    char* end = nullptr;
    c.params(i) = std::strtod(line.c_str(), &end);
    if (line.empty() || *end != '\0') {
      throw std::runtime_error(path + ": malformed value at index " + std::to_string(i));
    }
  }
  return c;
}

}  // namespace caac::harness
