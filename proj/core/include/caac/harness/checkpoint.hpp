#pragma once

#include <string>
#include <vector>

#include "caac/numkit/linalg.hpp"

namespace caac::harness {

// Text checkpoint of a flat parameter vector:
//
//   caac-params v1
//   kind <policy|critic_attentive|critic_fcn>
//   users <K>
//   antennas <M>
//   layers <w0> <w1> ...
//   count <D>
//   <D lines, one value each, 17 significant digits>
struct Checkpoint {
  std::string kind;
  int num_users = 0;
  int num_antennas = 0;
  std::vector<int> layers;
  numkit::RealVec params;
};

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
// Throws std::runtime_error on a malformed or truncated file.
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace caac::harness
