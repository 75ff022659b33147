#include "caac/numkit/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace caac::numkit {

std::uint64_t Rng::Mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::Substream(std::string_view label) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Rng(Mix(seed_ ^ Mix(h)));
}

double Rng::Uniform(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("Uniform: lo > hi");
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

double Rng::Gaussian(double mean, double stddev) {
  if (!(stddev > 0.0) || !std::isfinite(mean)) {
    throw std::invalid_argument("Gaussian: stddev must be > 0");
  }
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

std::int64_t Rng::Poisson(double mean) {
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw std::invalid_argument("Poisson: mean must be > 0");
  }
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(engine_);
}

bool Rng::Bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("Bernoulli: p outside [0,1]");
  std::bernoulli_distribution dist(p);
  return dist(engine_);
}

}  // namespace caac::numkit
