#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace caac::numkit {

// Seeded 64-bit generator with named sub-streams. Two Rng objects built from
// the same seed and label produce bit-identical sequences; distinct labels give
// statistically independent streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(Mix(seed)) {}

  // Independent stream derived from this generator's seed and `label`.
  // Does not advance this generator.
  Rng Substream(std::string_view label) const;

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  double Uniform(double lo = 0.0, double hi = 1.0);
  double Gaussian(double mean, double stddev);
  std::int64_t Poisson(double mean);
  bool Bernoulli(double p);

  static std::uint64_t Mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Free-function spellings used throughout the simulator.
inline std::int64_t SamplePoisson(Rng& rng, double mean) { return rng.Poisson(mean); }
inline double SampleGaussian(Rng& rng, double mean, double stddev) {
  return rng.Gaussian(mean, stddev);
}
inline bool SampleBernoulli(Rng& rng, double p) { return rng.Bernoulli(p); }

}  // namespace caac::numkit
