#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "cwhom/constants.hpp"

namespace cwhom {

// Deterministic random source. mt19937_64 has a standard-pinned sequence
// and the variate transforms below avoid the implementation-defined
// std::*_distribution adapters, so streams are bit-identical across
// compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Child generator for an independent stream, derived from (seed, stream).
  static Rng child(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(seed + 0x9E3779B97F4A7C15ull * (stream + 1)));
  }

  std::uint64_t raw() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  // Box-Muller without caching: one value per call, fixed draw count.
  double normal(double sigma) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace cwhom
