#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>

namespace fairmarl {

// Deterministic random source. Wraps std::mt19937_64 but draws all variates
// through fixed in-house transforms so that a (seed, call sequence) pair maps
// to the same numbers on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0. Rejection-free modulo is fine here:
  // n is tiny compared to 2^64, bias is below 1e-15.
  std::uint64_t uniform_index(std::uint64_t n) { return engine_() % n; }

  // Standard normal via Box-Muller (first of the pair only, keeps state flat).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exponential with the given mean.
  double exponential(double mean) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -mean * std::log(u);
  }

  // Fisher-Yates shuffle over an index-addressable container.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Sample an index from a discrete distribution given cumulative weights is
  // left to callers; this samples from raw probabilities (must sum to ~1).
  template <typename Vec>
  std::size_t categorical(const Vec& probs) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(probs.size()); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return static_cast<std::size_t>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent substream seed from a master seed and a label.
// FNV-1a over the label, mixed with the master seed by splitmix64 steps.
std::uint64_t substream_seed(std::uint64_t master, std::string_view label);

}  // namespace fairmarl
