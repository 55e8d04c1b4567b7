#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mela {

// SplitMix64 finaliser, used to decorrelate consecutive seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// 64-bit Mersenne Twister seeded through splitmix64. Uniforms are built from
// the top 53 bits of each draw so results do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform01() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

 private:
  std::mt19937_64 engine_;
};

// Seed of replica r in an ensemble started from `base`.
constexpr std::uint64_t replica_seed(std::uint64_t base, std::uint64_t r) { return base + r; }

}  // namespace mela
