#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

// Platform-stable random number generation. Nothing here goes through
// <random> distributions, whose output is implementation-defined.
namespace mhaff {

std::uint64_t splitmix64(std::uint64_t x);

// Order-sensitive combination of integers into one 64-bit seed.
std::uint64_t hash_seed(std::initializer_list<std::uint64_t> parts);

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

// Converts 32-bit words to a double in (0, 1).
double u32_to_open_unit(std::uint32_t hi, std::uint32_t lo);

// Sequential generator (xoshiro256**) for shuffling, augmentation and init.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace mhaff
