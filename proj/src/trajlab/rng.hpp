#pragma once

#include <cstdint>

namespace trajlab {

// Seeded generator used everywhere randomness is needed.
//
// State is advanced with xorshift64* (Vigna):
//   x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27;  return x * 0x2545F4914F6CDD1D
// Seeds are expanded through one round of splitmix64
// (increment 0x9E3779B97F4A7C15, mixers 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB)
// so that small consecutive seeds give unrelated streams. A zero state is
// replaced by the splitmix increment. Reals use the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p);

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a base seed and a tuple of
// integers (epoch, step, sample index, ...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace trajlab
