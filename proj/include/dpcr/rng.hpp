#pragma once

#include <cstdint>

namespace dpcr {

// Counter-mode 64-bit generator (splitmix64 finalizer over a Weyl sequence).
// Output i is a pure function of (seed, i), so any single draw can be
// reproduced from its index without replaying the sequence.

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline uint64_t u64_at(uint64_t seed, uint64_t index) {
  return mix64(seed + (index + 1) * 0x9E3779B97F4A7C15ull);
}

// Independent child stream for a named component or replica.
inline uint64_t derive_seed(uint64_t seed, uint64_t component) {
  return u64_at(seed ^ 0xD6E8FEB86659FD93ull, component);
}

// Uniform in (0, 1]; never 0, so log() stays finite.
inline double unit_at(uint64_t seed, uint64_t index) {
  return static_cast<double>((u64_at(seed, index) >> 11) + 1) * 0x1p-53;
}

class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : seed_(seed) {}

  uint64_t next_u64() { return u64_at(seed_, counter_++); }

  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
  }

  // Uniform in [0, bound) by rejection; bound > 0.
  uint64_t next_below(uint64_t bound) {
    const uint64_t threshold = (-bound) % bound;  // 2^64 mod bound
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace dpcr
