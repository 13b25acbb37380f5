#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dpcr/rng.hpp"

namespace dpcr {

// Polynomial hash over GF(2^61 - 1).  k uniform coefficients give a k-wise
// independent family; the output is reduced to [0, m) by plain modulus,
// whose bias is at most m / 2^61.
class PolyHash {
 public:
  static constexpr uint64_t kPrime = (1ull << 61) - 1;

  PolyHash(int independence, uint64_t output_range, uint64_t seed);

  // Fixed coefficients (constant term first); mainly for tests.
  static PolyHash with_coefficients(std::vector<uint64_t> coefficients,
                                    uint64_t output_range);

  uint64_t operator()(uint64_t key) const {
    uint64_t acc = 0;
    for (auto it = coeff_.rbegin(); it != coeff_.rend(); ++it)
      acc = mod_prime(mul_mod(acc, key) + *it);
    return acc % range_;
  }

  int independence() const { return static_cast<int>(coeff_.size()); }
  uint64_t output_range() const { return range_; }
  uint64_t seed() const { return seed_; }
  size_t state_words() const { return coeff_.size() + 2; }

 private:
  PolyHash() = default;

  static uint64_t mod_prime(uint64_t x) {
    const uint64_t r = (x & kPrime) + (x >> 61);
    return r >= kPrime ? r - kPrime : r;
  }

  static uint64_t mul_mod(uint64_t a, uint64_t b) {
    const unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
    const uint64_t lo = static_cast<uint64_t>(prod & kPrime);
    const uint64_t hi = static_cast<uint64_t>(prod >> 61);
    const uint64_t r = lo + hi;
    return r >= kPrime ? r - kPrime : r;
  }

  std::vector<uint64_t> coeff_;  // constant term first
  uint64_t range_;
  uint64_t seed_;
};

// Random sign in {-1, +1}: bucket 0 maps to -1, bucket 1 to +1.
class SignHash {
 public:
  SignHash(int independence, uint64_t seed) : hash_(independence, 2, seed) {}

  int operator()(uint64_t key) const { return hash_(key) == 0 ? -1 : +1; }

  size_t state_words() const { return hash_.state_words(); }

 private:
  PolyHash hash_;
};

// Zero-indexed position of the least significant set bit; a must be nonzero.
inline int lsb_index(uint64_t a) {
  if (a == 0) throw std::invalid_argument("lsb of zero is undefined");
  return std::countr_zero(a);
}

}  // namespace dpcr
