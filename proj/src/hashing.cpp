#include "dpcr/hashing.hpp"

namespace dpcr {

PolyHash::PolyHash(int independence, uint64_t output_range, uint64_t seed)
    : range_(output_range), seed_(seed) {
  if (independence < 1)
    throw std::invalid_argument("hash independence must be >= 1");
  if (output_range < 1 || output_range > kPrime)
    throw std::invalid_argument("hash range must lie in [1, 2^61 - 1]");
  SeededRng rng(seed);
  coeff_.reserve(independence);
  for (int i = 0; i < independence; ++i) {
    // Rejection keeps coefficients uniform over the field.
    uint64_t c;
    do {
      c = rng.next_u64() >> 3;  // 61 bits
    } while (c >= kPrime);
    coeff_.push_back(c);
  }
}

PolyHash PolyHash::with_coefficients(std::vector<uint64_t> coefficients,
                                     uint64_t output_range) {
  if (coefficients.empty())
    throw std::invalid_argument("need at least a constant coefficient");
  if (output_range < 1 || output_range > kPrime)
    throw std::invalid_argument("hash range must lie in [1, 2^61 - 1]");
  for (uint64_t c : coefficients)
    if (c >= kPrime) throw std::invalid_argument("coefficient outside field");
  PolyHash h;
  h.coeff_ = std::move(coefficients);
  h.range_ = output_range;
  h.seed_ = 0;
  return h;
}

}  // namespace dpcr
