#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dpcr/counter.hpp"
#include "dpcr/hashing.hpp"
#include "dpcr/stream.hpp"

namespace dpcr {

struct F2Params {
  uint64_t universe = 2;
  uint64_t capacity = 1;    // T
  double rho = 1.0;
  double alpha = 0.25;      // target multiplicative slack, in (0, 1)
  bool noise_off = false;
  int jl_constant = 12;     // C1 in m = ceil(C1 * log2(T) / alpha0^2)
  double floor_gamma = 0.0; // 0 selects the default 1/T
  int row_override = 0;     // > 0 forces the row count
};

// Number of reduced dimensions m for the given target slack.
int f2_row_count(uint64_t capacity, double alpha, int jl_constant = 12);

// Rademacher sketch of the frequency vector with one tree counter per
// reduced coordinate.  Row i of the (scaled) projection is a k-wise sign
// hash with k = ceil(log2 T) + 1; counter i tracks sqrt(m) times the i-th
// reduced coordinate, and the estimate is max(0, (1/m) * sum of squared
// noisy counter values).
class F2Estimator {
 public:
  F2Estimator(const F2Params& params, uint64_t seed);

  double step(const StreamUpdate& update);

  double current() const { return estimate_; }
  int rows() const { return static_cast<int>(counters_.size()); }
  double counter_rho() const { return counter_rho_; }
  // Per-counter noise floor (counter units).
  double counter_floor() const { return counter_floor_; }
  double composed_budget() const { return counter_rho_ * rows(); }
  const std::vector<ContinualCounter>& counters() const { return counters_; }
  int row_sign(int row, uint64_t element) const {
    return row_hash_[row](element) == 0 ? -1 : +1;
  }

  size_t state_words() const;

 private:
  const std::vector<uint64_t>& signs_for(uint64_t element);

  std::vector<PolyHash> row_hash_;
  std::vector<ContinualCounter> counters_;
  double counter_rho_;
  double counter_floor_;
  double estimate_ = 0.0;
  // Packed per-element sign rows, built lazily; avoids re-hashing hot
  // elements.  Purely a cache: outputs do not depend on it.
  std::unordered_map<uint64_t, std::vector<uint64_t>> sign_cache_;
  size_t sign_cache_limit_ = 4096;
};

// Additive envelope from the accuracy proof: 10 * lambda^2 * m / alpha,
// with lambda the per-counter noise floor.
double f2_error_bound(double rho, uint64_t capacity, double alpha,
                      int jl_constant = 12, double floor_gamma = 0.0);

}  // namespace dpcr
