#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dpcr/counter.hpp"
#include "dpcr/hashing.hpp"
#include "dpcr/stream.hpp"

namespace dpcr {

struct MinHashParams {
  uint64_t universe = 2;      // rounded up to a power of two internally
  uint64_t capacity = 1;      // T
  double rho = 1.0;           // whole-estimator budget
  bool noise_off = false;
  int replicas_per_log = 8;   // replicas m = this * ceil(log2 T)
  double floor_gamma = 0.0;   // 0 selects the default 1/T
  int replica_override = 0;   // > 0 forces the replica count
};

struct ErrorBound {
  double alpha = 1.0;
  double beta = 0.0;
};

// One lsb-bucketed sketch: a pairwise hash into [n], one tree counter per
// bucket index (each at half the subroutine budget, since an event-level
// change touches at most two buckets), and the activation threshold tau.
// The estimate is 2^l for the largest bucket whose noisy sum exceeds tau.
class MinHashSubroutine {
 public:
  MinHashSubroutine(uint64_t universe, uint64_t capacity, double rho,
                    bool noise_off, double floor_gamma, uint64_t seed);

  // Routes the update to bucket lsb(h(a)), feeds zeros everywhere else and
  // returns the new distinct-count estimate (a power of two).
  int64_t step(const StreamUpdate& update);

  int64_t current() const { return estimate_; }
  double tau() const { return tau_; }
  int bucket_count() const { return static_cast<int>(counters_.size()); }
  double counter_rho() const { return counter_rho_; }
  const std::vector<ContinualCounter>& counters() const { return counters_; }
  const PolyHash& element_hash() const { return hash_; }

  // Bucket an element routes to: lsb of its hash, with output 0 standing in
  // for n (the top bucket).
  int bucket_of(uint64_t element) const {
    const uint64_t hashed = hash_(element);
    return hashed == 0 ? bucket_count() - 1 : lsb_index(hashed);
  }

  // Per-step (bucket, sign) routing, recorded when enabled; together these
  // determine every counter's full update sequence.
  void enable_routing_log() { log_routing_ = true; }
  const std::vector<std::pair<int, int>>& routing_log() const {
    return routing_log_;
  }

  size_t state_words() const;

 private:
  PolyHash hash_;
  std::vector<ContinualCounter> counters_;
  double tau_;
  double counter_rho_;
  int64_t estimate_ = 1;
  bool log_routing_ = false;
  std::vector<std::pair<int, int>> routing_log_;
};

// Median of m independent subroutines, each at budget rho/m.
class MinHashEstimator {
 public:
  MinHashEstimator(const MinHashParams& params, uint64_t seed);

  int64_t step(const StreamUpdate& update);

  int64_t current() const { return estimate_; }
  int replica_count() const { return static_cast<int>(replicas_.size()); }
  double tau() const { return replicas_.front().tau(); }
  const std::vector<MinHashSubroutine>& replicas() const { return replicas_; }
  std::vector<MinHashSubroutine>& replicas() { return replicas_; }

  // Event-level composition: one change touches <= 2 counters per replica,
  // each at half the replica budget.
  double composed_budget() const;

  size_t state_words() const;

 private:
  MinHashParams params_;
  std::vector<MinHashSubroutine> replicas_;
  std::vector<int64_t> scratch_;
  int64_t estimate_ = 1;
};

// Concrete (alpha, beta) envelope implied by the per-replica bound
// D/(6 tau) <= Dhat <= 4 D + 1: profile (p,q,r,s) = (6 tau, 4, 0, 1).
ErrorBound minhash_error_bound(double rho, uint64_t capacity,
                               uint64_t universe, int replicas_per_log = 8,
                               double floor_gamma = 0.0);

// Lower median (index (k-1)/2 of the sorted values).
int64_t lower_median(std::vector<int64_t>& values);

}  // namespace dpcr
