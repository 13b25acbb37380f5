#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <vector>

#include "dpcr/privacy.hpp"

namespace dpcr {

// Tree height over a capacity rounded up to the next power of two:
// H = ceil(log2 T) + 1.
inline int tree_height(uint64_t capacity) {
  const uint64_t pow2 = std::bit_ceil(capacity);
  return std::countr_zero(pow2) + 1;
}

// High-probability uniform bound on a tree counter's additive error.  The
// per-release noise is a sum of at most H independent N(0, 2H/rho) node
// terms, so its std is at most H*sqrt(2/rho); a Gaussian tail union bound
// over T releases and B counter streams at failure gamma gives
//   tau = H * sqrt(2/rho) * sqrt(2 * ln(2*T*B/gamma)).
struct NoiseFloor {
  double tau = 0.0;
  double gamma = 0.0;
};

NoiseFloor noise_floor(uint64_t capacity, double rho, uint64_t streams,
                       double gamma);

// Gaussian binary tree mechanism: ingests updates in {-1,0,+1} and releases
// a noisy prefix sum after each one, keeping O(log T) words of state.
//
// The dyadic node closing at time t covers (t - 2^lsb(t), t]; its noise is
// N(0, 2H/rho), drawn once at close time (sample keyed by t) and frozen.
// The release at time t sums the exact prefix and the frozen noises of the
// <= H closed nodes covering [1, t].  One update change touches at most H
// node sums, each by at most 2, so squared L2 sensitivity is <= 4H and the
// Gaussian mechanism gives rho-zCDP.
//
// The cover noise is kept as per-level partial sums folded from the highest
// covering node down; LazyCounter rebuilds the same fold, so the two are
// bit-identical for a given seed.
class ContinualCounter {
 public:
  // rho = +infinity disables noise (oracle-equivalence mode).
  ContinualCounter(uint64_t capacity, PrivacyBudget budget, NoiseSource noise);

  // Ingests b and returns the new release; throws past capacity or on
  // |b| > 1.
  double update(int b) {
    if (timestep_ == capacity_) throw_capacity();
    if (b < -1 || b > 1) throw_domain();
    ++timestep_;
    prefix_ += b;

    // Close the node at level lsb(t); lower levels fold into it.  The
    // cover of [1, t] is this node plus the nodes at the higher set bits
    // of t, whose noise fold is already cached at the next set bit up.
    const int level = std::countr_zero(timestep_);
    const uint64_t upper = timestep_ & (timestep_ - 1);
    const double above =
        upper == 0 ? 0.0 : level_partial_[std::countr_zero(upper)];
    const double drawn = node_sigma_ > 0.0
                             ? noise_.gaussian_at(timestep_, node_sigma_)
                             : 0.0;
    level_partial_[level] = above + drawn;

    if (observer_) observer_(level, timestep_, prefix_ - level_start_[level]);
    for (int j = 0; j <= level; ++j) level_start_[j] = prefix_;

    released_ = static_cast<double>(prefix_) + level_partial_[level];
    return released_;
  }

  // Last released value; re-reads within a timestep return the same value.
  double current() const { return released_; }

  int64_t exact() const { return prefix_; }
  uint64_t updates_seen() const { return timestep_; }
  uint64_t capacity() const { return capacity_; }
  int height() const { return height_; }
  double node_sigma() const { return node_sigma_; }
  PrivacyBudget budget() const { return budget_; }

  // Core state: per-level frozen noise + per-level block-start prefix.
  size_t state_words() const { return 2 * static_cast<size_t>(height_) + 6; }

  // Fires (level, end_time, exact node sum) as each dyadic node closes.
  // Test instrumentation; not counted as counter state.
  using NodeObserver = std::function<void(int, uint64_t, int64_t)>;
  void set_node_observer(NodeObserver observer) {
    observer_ = std::move(observer);
  }

 private:
  [[noreturn]] void throw_capacity() const;
  [[noreturn]] void throw_domain() const;

  uint64_t capacity_;
  int height_;
  double node_sigma_;
  PrivacyBudget budget_;
  NoiseSource noise_;
  uint64_t timestep_ = 0;
  int64_t prefix_ = 0;
  double released_ = 0.0;
  std::vector<double> level_partial_;  // cover noise from this level up
  std::vector<int64_t> level_start_;   // prefix at the open block's start
  NodeObserver observer_;
};

// Release-identical counter for sparse update patterns: zero updates are
// implicit and queries may jump forward in time.  Node noise is keyed by
// node close time exactly as in ContinualCounter, so for the same seed the
// two produce bit-equal releases (covered by tests).  The per-level noise
// cache is allocated on first noisy query; estimators hold many of these
// and most are rarely read.
class LazyCounter {
 public:
  LazyCounter() = default;
  LazyCounter(uint64_t capacity, double node_sigma, uint64_t noise_seed);

  // Applies a nonzero update at the current query frontier.  Events must be
  // interleaved with queries in time order: all events for times <= t are
  // applied before release_at(t).
  void apply(int delta) {
    prefix_ += delta;
    touched_ = true;
  }

  // Noisy release at time t; t must be non-decreasing across calls.
  double release_at(uint64_t t) {
    if (t < cached_t_) throw_backwards();
    if (node_sigma_ == 0.0) {
      cached_t_ = t;
      return static_cast<double>(prefix_);
    }
    if (t == 0) return static_cast<double>(prefix_);
    if (t != cached_t_) advance(t);
    return static_cast<double>(prefix_) +
           level_partial_[std::countr_zero(t)];
  }

  bool touched() const { return touched_; }
  int64_t exact() const { return prefix_; }

 private:
  double node_noise(uint64_t end_time) const {
    return node_sigma_ *
           NoiseSource::standard_normal_at(noise_seed_, end_time);
  }

  void advance(uint64_t t);
  [[noreturn]] void throw_backwards() const;

  uint64_t noise_seed_ = 0;
  double node_sigma_ = 0.0;
  int64_t prefix_ = 0;
  uint64_t cached_t_ = 0;
  uint8_t height_ = 1;
  bool touched_ = false;
  std::vector<double> level_partial_;
};

}  // namespace dpcr
