#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dpcr/counter.hpp"
#include "dpcr/hashing.hpp"
#include "dpcr/stream.hpp"

namespace dpcr {

struct DomainReductionParams {
  uint64_t universe = 2;
  uint64_t capacity = 1;          // T
  double rho = 1.0;
  bool noise_off = false;
  int replicas_per_log = 8;       // J = this * ceil(log2 T)
  double activation_factor = 3.0; // C'
  int max_level = 20;             // levels instantiated up to min(L, this)
  double floor_gamma = 0.0;       // 0 selects the default 1/T
  double tau_override = 0.0;      // > 0 replaces the computed floor (tests)
  bool exhaustive_scan = false;   // scan every coordinate, not just candidates
  int replica_override = 0;       // > 0 forces J
};

// General-turnstile distinct-elements estimator.  For each level i and
// replica j, the universe is hashed into [2^i] with signs; each reduced
// coordinate is tracked by a tree counter at half the per-structure budget
// (an event-level change touches at most two coordinates of a structure).
// A level is active at time t when some coordinate's replica-median
// absolute estimate reaches C' * tau; the estimate is 2^(largest active
// level), or 1 when none is active.
class DomainReductionEstimator {
 public:
  DomainReductionEstimator(const DomainReductionParams& params, uint64_t seed);

  int64_t step(const StreamUpdate& update);

  int64_t current() const { return estimate_; }
  double tau() const { return tau_; }
  double activation_threshold() const { return threshold_; }
  int levels() const { return static_cast<int>(levels_.size()); }
  int replicas() const { return replica_count_; }
  double structure_rho() const { return structure_rho_; }
  double composed_budget() const {
    return structure_rho_ * levels() * replicas();
  }
  uint64_t timestep() const { return timestep_; }

  size_t state_words() const;

  struct RoutedEvent {
    uint64_t t;
    uint32_t coordinate;
    int value;

    bool operator==(const RoutedEvent&) const = default;
  };

  void enable_event_log() { log_events_ = true; }
  const std::vector<RoutedEvent>& event_log(int level, int replica) const;

  // Test access into one structure; release advances the counter's cache.
  int64_t counter_exact(int level, int replica, uint64_t coordinate) const;
  double counter_release(int level, int replica, uint64_t coordinate);
  uint64_t bucket_of(int level, int replica, uint64_t element) const;
  int sign_of(int level, int replica, uint64_t element) const;
  // Max over coordinates of the replica-median |release| (exhaustive).
  double level_max_median(int level);

 private:
  struct Structure {
    PolyHash bucket_hash;
    SignHash sign_hash;
    std::vector<LazyCounter> counters;
    std::vector<RoutedEvent> log;
  };

  bool level_active(int level_index);

  std::vector<std::vector<Structure>> levels_;  // [level-1][replica]
  std::vector<std::vector<uint16_t>> touch_counts_;
  std::vector<std::vector<uint32_t>> candidates_;
  int replica_count_;
  int candidate_quorum_;  // replicas needed before a coordinate can qualify
  double structure_rho_;
  double tau_;
  double threshold_;
  bool exhaustive_;
  bool log_events_ = false;
  uint64_t capacity_;
  uint64_t timestep_ = 0;
  int64_t estimate_ = 1;
  std::vector<double> median_scratch_;
};

// Noise floor the estimator would use at this configuration, without
// building it.
double domain_reduction_tau(double rho, uint64_t capacity,
                            int replicas_per_log = 8, int max_level = 20,
                            double floor_gamma = 0.0, int replica_override = 0);

// Statistical validators for the domain-reduction lemmas.  Each draws fresh
// hash functions per trial over a fixed frequency vector and reports the
// empirical frequency of the lemma's event next to the stated bound.
struct LemmaReport {
  std::string lemma;
  uint64_t trials = 0;
  double empirical = 0.0;
  double bound = 0.0;
  std::map<std::string, double> extra;
};

// Anti-concentration: with m <= ||x||_0 / ell and ell >= 100 log2(n), a
// fixed signed-sum coordinate has |value| >= sqrt(ell)/1000 w.p. >= 0.97.
LemmaReport lemma1_validate(const std::vector<int64_t>& frequencies, uint64_t m,
                            double ell, uint64_t trials, uint64_t seed);

// Emptiness: with m >= ell * ||x||_0, a fixed coordinate is nonzero w.p.
// <= 0.01.
LemmaReport lemma2_validate(const std::vector<int64_t>& frequencies, uint64_t m,
                            uint64_t trials, uint64_t seed);

// Support preservation: with m >= ||x||_0 * ell * ell', the unsigned
// reduction keeps ||f_h(x)||_0 within [(1 - 1/ell) ||x||_0, ||x||_0] w.p.
// >= 1 - 1/ell'.
LemmaReport lemma3_validate(const std::vector<int64_t>& frequencies, uint64_t m,
                            double ell, double ell_prime, uint64_t trials,
                            uint64_t seed);

// Pluggable continual estimator interface for the reduction combinator.
class ContinualEstimator {
 public:
  virtual ~ContinualEstimator() = default;
  virtual double step(const StreamUpdate& update) = 0;
};

using BaseFactory = std::function<std::unique_ptr<ContinualEstimator>(
    uint64_t domain, double rho, uint64_t seed)>;

struct ReductionCombinatorParams {
  uint64_t universe = 2;
  uint64_t capacity = 1;          // T
  double rho = 1.0;
  double eta = 0.5;               // target multiplicative slack
  double base_error_exponent = 0.5;  // c1: base's advertised error domain^c1
  double side_alpha = 1.0;        // side estimator's multiplicative error
  int replicas_per_log = 8;       // maps per dyadic level
  double level_factor = 100.0;    // c in m' >= c * m_t * side_alpha / eta
  int max_level = 24;
  bool calibrate = true;          // check the base's advertised error up front
};

// Runs mapped copies of a purely-additive-error base estimator on every
// dyadic reduced domain, picks the level indicated by a coarse side
// estimate and returns the median of that level's copies.
class ReductionCombinator {
 public:
  ReductionCombinator(const ReductionCombinatorParams& params,
                      BaseFactory base, std::unique_ptr<ContinualEstimator> side,
                      uint64_t seed);

  double step(const StreamUpdate& update);

  double current() const { return estimate_; }
  uint64_t last_selected_domain() const { return selected_domain_; }
  int levels() const { return static_cast<int>(levels_.size()); }
  int maps_per_level() const { return maps_per_level_; }

 private:
  struct MappedCopy {
    PolyHash map;
    std::unique_ptr<ContinualEstimator> base;
    double last = 0.0;
  };

  ReductionCombinatorParams params_;
  std::vector<std::vector<MappedCopy>> levels_;
  std::unique_ptr<ContinualEstimator> side_;
  int maps_per_level_;
  double estimate_ = 0.0;
  uint64_t selected_domain_ = 2;
};

}  // namespace dpcr
