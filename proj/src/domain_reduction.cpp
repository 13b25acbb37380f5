#include "dpcr/domain_reduction.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "dpcr/errors.hpp"

namespace dpcr {

namespace {

int log2_ceil(uint64_t v) {
  return std::countr_zero(std::bit_ceil(std::max<uint64_t>(v, 2)));
}

uint64_t count_nonzero(const std::vector<int64_t>& x) {
  uint64_t nonzero = 0;
  for (int64_t v : x) nonzero += (v != 0);
  return nonzero;
}

struct DrLayout {
  int level_count;
  int replica_count;
  double structure_rho;
  double counter_rho;
};

DrLayout dr_layout(double rho, uint64_t capacity, int replicas_per_log,
                   int max_level, int replica_override) {
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  if (max_level < 1) throw std::invalid_argument("max_level must be >= 1");
  const int log_t = std::max(1, log2_ceil(capacity));
  DrLayout layout;
  layout.level_count = std::min(log_t, max_level);
  layout.replica_count = replica_override > 0
                             ? replica_override
                             : std::max(1, replicas_per_log * log_t);
  layout.structure_rho =
      rho / (static_cast<double>(layout.level_count) * layout.replica_count);
  layout.counter_rho = layout.structure_rho / 2;
  return layout;
}

double layout_tau(const DrLayout& layout, uint64_t capacity,
                  double floor_gamma) {
  const double gamma =
      floor_gamma > 0 ? floor_gamma : 1.0 / static_cast<double>(capacity);
  // Union bound over every counter in the estimator.
  const uint64_t total_counters =
      static_cast<uint64_t>(layout.replica_count) *
      ((uint64_t{2} << layout.level_count) - 2);
  return noise_floor(capacity, layout.counter_rho, total_counters, gamma).tau;
}

}  // namespace

double domain_reduction_tau(double rho, uint64_t capacity,
                            int replicas_per_log, int max_level,
                            double floor_gamma, int replica_override) {
  const DrLayout layout =
      dr_layout(rho, capacity, replicas_per_log, max_level, replica_override);
  return layout_tau(layout, capacity, floor_gamma);
}

DomainReductionEstimator::DomainReductionEstimator(
    const DomainReductionParams& params, uint64_t seed)
    : exhaustive_(params.exhaustive_scan), capacity_(params.capacity) {
  const DrLayout layout =
      dr_layout(params.rho, params.capacity, params.replicas_per_log,
                params.max_level, params.replica_override);
  const int level_count = layout.level_count;
  replica_count_ = layout.replica_count;
  candidate_quorum_ = replica_count_ - (replica_count_ - 1) / 2;
  structure_rho_ = layout.structure_rho;
  const double node_sigma =
      params.noise_off ? 0.0 : std::sqrt(2.0 * tree_height(params.capacity) /
                                         layout.counter_rho);

  const double floor_tau = layout_tau(layout, params.capacity,
                                      params.floor_gamma);
  if (params.tau_override != 0.0) {
    if (!(params.tau_override > 0))
      throw std::invalid_argument("tau override must be positive");
    tau_ = params.tau_override;
  } else {
    tau_ = floor_tau;
  }
  if (!(params.activation_factor > 0))
    throw std::invalid_argument("activation factor must be positive");
  threshold_ = params.activation_factor * tau_;
  // The candidate shortcut assumes untouched-replica releases stay under
  // the threshold; that only holds when the threshold clears the noise
  // floor.  A lower override (a testing regime) forces the full scan.
  if (!params.noise_off && threshold_ < floor_tau) exhaustive_ = true;

  const int independence = log2_ceil(params.capacity) + 1;
  levels_.resize(level_count);
  touch_counts_.resize(level_count);
  candidates_.resize(level_count);
  for (int li = 0; li < level_count; ++li) {
    const uint64_t domain = uint64_t{1} << (li + 1);
    const uint64_t level_seed = derive_seed(seed, li + 1);
    touch_counts_[li].assign(domain, 0);
    levels_[li].reserve(replica_count_);
    for (int j = 0; j < replica_count_; ++j) {
      const uint64_t structure_seed = derive_seed(level_seed, j);
      Structure s{PolyHash(independence, domain, derive_seed(structure_seed, 0)),
                  SignHash(independence, derive_seed(structure_seed, 1)),
                  {},
                  {}};
      s.counters.reserve(domain);
      for (uint64_t c = 0; c < domain; ++c)
        s.counters.emplace_back(params.capacity, node_sigma,
                                derive_seed(structure_seed, 2 + c));
      levels_[li].push_back(std::move(s));
    }
  }
  median_scratch_.resize(replica_count_);
}

int64_t DomainReductionEstimator::step(const StreamUpdate& update) {
  if (timestep_ == capacity_)
    throw std::runtime_error("estimator past its capacity");
  if (update.sign < -1 || update.sign > 1)
    throw InputError("sign outside {-1,0,+1}");
  ++timestep_;

  if (update.sign != 0) {
    for (size_t li = 0; li < levels_.size(); ++li) {
      for (auto& s : levels_[li]) {
        const uint64_t c = s.bucket_hash(update.element);
        const int value = s.sign_hash(update.element) * update.sign;
        LazyCounter& counter = s.counters[c];
        if (!counter.touched() &&
            ++touch_counts_[li][c] == candidate_quorum_)
          candidates_[li].push_back(static_cast<uint32_t>(c));
        counter.apply(value);
        if (log_events_)
          s.log.push_back({timestep_, static_cast<uint32_t>(c), value});
      }
    }
  }

  int star = 0;
  for (int li = static_cast<int>(levels_.size()) - 1; li >= 0; --li) {
    if (level_active(li)) {
      star = li + 1;
      break;
    }
  }
  estimate_ = int64_t{1} << star;
  return estimate_;
}

bool DomainReductionEstimator::level_active(int level_index) {
  auto& replicas = levels_[level_index];
  // The replica-median of |release| reaches the threshold iff at least
  // candidate_quorum_ replicas do; the scan stops as soon as the quorum is
  // reached or cannot be.  Coordinates below the touch quorum are skipped
  // outside exhaustive mode: their medians are dominated by untouched
  // replicas, whose pure-noise releases sit far below C'*tau (tail
  // probability below 2*(gamma/2TB)^(C'^2) per read).
  auto coordinate_active = [&](uint64_t c) {
    int hits = 0;
    for (int j = 0; j < replica_count_; ++j) {
      if (hits + (replica_count_ - j) < candidate_quorum_) return false;
      if (std::abs(replicas[j].counters[c].release_at(timestep_)) >=
          threshold_) {
        if (++hits >= candidate_quorum_) return true;
      }
    }
    return false;
  };
  if (exhaustive_) {
    const uint64_t domain = uint64_t{1} << (level_index + 1);
    for (uint64_t c = 0; c < domain; ++c)
      if (coordinate_active(c)) return true;
  } else {
    for (uint32_t c : candidates_[level_index])
      if (coordinate_active(c)) return true;
  }
  return false;
}

double DomainReductionEstimator::level_max_median(int level) {
  if (level < 1 || level > levels()) throw std::invalid_argument("bad level");
  auto& replicas = levels_[level - 1];
  const uint64_t domain = uint64_t{1} << level;
  double best = 0.0;
  for (uint64_t c = 0; c < domain; ++c) {
    for (int j = 0; j < replica_count_; ++j)
      median_scratch_[j] =
          std::abs(replicas[j].counters[c].release_at(timestep_));
    const size_t mid = (median_scratch_.size() - 1) / 2;
    std::nth_element(median_scratch_.begin(), median_scratch_.begin() + mid,
                     median_scratch_.end());
    best = std::max(best, median_scratch_[mid]);
  }
  return best;
}

const std::vector<DomainReductionEstimator::RoutedEvent>&
DomainReductionEstimator::event_log(int level, int replica) const {
  return levels_.at(level - 1).at(replica).log;
}

int64_t DomainReductionEstimator::counter_exact(int level, int replica,
                                                uint64_t coordinate) const {
  return levels_.at(level - 1).at(replica).counters.at(coordinate).exact();
}

double DomainReductionEstimator::counter_release(int level, int replica,
                                                 uint64_t coordinate) {
  return levels_.at(level - 1)
      .at(replica)
      .counters.at(coordinate)
      .release_at(timestep_);
}

uint64_t DomainReductionEstimator::bucket_of(int level, int replica,
                                             uint64_t element) const {
  return levels_.at(level - 1).at(replica).bucket_hash(element);
}

int DomainReductionEstimator::sign_of(int level, int replica,
                                      uint64_t element) const {
  return levels_.at(level - 1).at(replica).sign_hash(element);
}

size_t DomainReductionEstimator::state_words() const {
  size_t words = 0;
  for (const auto& level : levels_)
    for (const auto& s : level)
      words += s.bucket_hash.state_words() + s.sign_hash.state_words() +
               s.counters.size() * 10;
  for (const auto& counts : touch_counts_) words += counts.size() / 4;
  return words;
}

namespace {

struct LemmaInputs {
  uint64_t universe;
  uint64_t support;
  int independence;
};

LemmaInputs lemma_inputs(const std::vector<int64_t>& x) {
  if (x.empty()) throw std::invalid_argument("empty frequency vector");
  return LemmaInputs{x.size(), count_nonzero(x),
                     log2_ceil(x.size()) + 1};
}

}  // namespace

LemmaReport lemma1_validate(const std::vector<int64_t>& frequencies, uint64_t m,
                            double ell, uint64_t trials, uint64_t seed) {
  const LemmaInputs in = lemma_inputs(frequencies);
  if (!(ell >= 100.0 * std::log2(static_cast<double>(in.universe))))
    throw HypothesisError("lemma 1 needs ell >= 100*log2(n)");
  if (m < 1 || static_cast<double>(m) > static_cast<double>(in.support) / ell)
    throw HypothesisError("lemma 1 needs 1 <= m <= support/ell");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");

  const double cutoff = std::sqrt(ell) / 1000.0;
  uint64_t hits = 0;
  for (uint64_t trial = 0; trial < trials; ++trial) {
    const uint64_t trial_seed = derive_seed(seed, trial);
    PolyHash bucket(in.independence, m, derive_seed(trial_seed, 0));
    SignHash sign(in.independence, derive_seed(trial_seed, 1));
    int64_t sum = 0;
    for (size_t j = 0; j < frequencies.size(); ++j) {
      if (frequencies[j] == 0) continue;
      const uint64_t element = j + 1;
      if (bucket(element) == 0) sum += sign(element) * frequencies[j];
    }
    if (std::abs(static_cast<double>(sum)) >= cutoff) ++hits;
  }
  return LemmaReport{"lemma1", trials,
                     static_cast<double>(hits) / static_cast<double>(trials),
                     0.97,
                     {{"cutoff", cutoff}}};
}

LemmaReport lemma2_validate(const std::vector<int64_t>& frequencies, uint64_t m,
                            uint64_t trials, uint64_t seed) {
  const LemmaInputs in = lemma_inputs(frequencies);
  const double min_ell = 100.0 * std::log2(static_cast<double>(in.universe));
  if (static_cast<double>(m) < min_ell * static_cast<double>(in.support))
    throw HypothesisError("lemma 2 needs m >= ell*support with ell >= 100*log2(n)");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");

  uint64_t nonzero = 0;
  for (uint64_t trial = 0; trial < trials; ++trial) {
    const uint64_t trial_seed = derive_seed(seed, trial);
    PolyHash bucket(in.independence, m, derive_seed(trial_seed, 0));
    SignHash sign(in.independence, derive_seed(trial_seed, 1));
    int64_t sum = 0;
    for (size_t j = 0; j < frequencies.size(); ++j) {
      if (frequencies[j] == 0) continue;
      const uint64_t element = j + 1;
      if (bucket(element) == 0) sum += sign(element) * frequencies[j];
    }
    if (sum != 0) ++nonzero;
  }
  return LemmaReport{"lemma2", trials,
                     static_cast<double>(nonzero) / static_cast<double>(trials),
                     0.01,
                     {}};
}

LemmaReport lemma3_validate(const std::vector<int64_t>& frequencies, uint64_t m,
                            double ell, double ell_prime, uint64_t trials,
                            uint64_t seed) {
  const LemmaInputs in = lemma_inputs(frequencies);
  if (!(ell >= 1.0) || !(ell_prime >= 1.0))
    throw HypothesisError("lemma 3 needs ell, ell' >= 1");
  if (static_cast<double>(m) <
      static_cast<double>(in.support) * ell * ell_prime)
    throw HypothesisError("lemma 3 needs m >= support*ell*ell'");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");

  const double keep_floor =
      (1.0 - 1.0 / ell) * static_cast<double>(in.support);
  uint64_t both_sides = 0, upper_side = 0;
  std::unordered_map<uint64_t, int64_t> reduced;
  for (uint64_t trial = 0; trial < trials; ++trial) {
    PolyHash bucket(in.independence, m, derive_seed(seed, trial));
    reduced.clear();
    for (size_t j = 0; j < frequencies.size(); ++j) {
      if (frequencies[j] == 0) continue;
      reduced[bucket(j + 1)] += frequencies[j];
    }
    uint64_t kept = 0;
    for (const auto& [coord, value] : reduced) kept += (value != 0);
    if (kept <= in.support) ++upper_side;
    if (kept <= in.support && static_cast<double>(kept) >= keep_floor)
      ++both_sides;
  }
  return LemmaReport{
      "lemma3",
      trials,
      static_cast<double>(both_sides) / static_cast<double>(trials),
      1.0 - 1.0 / ell_prime,
      {{"upper_fraction",
        static_cast<double>(upper_side) / static_cast<double>(trials)}}};
}

ReductionCombinator::ReductionCombinator(
    const ReductionCombinatorParams& params, BaseFactory base,
    std::unique_ptr<ContinualEstimator> side, uint64_t seed)
    : params_(params), side_(std::move(side)) {
  if (!(params.eta > 0 && params.eta < 1))
    throw std::invalid_argument("eta must lie in (0, 1)");
  if (!base) throw std::invalid_argument("missing base factory");
  if (!side_) throw std::invalid_argument("missing side estimator");

  const int log_t = std::max(1, log2_ceil(params.capacity));
  maps_per_level_ = std::max(1, params.replicas_per_log * log_t);
  const int level_count = params.max_level;
  const double base_rho =
      (params.rho / 2) / (static_cast<double>(level_count) * maps_per_level_);
  const int independence = log2_ceil(params.capacity) + 1;

  if (params.calibrate) {
    // Drive a throwaway base on a tiny known stream and hold it to its
    // advertised additive error.
    constexpr uint64_t kProbeDomain = 64;
    auto probe = base(kProbeDomain, base_rho, derive_seed(seed, ~uint64_t{0}));
    const double allowed =
        std::pow(static_cast<double>(kProbeDomain), params.base_error_exponent);
    for (uint64_t t = 1; t <= 32; ++t) {
      const double got = probe->step({t, 1});
      if (std::abs(got - static_cast<double>(t)) > allowed + 1e-9)
        throw std::runtime_error(
            "base estimator violates its advertised additive error on the "
            "calibration run");
    }
  }

  levels_.resize(level_count);
  for (int li = 0; li < level_count; ++li) {
    const uint64_t domain = uint64_t{1} << (li + 1);
    const uint64_t level_seed = derive_seed(seed, li + 1);
    levels_[li].reserve(maps_per_level_);
    for (int j = 0; j < maps_per_level_; ++j) {
      const uint64_t copy_seed = derive_seed(level_seed, j);
      levels_[li].push_back(
          MappedCopy{PolyHash(independence, domain, derive_seed(copy_seed, 0)),
                     base(domain, base_rho, derive_seed(copy_seed, 1)), 0.0});
    }
  }
}

double ReductionCombinator::step(const StreamUpdate& update) {
  const double side_estimate = side_->step(update);
  for (auto& level : levels_) {
    for (auto& copy : level) {
      const uint64_t mapped = copy.map(update.element) + 1;
      copy.last = copy.base->step({mapped, update.sign});
    }
  }

  const uint64_t coarse = std::bit_ceil(
      static_cast<uint64_t>(std::max(1.0, std::ceil(side_estimate))));
  const double required = params_.level_factor * static_cast<double>(coarse) *
                          params_.side_alpha / params_.eta;
  int chosen = 1;
  while (chosen < static_cast<int>(levels_.size()) &&
         std::pow(2.0, chosen) < required)
    ++chosen;
  selected_domain_ = uint64_t{1} << chosen;

  std::vector<double> answers;
  answers.reserve(maps_per_level_);
  for (const auto& copy : levels_[chosen - 1]) answers.push_back(copy.last);
  const size_t mid = (answers.size() - 1) / 2;
  std::nth_element(answers.begin(), answers.begin() + mid, answers.end());
  estimate_ = answers[mid];
  return estimate_;
}

}  // namespace dpcr
