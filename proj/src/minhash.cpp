#include "dpcr/minhash.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "dpcr/errors.hpp"

namespace dpcr {

namespace {

int universe_log2(uint64_t universe) {
  if (universe < 2) throw std::invalid_argument("universe must be >= 2");
  return std::countr_zero(std::bit_ceil(universe));
}

int default_replicas(uint64_t capacity, int replicas_per_log) {
  const int log_t = std::max(1, tree_height(capacity) - 1);  // ceil(log2 T)
  return std::max(1, replicas_per_log * log_t);
}

}  // namespace

int64_t lower_median(std::vector<int64_t>& values) {
  if (values.empty()) throw std::invalid_argument("median of nothing");
  const size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

MinHashSubroutine::MinHashSubroutine(uint64_t universe, uint64_t capacity,
                                     double rho, bool noise_off,
                                     double floor_gamma, uint64_t seed)
    : hash_(2, std::bit_ceil(std::max<uint64_t>(universe, 2)),
            derive_seed(seed, 0)) {
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  const int log_n = universe_log2(std::max<uint64_t>(universe, 2));
  const int buckets = log_n + 1;  // lsb values 0..K
  counter_rho_ = rho / 2;         // a neighboring change touches <= 2 buckets
  const double gamma =
      floor_gamma > 0 ? floor_gamma : 1.0 / static_cast<double>(capacity);
  tau_ = noise_floor(capacity, counter_rho_, buckets, gamma).tau;
  const PrivacyBudget counter_budget =
      noise_off ? PrivacyBudget::off() : PrivacyBudget{counter_rho_};
  NoiseSource noise(derive_seed(seed, 1));
  counters_.reserve(buckets);
  for (int k = 0; k < buckets; ++k)
    counters_.emplace_back(capacity, counter_budget, noise.derive(k));
}

int64_t MinHashSubroutine::step(const StreamUpdate& update) {
  if (update.sign < -1 || update.sign > 1)
    throw InputError("sign outside {-1,0,+1}");
  const int bucket = bucket_of(update.element);
  if (log_routing_) routing_log_.emplace_back(bucket, update.sign);

  // Every counter advances every timestep; untouched ones ingest zero.
  int best = 0;
  for (int k = 0; k < bucket_count(); ++k) {
    const double released = counters_[k].update(k == bucket ? update.sign : 0);
    if (released > tau_) best = k;
  }
  estimate_ = int64_t{1} << best;
  return estimate_;
}

size_t MinHashSubroutine::state_words() const {
  size_t words = hash_.state_words();
  for (const auto& counter : counters_) words += counter.state_words();
  return words;
}

MinHashEstimator::MinHashEstimator(const MinHashParams& params, uint64_t seed)
    : params_(params) {
  if (!(params.rho > 0)) throw std::invalid_argument("rho must be positive");
  const int replicas = params.replica_override > 0
                           ? params.replica_override
                           : default_replicas(params.capacity,
                                              params.replicas_per_log);
  const double replica_rho = params.rho / replicas;
  replicas_.reserve(replicas);
  for (int j = 0; j < replicas; ++j)
    replicas_.emplace_back(params.universe, params.capacity, replica_rho,
                           params.noise_off, params.floor_gamma,
                           derive_seed(seed, j));
  scratch_.resize(replicas);
}

int64_t MinHashEstimator::step(const StreamUpdate& update) {
  for (size_t j = 0; j < replicas_.size(); ++j)
    scratch_[j] = replicas_[j].step(update);
  estimate_ = lower_median(scratch_);
  return estimate_;
}

double MinHashEstimator::composed_budget() const {
  double total = 0.0;
  for (const auto& replica : replicas_) total += 2.0 * replica.counter_rho();
  return total;
}

size_t MinHashEstimator::state_words() const {
  size_t words = 0;
  for (const auto& replica : replicas_) words += replica.state_words();
  return words;
}

ErrorBound minhash_error_bound(double rho, uint64_t capacity,
                               uint64_t universe, int replicas_per_log,
                               double floor_gamma) {
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  const int replicas = default_replicas(capacity, replicas_per_log);
  const double replica_rho = rho / replicas;
  const int buckets = universe_log2(std::max<uint64_t>(universe, 2)) + 1;
  const double gamma =
      floor_gamma > 0 ? floor_gamma : 1.0 / static_cast<double>(capacity);
  const double tau =
      noise_floor(capacity, replica_rho / 2, buckets, gamma).tau;
  return ErrorBound{24.0 * tau, 1.0};
}

}  // namespace dpcr
