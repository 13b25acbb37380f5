#include <doctest.h>

#include <cmath>
#include <vector>

#include "dpcr/metrics.hpp"
#include "dpcr/minhash.hpp"
#include "dpcr/rng.hpp"

using namespace dpcr;

namespace {

MinHashParams small_params(uint64_t universe, uint64_t capacity, double rho,
                           bool noise_off) {
  MinHashParams params;
  params.universe = universe;
  params.capacity = capacity;
  params.rho = rho;
  params.noise_off = noise_off;
  return params;
}

// From-scratch oracle for the subroutine: recompute the bucket sums from
// the defining formula and apply the activation rule.
int64_t bruteforce_estimate(const MinHashSubroutine& sub,
                            const std::vector<StreamUpdate>& prefix) {
  std::vector<int64_t> sums(sub.bucket_count(), 0);
  for (const auto& u : prefix) sums[sub.bucket_of(u.element)] += u.sign;
  int best = 0;
  for (int k = 0; k < sub.bucket_count(); ++k)
    if (static_cast<double>(sums[k]) > sub.tau()) best = k;
  return int64_t{1} << best;
}

}  // namespace

TEST_CASE("empty and cancelled prefixes estimate 1") {
  MinHashSubroutine sub(1 << 10, 64, 1.0, /*noise_off=*/true, 0.0, 42);
  for (int t = 0; t < 8; ++t) CHECK(sub.step({1, 0}) == 1);

  MinHashSubroutine cancel(1 << 10, 64, 1.0, true, 0.0, 43);
  cancel.step({5, 1});
  CHECK(cancel.step({5, -1}) == 1);  // D_t = 0 again
}

TEST_CASE("noise-off subroutine matches the from-scratch recomputation") {
  SeededRng rng(2024);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const uint64_t universe = 256, capacity = 512;
    // Large rho pulls tau below small frequencies, exercising activation.
    MinHashSubroutine sub(universe, capacity, 4000.0, true, 0.0, seed);
    std::vector<StreamUpdate> prefix;
    std::vector<int64_t> live(universe + 1, 0);
    for (uint64_t t = 0; t < capacity; ++t) {
      uint64_t element = 1 + rng.next_below(universe);
      int sign = static_cast<int>(rng.next_below(3)) - 1;
      if (sign < 0 && live[element] == 0) sign = 1;  // keep it strict
      live[element] += sign;
      prefix.push_back({element, sign});
      const int64_t got = sub.step(prefix.back());
      CHECK(got == bruteforce_estimate(sub, prefix));
      CHECK(got >= 1);
      CHECK((got & (got - 1)) == 0);  // power of two
      CHECK(got <= int64_t{1} << (sub.bucket_count() - 1));
    }
  }
}

TEST_CASE("single element above tau activates its own bucket") {
  const uint64_t universe = 256, capacity = 64;
  MinHashSubroutine sub(universe, capacity, 4000.0, true, 0.0, 7);
  REQUIRE(sub.tau() < 5.0);
  REQUIRE(sub.tau() > 0.0);
  const uint64_t element = 9;
  int64_t estimate = 0;
  for (int i = 0; i < 5; ++i) estimate = sub.step({element, 1});
  CHECK(estimate == int64_t{1} << sub.bucket_of(element));
}

TEST_CASE("median of one replica equals the subroutine") {
  MinHashParams params = small_params(1 << 8, 128, 2.0, true);
  params.replica_override = 1;
  MinHashEstimator estimator(params, 99);
  MinHashSubroutine standalone(1 << 8, 128, 2.0, true, 0.0,
                               derive_seed(99, 0));
  SeededRng rng(5);
  for (int t = 0; t < 128; ++t) {
    const StreamUpdate u{1 + rng.next_below(200), 1};
    CHECK(estimator.step(u) == standalone.step(u));
  }
}

TEST_CASE("replicas agreeing on an empty stream give median 1") {
  MinHashEstimator estimator(small_params(1 << 8, 32, 1.0, true), 4);
  for (int t = 0; t < 32; ++t) CHECK(estimator.step({1, 0}) == 1);
}

TEST_CASE("composed budget equals rho") {
  for (double rho : {0.3, 1.0, 7.5}) {
    MinHashEstimator estimator(small_params(1 << 12, 1 << 10, rho, false), 1);
    CHECK(std::abs(estimator.composed_budget() - rho) <= 1e-12 * rho);
  }
}

TEST_CASE("an event-level change alters at most two counters per replica") {
  const uint64_t universe = 1 << 8, capacity = 128;
  SeededRng rng(31);
  std::vector<StreamUpdate> base;
  for (uint64_t t = 0; t < capacity; ++t)
    base.push_back({1 + rng.next_below(universe), 1});
  std::vector<StreamUpdate> changed = base;
  changed[40] = {1 + rng.next_below(universe), -1};

  MinHashParams params = small_params(universe, capacity, 1.0, true);
  params.replica_override = 6;
  auto run = [&](const std::vector<StreamUpdate>& stream) {
    MinHashEstimator estimator(params, 17);
    for (auto& replica : estimator.replicas()) replica.enable_routing_log();
    for (const auto& u : stream) estimator.step(u);
    // Expand routing into per-counter update sequences.
    std::vector<std::vector<std::vector<int>>> sequences;
    for (const auto& replica : estimator.replicas()) {
      std::vector<std::vector<int>> per_counter(
          replica.bucket_count(), std::vector<int>(capacity, 0));
      const auto& log = replica.routing_log();
      for (size_t t = 0; t < log.size(); ++t)
        per_counter[log[t].first][t] = log[t].second;
      sequences.push_back(std::move(per_counter));
    }
    return sequences;
  };

  const auto before = run(base);
  const auto after = run(changed);
  REQUIRE(before.size() == after.size());
  for (size_t j = 0; j < before.size(); ++j) {
    int differing = 0;
    for (size_t k = 0; k < before[j].size(); ++k)
      differing += before[j][k] != after[j][k];
    CHECK(differing <= 2);
  }
}

TEST_CASE("error bound carries the lemma profile") {
  const uint64_t capacity = 1 << 10, universe = 1 << 10;
  const ErrorBound at_one = minhash_error_bound(1.0, capacity, universe);
  const ErrorBound at_four = minhash_error_bound(4.0, capacity, universe);
  CHECK(at_one.beta == 1.0);
  CHECK(at_four.beta == 1.0);
  // tau scales exactly as 1/sqrt(rho) at fixed T, n.
  CHECK(at_one.alpha / at_four.alpha == doctest::Approx(2.0).epsilon(1e-12));

  // alpha = 24 * tau of the subroutine the estimator actually builds.
  MinHashParams params = small_params(universe, capacity, 1.0, false);
  MinHashEstimator estimator(params, 3);
  CHECK(at_one.alpha == doctest::Approx(24.0 * estimator.tau()).epsilon(1e-12));
}

TEST_CASE("noise-on envelope holds on singleton streams (small scale)") {
  const uint64_t universe = 1 << 10, capacity = 1 << 10;
  const uint64_t distinct = 100;
  MinHashParams params = small_params(universe, capacity, 1.0, false);
  const ErrorProfile profile{6.0 * MinHashEstimator(params, 0).tau(), 4.0,
                             0.0, 1.0};
  std::vector<EstimatorTrace> traces;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    MinHashEstimator estimator(params, derive_seed(1000, seed));
    EstimatorTrace trace;
    uint64_t live = 0;
    for (uint64_t t = 1; t <= capacity; ++t) {
      StreamUpdate u{t <= distinct ? t : 1, t <= distinct ? 1 : 0};
      live += u.sign;
      trace.push_back({static_cast<double>(live),
                       static_cast<double>(estimator.step(u))});
    }
    traces.push_back(std::move(trace));
  }
  CHECK(success_rate(traces, profile) >= 0.9);
}

TEST_CASE("state words scale with (K+1) * m * log T") {
  MinHashParams params = small_params(1 << 10, 1 << 10, 1.0, false);
  MinHashEstimator estimator(params, 8);
  const size_t buckets = 11, height = 11;
  CHECK(estimator.state_words() <=
        3 * buckets * estimator.replica_count() * height);
}
