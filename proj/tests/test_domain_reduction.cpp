#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "dpcr/domain_reduction.hpp"
#include "dpcr/errors.hpp"
#include "dpcr/rng.hpp"

using namespace dpcr;

namespace {

DomainReductionParams small_params(uint64_t universe, uint64_t capacity,
                                   double rho, bool noise_off) {
  DomainReductionParams params;
  params.universe = universe;
  params.capacity = capacity;
  params.rho = rho;
  params.noise_off = noise_off;
  params.replica_override = 6;
  params.max_level = 5;
  return params;
}

std::vector<int64_t> ones(uint64_t universe, uint64_t support) {
  std::vector<int64_t> x(universe, 0);
  for (uint64_t j = 0; j < support; ++j) x[j] = 1;
  return x;
}

}  // namespace

TEST_CASE("empty support and noise off estimates 1") {
  DomainReductionParams params = small_params(64, 32, 1.0, true);
  params.tau_override = 0.5;
  DomainReductionEstimator estimator(params, 3);
  for (int t = 0; t < 32; ++t) CHECK(estimator.step({1, 0}) == 1);
}

TEST_CASE("noise-off counters equal the from-scratch reduced sums") {
  SeededRng rng(61);
  DomainReductionParams params = small_params(64, 256, 1.0, true);
  params.tau_override = 2.0;
  DomainReductionEstimator estimator(params, 44);
  std::vector<int64_t> frequencies(65, 0);
  for (uint64_t t = 0; t < 256; ++t) {
    uint64_t element = 1 + rng.next_below(64);
    const int sign = rng.next_u64() & 1 ? 1 : -1;  // general turnstile
    frequencies[element] += sign;
    estimator.step({element, sign});

    if (t % 37 != 0) continue;  // spot check a few timesteps in full
    for (int level = 1; level <= estimator.levels(); ++level) {
      for (int j = 0; j < estimator.replicas(); ++j) {
        std::map<uint64_t, int64_t> reduced;
        for (uint64_t e = 1; e <= 64; ++e) {
          if (frequencies[e] == 0) continue;
          reduced[estimator.bucket_of(level, j, e)] +=
              estimator.sign_of(level, j, e) * frequencies[e];
        }
        const uint64_t domain = uint64_t{1} << level;
        for (uint64_t c = 0; c < domain; ++c) {
          const int64_t expected = reduced.count(c) ? reduced[c] : 0;
          CHECK(estimator.counter_exact(level, j, c) == expected);
          CHECK(estimator.counter_release(level, j, c) ==
                static_cast<double>(expected));
        }
      }
    }
  }
}

namespace {

// From-scratch replay of the level-selection rule: rebuild every reduced
// vector from the frequency table, take coordinate-wise replica medians of
// absolute values and pick the largest level whose max reaches the
// threshold.
int64_t replay_selection(DomainReductionEstimator& estimator,
                         const std::vector<int64_t>& frequencies) {
  int star = 0;
  for (int level = 1; level <= estimator.levels(); ++level) {
    const uint64_t domain = uint64_t{1} << level;
    std::vector<std::vector<int64_t>> reduced(
        estimator.replicas(), std::vector<int64_t>(domain, 0));
    for (uint64_t e = 1; e < frequencies.size(); ++e) {
      if (frequencies[e] == 0) continue;
      for (int j = 0; j < estimator.replicas(); ++j)
        reduced[j][estimator.bucket_of(level, j, e)] +=
            estimator.sign_of(level, j, e) * frequencies[e];
    }
    bool active = false;
    for (uint64_t c = 0; c < domain && !active; ++c) {
      std::vector<double> values;
      for (int j = 0; j < estimator.replicas(); ++j)
        values.push_back(std::abs(static_cast<double>(reduced[j][c])));
      std::nth_element(values.begin(), values.begin() + (values.size() - 1) / 2,
                       values.end());
      active = values[(values.size() - 1) / 2] >=
               estimator.activation_threshold();
    }
    if (active) star = level;
  }
  return int64_t{1} << star;
}

}  // namespace

TEST_CASE("level selection matches a from-scratch replay, heavy element") {
  DomainReductionParams params = small_params(64, 64, 1.0, true);
  params.tau_override = 3.0;
  params.activation_factor = 1.0;  // threshold = 3
  std::vector<int64_t> frequencies(65, 0);
  bool saw_activation = false;
  for (uint64_t seed = 0; seed < 8; ++seed) {
    DomainReductionEstimator estimator(params, seed);
    std::fill(frequencies.begin(), frequencies.end(), 0);
    int64_t estimate = 0;
    for (int t = 0; t < 10; ++t) {
      frequencies[7] += 1;
      estimate = estimator.step({7, 1});
      CHECK(estimate == replay_selection(estimator, frequencies));
    }
    // One heavy element carries a lone distinct count, yet its frequency
    // mass can activate the low levels: the multiplicative slack.
    saw_activation |= estimate > 1;
    CHECK(estimate <= 16);  // never anywhere near 2^levels = 32
  }
  CHECK(saw_activation);

  DomainReductionEstimator low(params, 12);
  int64_t estimate = 0;
  for (int t = 0; t < 2; ++t) estimate = low.step({7, 1});
  CHECK(estimate == 1);  // frequency 2 < threshold everywhere
}

TEST_CASE("level selection matches a from-scratch replay, random streams") {
  for (uint64_t seed = 20; seed < 24; ++seed) {
    DomainReductionParams params = small_params(64, 96, 1.0, true);
    params.tau_override = 2.0;
    params.activation_factor = 1.0;
    DomainReductionEstimator estimator(params, seed);
    std::vector<int64_t> frequencies(65, 0);
    SeededRng rng(seed);
    for (uint64_t t = 0; t < 96; ++t) {
      const uint64_t element = 1 + rng.next_below(64);
      const int sign = rng.next_u64() & 1 ? 1 : -1;
      frequencies[element] += sign;
      CHECK(estimator.step({element, sign}) ==
            replay_selection(estimator, frequencies));
    }
  }
}

TEST_CASE("candidate scan matches the exhaustive scan") {
  // Noise off with a low threshold: activation decisions stay in play and
  // the two scans must agree exactly.
  for (uint64_t seed = 0; seed < 6; ++seed) {
    DomainReductionParams params = small_params(64, 128, 1.0, true);
    DomainReductionParams full = params;
    full.exhaustive_scan = true;
    params.tau_override = full.tau_override = 4.0;
    params.activation_factor = full.activation_factor = 1.0;
    DomainReductionEstimator fast(params, seed);
    DomainReductionEstimator slow(full, seed);
    SeededRng rng(seed);
    for (uint64_t t = 0; t < 128; ++t) {
      const StreamUpdate u{1 + rng.next_below(64),
                           static_cast<int>(rng.next_below(3)) - 1};
      CHECK(fast.step(u) == slow.step(u));
    }
  }
  // Noise on at the computed floor.
  for (uint64_t seed = 0; seed < 3; ++seed) {
    DomainReductionParams params = small_params(64, 128, 1.0, false);
    DomainReductionParams full = params;
    full.exhaustive_scan = true;
    DomainReductionEstimator fast(params, seed);
    DomainReductionEstimator slow(full, seed);
    SeededRng rng(seed);
    for (uint64_t t = 0; t < 128; ++t) {
      const StreamUpdate u{1 + rng.next_below(64), 1};
      CHECK(fast.step(u) == slow.step(u));
    }
  }
}

TEST_CASE("output is a power of two and monotone in the activation factor") {
  DomainReductionParams loose = small_params(64, 128, 1.0, false);
  loose.tau_override = 2.0;
  loose.activation_factor = 1.0;
  DomainReductionParams tight = loose;
  tight.activation_factor = 3.0;
  DomainReductionEstimator low(loose, 5), high(tight, 5);
  SeededRng rng(15);
  for (uint64_t t = 0; t < 128; ++t) {
    const StreamUpdate u{1 + rng.next_below(64), 1};
    const int64_t a = low.step(u), b = high.step(u);
    CHECK((a & (a - 1)) == 0);
    CHECK(b <= a);  // raising C' never raises the level
  }
}

TEST_CASE("composed budget equals rho") {
  for (double rho : {0.5, 1.0, 4.0}) {
    DomainReductionEstimator estimator(small_params(64, 256, rho, false), 2);
    CHECK(std::abs(estimator.composed_budget() - rho) <= 1e-12 * rho);
  }
}

TEST_CASE("an event-level change touches at most two counters per structure") {
  SeededRng rng(73);
  const uint64_t universe = 64, capacity = 96;
  std::vector<StreamUpdate> base;
  for (uint64_t t = 0; t < capacity; ++t)
    base.push_back({1 + rng.next_below(universe),
                    rng.next_u64() & 1 ? 1 : -1});
  auto changed = base;
  changed[50] = {1 + rng.next_below(universe), 1};

  auto collect = [&](const std::vector<StreamUpdate>& stream) {
    DomainReductionParams params = small_params(universe, capacity, 1.0, true);
    DomainReductionEstimator estimator(params, 31);
    estimator.enable_event_log();
    for (const auto& u : stream) estimator.step(u);
    std::vector<std::vector<DomainReductionEstimator::RoutedEvent>> logs;
    for (int level = 1; level <= estimator.levels(); ++level)
      for (int j = 0; j < estimator.replicas(); ++j)
        logs.push_back(estimator.event_log(level, j));
    return logs;
  };

  const auto before = collect(base);
  const auto after = collect(changed);
  REQUIRE(before.size() == after.size());
  for (size_t s = 0; s < before.size(); ++s) {
    // Split each structure's log into per-coordinate event sequences.
    auto by_coordinate =
        [](const std::vector<DomainReductionEstimator::RoutedEvent>& log) {
          std::map<uint32_t,
                   std::vector<std::pair<uint64_t, int>>>
              split;
          for (const auto& event : log)
            split[event.coordinate].push_back({event.t, event.value});
          return split;
        };
    auto lhs = by_coordinate(before[s]);
    auto rhs = by_coordinate(after[s]);
    int touched = 0;
    for (const auto& [coordinate, events] : lhs) {
      auto it = rhs.find(coordinate);
      if (it == rhs.end() || it->second != events) ++touched;
    }
    for (const auto& [coordinate, events] : rhs)
      if (!lhs.count(coordinate)) ++touched;
    CHECK(touched <= 2);
  }
}

TEST_CASE("lemma 1: anti-concentration of a reduced coordinate") {
  const uint64_t universe = 1 << 14;
  const double ell = 100.0 * 14;
  const uint64_t support = 10000;
  const uint64_t m = static_cast<uint64_t>(support / ell);  // 7
  REQUIRE(m >= 1);

  const auto plain = lemma1_validate(ones(universe, support), m, ell, 300, 5);
  CHECK(plain.empirical >= 0.9);
  CHECK(plain.bound == 0.97);

  // Mixed magnitudes: half the support at 1000.
  std::vector<int64_t> mixed = ones(universe, support);
  for (uint64_t j = 0; j < support; j += 2) mixed[j] = 1000;
  CHECK(lemma1_validate(mixed, m, ell, 300, 6).empirical >= 0.9);

  CHECK_THROWS_AS(lemma1_validate(ones(universe, support), m, 10.0, 10, 1),
                  HypothesisError);
  CHECK_THROWS_AS(
      lemma1_validate(ones(universe, support), support, ell, 10, 1),
      HypothesisError);
  // A single nonzero admits no valid (m, ell) at all.
  CHECK_THROWS_AS(lemma1_validate(ones(universe, 1), 1, ell, 10, 1),
                  HypothesisError);
}

TEST_CASE("single nonzero reduces to the same magnitude (no cancellation)") {
  std::vector<int64_t> x(256, 0);
  x[17] = -3;
  // Directly the mapped coordinate: |f(x)_i| = |x_j| whenever x has one
  // nonzero entry, for any hash draw.
  for (uint64_t seed = 0; seed < 32; ++seed) {
    PolyHash bucket(9, 16, derive_seed(seed, 0));
    SignHash sign(9, derive_seed(seed, 1));
    const uint64_t image = bucket(18);
    const int64_t value = sign(18) * x[17];
    CHECK(std::abs(value) == 3);
    CHECK(image < 16);
  }
}

TEST_CASE("lemma 2: a fixed coordinate is almost always empty") {
  const uint64_t universe = 1 << 14;
  const uint64_t support = 100;
  const uint64_t m = 100 * 14 * support;  // ell = 100 log2 n
  const auto report = lemma2_validate(ones(universe, support), m, 500, 9);
  CHECK(report.empirical <= 0.02);
  CHECK(report.bound == 0.01);

  const auto empty = lemma2_validate(std::vector<int64_t>(universe, 0), 1,
                                     100, 2);
  CHECK(empty.empirical == 0.0);

  const auto singleton =
      lemma2_validate(ones(universe, 1), 1'000'000, 1000, 3);
  CHECK(singleton.empirical <= 0.001);

  CHECK_THROWS_AS(lemma2_validate(ones(universe, 100), 100, 10, 1),
                  HypothesisError);
}

TEST_CASE("lemma 3: support survives a generous reduction") {
  const uint64_t universe = 1 << 14;

  std::vector<int64_t> single(universe, 0);
  single[7] = 4;
  const auto one = lemma3_validate(single, 64, 2.0, 2.0, 200, 4);
  CHECK(one.empirical == 1.0);  // a lone element cannot collide

  const auto report =
      lemma3_validate(ones(universe, 1000), 100'000, 10.0, 10.0, 300, 8);
  CHECK(report.empirical >= 0.9);
  CHECK(report.bound == doctest::Approx(0.9));
  CHECK(report.extra.at("upper_fraction") == 1.0);

  CHECK_THROWS_AS(lemma3_validate(ones(universe, 1000), 999, 10.0, 10.0, 10, 1),
                  HypothesisError);
}

namespace {

// Exact distinct count of the reduced stream plus bounded synthetic noise of
// magnitude domain^exponent: the combinator's hypothetical base.
class MockBase : public ContinualEstimator {
 public:
  MockBase(uint64_t domain, double exponent, uint64_t seed)
      : frequencies_(domain + 1, 0),
        amplitude_(std::pow(static_cast<double>(domain), exponent)),
        seed_(seed) {}

  double step(const StreamUpdate& update) override {
    auto& f = frequencies_.at(update.element);
    const int before = f;
    f = static_cast<int8_t>(f + update.sign);
    distinct_ += (f != 0) - (before != 0);
    ++timestep_;
    return static_cast<double>(distinct_) +
           amplitude_ * (2.0 * unit_at(seed_, timestep_) - 1.0);
  }

 private:
  std::vector<int8_t> frequencies_;  // test streams stay tiny per element
  int64_t distinct_ = 0;
  uint64_t timestep_ = 0;
  double amplitude_;
  uint64_t seed_;
};

class ExactSide : public ContinualEstimator {
 public:
  double step(const StreamUpdate& update) override {
    auto& f = frequencies_[update.element];
    const int64_t before = f;
    f += update.sign;
    distinct_ += (f != 0) - (before != 0);
    return static_cast<double>(distinct_);
  }

 private:
  std::map<uint64_t, int64_t> frequencies_;
  int64_t distinct_ = 0;
};

class ScriptedSide : public ContinualEstimator {
 public:
  explicit ScriptedSide(std::vector<double> outputs)
      : outputs_(std::move(outputs)) {}
  double step(const StreamUpdate&) override { return outputs_.at(index_++); }

 private:
  std::vector<double> outputs_;
  size_t index_ = 0;
};

ReductionCombinatorParams combinator_params(uint64_t capacity) {
  ReductionCombinatorParams params;
  params.universe = 1 << 16;
  params.capacity = capacity;
  params.rho = 1.0;
  params.eta = 0.5;
  params.base_error_exponent = 0.5;
  params.level_factor = 25.0;
  params.max_level = 16;
  params.replicas_per_log = 8;
  return params;
}

BaseFactory mock_factory(double exponent) {
  return [exponent](uint64_t domain, double /*rho*/, uint64_t seed) {
    return std::make_unique<MockBase>(domain, exponent, seed);
  };
}

}  // namespace

TEST_CASE("combinator reaches (1+eta) multiplicative error over a mock base") {
  // With base noise at domain^(1/2) and the selected domain around
  // 25 * 2 * bitceil(D) / eta, the median over J copies concentrates to
  // about sqrt(domain)/sqrt(J); the (1+eta) band clears it once the count
  // passes about half the capacity here.
  const uint64_t capacity = 1024;
  const uint64_t envelope_from = 513;
  int passing = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    ReductionCombinatorParams params = combinator_params(capacity);
    ReductionCombinator combinator(params, mock_factory(0.5),
                                   std::make_unique<ExactSide>(),
                                   derive_seed(404, seed));
    bool ok = true;
    uint64_t next_element = 1;
    uint64_t distinct = 0;
    for (uint64_t t = 1; t <= capacity; ++t) {
      // Insert fresh singletons so the exact count is t.
      const StreamUpdate u{next_element++, 1};
      ++distinct;
      const double got = combinator.step(u);
      if (distinct >= envelope_from) {
        const double lo = static_cast<double>(distinct) / (1 + params.eta);
        const double hi = static_cast<double>(distinct) * (1 + params.eta);
        ok &= got >= lo && got <= hi;
      }
    }
    passing += ok;
  }
  CHECK(passing >= 18);
}

TEST_CASE("combinator on an empty stream stays in the additive regime") {
  ReductionCombinatorParams params = combinator_params(64);
  ReductionCombinator combinator(params, mock_factory(0.5),
                                 std::make_unique<ExactSide>(), 7);
  for (int t = 0; t < 64; ++t) {
    const double got = combinator.step({1, 0});
    const double amplitude =
        std::pow(static_cast<double>(combinator.last_selected_domain()), 0.5);
    CHECK(std::abs(got) <= amplitude + 1e-9);
  }
}

TEST_CASE("level selection is monotone in the side estimate") {
  std::vector<double> script;
  for (int t = 0; t < 32; ++t) script.push_back(std::pow(1.3, t));
  ReductionCombinatorParams params = combinator_params(32);
  ReductionCombinator combinator(params, mock_factory(0.5),
                                 std::make_unique<ScriptedSide>(script), 2);
  uint64_t previous = 0;
  for (int t = 0; t < 32; ++t) {
    combinator.step({1, 0});
    CHECK(combinator.last_selected_domain() >= previous);
    previous = combinator.last_selected_domain();
  }
}

TEST_CASE("combinator rejects a base that breaks its advertised error") {
  ReductionCombinatorParams params = combinator_params(64);
  auto broken = [](uint64_t, double, uint64_t) {
    class Wild : public ContinualEstimator {
     public:
      double step(const StreamUpdate&) override { return 1e9; }
    };
    return std::make_unique<Wild>();
  };
  CHECK_THROWS_WITH_AS(
      ReductionCombinator(params, broken, std::make_unique<ExactSide>(), 1),
      doctest::Contains("calibration"), std::runtime_error);
}
