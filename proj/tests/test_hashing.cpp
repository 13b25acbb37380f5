#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "dpcr/hashing.hpp"
#include "dpcr/rng.hpp"

using namespace dpcr;

TEST_CASE("constant polynomial maps every key to c mod m") {
  const PolyHash h = PolyHash::with_coefficients({1234567}, 1000);
  for (uint64_t key : {0ull, 1ull, 17ull, 999999999ull})
    CHECK(h(key) == 1234567 % 1000);
}

TEST_CASE("hash evaluation is deterministic per seed") {
  const PolyHash a(2, 1 << 20, 42), b(2, 1 << 20, 42), c(2, 1 << 20, 43);
  bool any_differ = false;
  for (uint64_t key = 0; key < 64; ++key) {
    CHECK(a(key) == b(key));
    any_differ |= a(key) != c(key);
  }
  CHECK(any_differ);
}

TEST_CASE("range validation") {
  CHECK_THROWS(PolyHash(2, 0, 1));
  CHECK_THROWS(PolyHash(0, 10, 1));
  CHECK_THROWS(PolyHash(2, PolyHash::kPrime + 1, 1));
}

TEST_CASE("pairwise collision rate matches 1/m") {
  // Fresh pairwise hash and fresh key pair per trial; the exact collision
  // probability is 1/m up to a bias below m/2^61.
  const uint64_t m = 1024;
  const int trials = 1'000'000;
  SeededRng rng(555);
  int collisions = 0;
  for (int i = 0; i < trials; ++i) {
    const PolyHash h(2, m, rng.next_u64());
    const uint64_t x = rng.next_u64() >> 4;
    uint64_t y = rng.next_u64() >> 4;
    while (y == x) y = rng.next_u64() >> 4;
    collisions += h(x) == h(y);
  }
  const double p = 1.0 / static_cast<double>(m);
  const double sigma = std::sqrt(p * (1 - p) / trials);
  CHECK(std::abs(collisions / static_cast<double>(trials) - p) <= 3 * sigma);
}

TEST_CASE("sign hash is a fair coin") {
  const SignHash g(2, 2024);
  const int n = 1'000'000;
  int64_t sum = 0;
  for (int key = 0; key < n; ++key) {
    const int s = g(key);
    CHECK((s == 1 || s == -1));
    sum += s;
  }
  // Pairwise independence kills the covariances, so sd(mean) = 1/sqrt(n).
  CHECK(std::abs(static_cast<double>(sum) / n) <= 3.0 / std::sqrt(n));

  const SignHash again(2, 2024);
  for (int key = 0; key < 100; ++key) CHECK(again(key) == g(key));
}

TEST_CASE("lsb of small values") {
  CHECK(lsb_index(4) == 2);
  CHECK(lsb_index(1) == 0);
  CHECK(lsb_index(6) == 1);
  CHECK_THROWS(lsb_index(0));
}

TEST_CASE("joint pairwise distribution passes a chi-squared test") {
  // (h(x), h(y)) over fresh seeds, m=8 buckets -> 64 cells, df = 63.
  // Critical value chi2(0.999, 63) = 103.4424 (frozen from scipy).
  const uint64_t m = 8;
  const int seeds = 10'000;
  const uint64_t x = 123456, y = 7891011;
  std::array<int, 64> cells{};
  for (int s = 0; s < seeds; ++s) {
    const PolyHash h(2, m, derive_seed(31337, s));
    cells[h(x) * m + h(y)]++;
  }
  const double expected = seeds / 64.0;
  double statistic = 0.0;
  for (int count : cells)
    statistic += (count - expected) * (count - expected) / expected;
  CHECK(statistic < 103.44237731987324);
}

TEST_CASE("lsb of a hashed key is geometric") {
  const int log_n = 16;
  const uint64_t n = uint64_t{1} << log_n;
  const PolyHash h(2, n, 90210);
  const int draws = 1'000'000;
  std::vector<int> counts(log_n + 1, 0);
  SeededRng rng(1106);
  for (int i = 0; i < draws; ++i) {
    const uint64_t hashed = h(rng.next_u64() >> 2);
    counts[hashed == 0 ? log_n : lsb_index(hashed)]++;
  }
  for (int i = 0; i + 3 <= log_n; ++i) {
    const double p = std::pow(2.0, -(i + 1));
    const double sigma = std::sqrt(p * (1 - p) / draws);
    CHECK(std::abs(counts[i] / static_cast<double>(draws) - p) <= 3 * sigma);
  }
}
