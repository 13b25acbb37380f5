#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dpcr/rng.hpp"

namespace dpcr {

// zCDP budget.  Composition is additive; rho = +infinity is the noise-off
// sentinel used by oracle-equivalence tests.
struct PrivacyBudget {
  double rho = 0.0;

  bool noise_off() const { return std::isinf(rho); }
  static PrivacyBudget off() {
    return PrivacyBudget{std::numeric_limits<double>::infinity()};
  }
};

struct ApproxDP {
  double epsilon = 0.0;
  double delta = 0.0;
};

PrivacyBudget compose(const std::vector<PrivacyBudget>& parts);

// Even split across c consumers; composing the parts returns the whole.
std::vector<PrivacyBudget> split(PrivacyBudget whole, int consumers);

// rho-zCDP implies (rho + 2*sqrt(rho*ln(1/delta)), delta)-DP.  Natural log.
ApproxDP zcdp_to_approx(PrivacyBudget budget, double delta);

// Unique rho solving rho + 2*sqrt(rho*L) = epsilon with L = ln(1/delta),
// via sqrt(rho) = epsilon / (sqrt(L + epsilon) + sqrt(L)).
PrivacyBudget approx_to_zcdp(const ApproxDP& target);

// Inverse standard normal CDF (AS241), accurate to ~1e-15 relative.
double normal_quantile(double p);

// Seeded Gaussian sampler.  Samples are indexable: sample i is a pure
// function of (seed, i), which lets tree counters re-read frozen per-node
// noise without storing it.
class NoiseSource {
 public:
  explicit NoiseSource(uint64_t seed) : seed_(seed) {}

  NoiseSource derive(uint64_t component) const {
    return NoiseSource(derive_seed(seed_, component));
  }

  // Next sample of N(0, sigma^2); sigma > 0.
  double gaussian(double sigma);

  double gaussian_at(uint64_t index, double sigma) const {
    return sigma * standard_normal_at(seed_, index);
  }

  static double standard_normal_at(uint64_t seed, uint64_t index);

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace dpcr
