#include "dpcr/counter.hpp"

#include <cmath>
#include <stdexcept>

namespace dpcr {

NoiseFloor noise_floor(uint64_t capacity, double rho, uint64_t streams,
                       double gamma) {
  if (capacity < 1) throw std::invalid_argument("capacity must be >= 1");
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  if (streams < 1) throw std::invalid_argument("streams must be >= 1");
  if (!(gamma > 0 && gamma < 1))
    throw std::invalid_argument("gamma must lie in (0, 1)");
  const double height = tree_height(capacity);
  const double releases =
      2.0 * static_cast<double>(capacity) * static_cast<double>(streams);
  const double tau =
      height * std::sqrt(2.0 / rho) * std::sqrt(2.0 * std::log(releases / gamma));
  return NoiseFloor{tau, gamma};
}

ContinualCounter::ContinualCounter(uint64_t capacity, PrivacyBudget budget,
                                   NoiseSource noise)
    : capacity_(capacity),
      height_(tree_height(capacity)),
      budget_(budget),
      noise_(noise) {
  if (capacity < 1) throw std::invalid_argument("capacity must be >= 1");
  if (budget.noise_off()) {
    node_sigma_ = 0.0;
  } else if (budget.rho > 0) {
    node_sigma_ = std::sqrt(2.0 * height_ / budget.rho);
  } else {
    throw std::invalid_argument("rho must be positive (or the off sentinel)");
  }
  level_partial_.assign(height_, 0.0);
  level_start_.assign(height_, 0);
}

void ContinualCounter::throw_capacity() const {
  throw std::runtime_error("counter past its capacity");
}

void ContinualCounter::throw_domain() const {
  throw std::invalid_argument("counter update outside {-1,0,+1}");
}

LazyCounter::LazyCounter(uint64_t capacity, double node_sigma,
                         uint64_t noise_seed)
    : noise_seed_(noise_seed),
      node_sigma_(node_sigma),
      height_(static_cast<uint8_t>(tree_height(capacity))) {
  if (!(node_sigma >= 0)) throw std::invalid_argument("negative node sigma");
}

void LazyCounter::advance(uint64_t t) {
  if (level_partial_.empty()) level_partial_.assign(height_, 0.0);
  // Step forward when the gap is short; otherwise rebuild the dyadic
  // cover of [1, t] from scratch.  Both paths key node noise by close
  // time and fold it top-down, matching ContinualCounter bit for bit.
  const int cover_size = std::popcount(t);
  if (cached_t_ > 0 && t - cached_t_ <= static_cast<uint64_t>(cover_size)) {
    for (uint64_t s = cached_t_ + 1; s <= t; ++s) {
      const uint64_t upper = s & (s - 1);
      const double above =
          upper == 0 ? 0.0 : level_partial_[std::countr_zero(upper)];
      level_partial_[std::countr_zero(s)] = above + node_noise(s);
    }
  } else {
    // Highest covering node first: its end is t with the low bits kept,
    // found by peeling set bits from the top.
    double fold = 0.0;
    for (int level = 63; level >= 0; --level) {
      if (!((t >> level) & 1)) continue;
      const uint64_t node_end = t & ~((uint64_t{1} << level) - 1);
      fold += node_noise(node_end);
      level_partial_[level] = fold;
    }
  }
  cached_t_ = t;
}

void LazyCounter::throw_backwards() const {
  throw std::logic_error("LazyCounter queried backwards in time");
}

}  // namespace dpcr
