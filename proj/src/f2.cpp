#include "dpcr/f2.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "dpcr/errors.hpp"

namespace dpcr {

namespace {

int log2_ceil(uint64_t v) {
  return std::countr_zero(std::bit_ceil(std::max<uint64_t>(v, 2)));
}

}  // namespace

int f2_row_count(uint64_t capacity, double alpha, int jl_constant) {
  if (!(alpha > 0 && alpha < 1))
    throw std::invalid_argument("alpha must lie in (0, 1)");
  if (jl_constant < 1) throw std::invalid_argument("jl constant must be >= 1");
  const double alpha0 = alpha / 5.0;
  const double log_t = std::max(1, tree_height(capacity) - 1);
  return static_cast<int>(
      std::ceil(jl_constant * log_t / (alpha0 * alpha0)));
}

F2Estimator::F2Estimator(const F2Params& params, uint64_t seed) {
  if (!(params.rho > 0)) throw std::invalid_argument("rho must be positive");
  const int rows = params.row_override > 0
                       ? params.row_override
                       : f2_row_count(params.capacity, params.alpha,
                                      params.jl_constant);
  counter_rho_ = params.rho / rows;
  const double gamma = params.floor_gamma > 0
                           ? params.floor_gamma
                           : 1.0 / static_cast<double>(params.capacity);
  counter_floor_ = noise_floor(params.capacity, counter_rho_, rows, gamma).tau;
  const PrivacyBudget counter_budget =
      params.noise_off ? PrivacyBudget::off() : PrivacyBudget{counter_rho_};

  const int independence = log2_ceil(params.capacity) + 1;
  NoiseSource noise(derive_seed(seed, 1));
  row_hash_.reserve(rows);
  counters_.reserve(rows);
  for (int i = 0; i < rows; ++i) {
    row_hash_.emplace_back(independence, 2, derive_seed(seed, 2 * i));
    counters_.emplace_back(params.capacity, counter_budget, noise.derive(i));
  }
}

const std::vector<uint64_t>& F2Estimator::signs_for(uint64_t element) {
  auto it = sign_cache_.find(element);
  if (it == sign_cache_.end()) {
    if (sign_cache_.size() >= sign_cache_limit_) sign_cache_.clear();
    std::vector<uint64_t> packed((rows() + 63) / 64, 0);
    for (int i = 0; i < rows(); ++i)
      if (row_hash_[i](element) != 0) packed[i >> 6] |= uint64_t{1} << (i & 63);
    it = sign_cache_.emplace(element, std::move(packed)).first;
  }
  return it->second;
}

double F2Estimator::step(const StreamUpdate& update) {
  if (update.sign < -1 || update.sign > 1)
    throw InputError("sign outside {-1,0,+1}");
  const std::vector<uint64_t>& signs = signs_for(update.element);
  double sum_squares = 0.0;
  for (int i = 0; i < rows(); ++i) {
    const bool positive = (signs[i >> 6] >> (i & 63)) & 1;
    const int value = update.sign == 0 ? 0 : (positive ? update.sign : -update.sign);
    const double released = counters_[i].update(value);
    sum_squares += released * released;
  }
  estimate_ = std::max(0.0, sum_squares / rows());
  return estimate_;
}

size_t F2Estimator::state_words() const {
  size_t words = 0;
  for (const auto& h : row_hash_) words += h.state_words();
  for (const auto& c : counters_) words += c.state_words();
  return words;
}

double f2_error_bound(double rho, uint64_t capacity, double alpha,
                      int jl_constant, double floor_gamma) {
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  const int rows = f2_row_count(capacity, alpha, jl_constant);
  const double gamma = floor_gamma > 0
                           ? floor_gamma
                           : 1.0 / static_cast<double>(capacity);
  const double lambda = noise_floor(capacity, rho / rows, rows, gamma).tau;
  return 10.0 * lambda * lambda * rows / alpha;
}

}  // namespace dpcr
