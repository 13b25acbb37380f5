#include "dpcr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dpcr/errors.hpp"

namespace dpcr {

namespace {
constexpr double kSlack = 1e-9;
}

void ErrorProfile::validate() const {
  if (!(p >= 1.0) || !(q >= 1.0))
    throw std::invalid_argument("profile needs p, q >= 1");
  if (!(r >= 0.0) || !(s >= 0.0))
    throw std::invalid_argument("profile needs r, s >= 0");
}

EnvelopeCheck verify_envelope(const EstimatorTrace& trace,
                              const ErrorProfile& profile) {
  profile.validate();
  for (size_t i = 0; i < trace.size(); ++i) {
    const double exact = trace[i].exact;
    const double estimate = trace[i].estimate;
    if (estimate < exact / profile.p - profile.r - kSlack)
      return EnvelopeCheck{false, i + 1, true};
    if (estimate > profile.q * exact + profile.s + kSlack)
      return EnvelopeCheck{false, i + 1, false};
  }
  return EnvelopeCheck{};
}

namespace {

ErrorProfile profile_for_split(const EstimatorTrace& trace, double p,
                               double q) {
  double worst_low = 0.0, worst_high = 0.0;
  for (const auto& point : trace) {
    worst_low = std::max(worst_low, point.exact / p - point.estimate);
    worst_high = std::max(worst_high, point.estimate - q * point.exact);
  }
  return ErrorProfile{p, q, worst_low, worst_high};
}

}  // namespace

std::pair<double, ErrorProfile> minimal_beta(const EstimatorTrace& trace,
                                             double alpha) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("alpha must be >= 1");
  const double root = std::sqrt(alpha);
  ErrorProfile profile = profile_for_split(trace, root, root);
  return {profile.beta(), profile};
}

std::pair<double, ErrorProfile> minimal_beta_grid(const EstimatorTrace& trace,
                                                  double alpha, int splits) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("alpha must be >= 1");
  if (splits < 1) throw std::invalid_argument("splits must be >= 1");
  double best_beta = std::numeric_limits<double>::infinity();
  ErrorProfile best;
  for (int i = 0; i < splits; ++i) {
    const double u = splits == 1 ? 0.5 : static_cast<double>(i) / (splits - 1);
    const double p = std::pow(alpha, u);
    ErrorProfile candidate = profile_for_split(trace, p, alpha / p);
    if (candidate.beta() < best_beta) {
      best_beta = candidate.beta();
      best = candidate;
    }
  }
  return {best_beta, best};
}

double success_rate(const std::vector<EstimatorTrace>& traces,
                    const ErrorProfile& profile) {
  if (traces.empty())
    throw std::invalid_argument("success_rate needs at least one trace");
  size_t passing = 0;
  for (const auto& trace : traces)
    if (verify_envelope(trace, profile).pass) ++passing;
  return static_cast<double>(passing) / static_cast<double>(traces.size());
}

namespace {

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace(const EstimatorTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << "t,exact,estimate\n";
  for (size_t i = 0; i < trace.size(); ++i)
    out << i + 1 << ',' << format_value(trace[i].exact) << ','
        << format_value(trace[i].estimate) << '\n';
  if (!out) throw InputError("write failed for " + path);
}

EstimatorTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "t,exact,estimate")
    throw InputError(path + ": line 1: expected 't,exact,estimate' header");
  EstimatorTrace trace;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string t_text, exact_text, est_text;
    if (!std::getline(row, t_text, ',') ||
        !std::getline(row, exact_text, ',') || !std::getline(row, est_text))
      throw InputError(path + ": line " + std::to_string(line_no) +
                       ": expected 't,exact,estimate'");
    try {
      size_t pos = 0;
      const unsigned long long t = std::stoull(t_text, &pos);
      if (pos != t_text.size() || t != trace.size() + 1)
        throw std::invalid_argument(t_text);
      trace.push_back({std::stod(exact_text), std::stod(est_text)});
    } catch (const std::exception&) {
      throw InputError(path + ": line " + std::to_string(line_no) +
                       ": malformed row '" + line + "'");
    }
  }
  return trace;
}

}  // namespace dpcr
