#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dpcr {

// Per-timestep (exact value, released estimate) pair.
struct TracePoint {
  double exact = 0.0;
  double estimate = 0.0;

  bool operator==(const TracePoint&) const = default;
};

using EstimatorTrace = std::vector<TracePoint>;

// Mixed multiplicative/additive envelope: Y/p - r <= Yhat <= q*Y + s with
// alpha = p*q and beta = r + s.
struct ErrorProfile {
  double p = 1.0;
  double q = 1.0;
  double r = 0.0;
  double s = 0.0;

  double alpha() const { return p * q; }
  double beta() const { return r + s; }
  void validate() const;
};

struct EnvelopeCheck {
  bool pass = true;
  uint64_t first_violation = 0;  // 1-based timestep, 0 when passing
  bool lower_side = false;       // which inequality broke first
};

// Checks both inequalities at every timestep, with 1e-9 absolute slack for
// exact-integer ground truths carried as doubles.
EnvelopeCheck verify_envelope(const EstimatorTrace& trace,
                              const ErrorProfile& profile);

// Smallest beta at the symmetric split p = q = sqrt(alpha):
//   r* = max_t max(0, Y/p - Yhat),  s* = max_t max(0, Yhat - q*Y).
// An upper bound on the minimum over all (p,q,r,s) splits.
std::pair<double, ErrorProfile> minimal_beta(const EstimatorTrace& trace,
                                             double alpha);

// Refinement over log-spaced (p, q) splits with p*q = alpha; includes the
// symmetric split, so never worse than minimal_beta.
std::pair<double, ErrorProfile> minimal_beta_grid(const EstimatorTrace& trace,
                                                  double alpha,
                                                  int splits = 17);

// Fraction of traces whose every timestep satisfies the profile.
double success_rate(const std::vector<EstimatorTrace>& traces,
                    const ErrorProfile& profile);

// Trace file: "t,exact,estimate" CSV, t counting from 1.
void write_trace(const EstimatorTrace& trace, const std::string& path);
EstimatorTrace read_trace(const std::string& path);

}  // namespace dpcr
