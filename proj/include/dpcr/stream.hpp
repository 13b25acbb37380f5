#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dpcr {

enum class StreamModel { InsertionOnly, StrictTurnstile, GeneralTurnstile };

const char* model_name(StreamModel model);
StreamModel model_from_name(const std::string& name);

// One turnstile update: element in [1, n], sign in {-1, 0, +1}.
struct StreamUpdate {
  uint64_t element = 1;
  int sign = 1;

  bool operator==(const StreamUpdate&) const = default;
};

using Stream = std::vector<StreamUpdate>;

struct StreamMeta {
  uint64_t universe = 1;  // n
  uint64_t length = 1;    // T
  StreamModel model = StreamModel::StrictTurnstile;

  void validate() const;

  bool operator==(const StreamMeta&) const = default;
};

// Exact ground truth: full frequency vector with the distinct count and the
// second moment maintained in O(1) per update.  Dense storage up to 10^6
// elements, hash map above that; universes past 10^8 are refused.
class ExactOracle {
 public:
  explicit ExactOracle(const StreamMeta& meta);

  // Throws InputError (naming the timestep) on a strict-turnstile violation
  // or on a non-insertion under the insertion-only model.
  void update(const StreamUpdate& u);

  int64_t frequency(uint64_t element) const;
  uint64_t distinct() const { return distinct_; }
  int64_t second_moment() const { return second_moment_; }
  uint64_t timestep() const { return timestep_; }
  const StreamMeta& meta() const { return meta_; }

 private:
  int64_t* slot(uint64_t element);

  StreamMeta meta_;
  std::vector<int64_t> dense_;
  std::unordered_map<uint64_t, int64_t> sparse_;
  uint64_t distinct_ = 0;
  int64_t second_moment_ = 0;
  uint64_t timestep_ = 0;
};

enum class GeneratorKind {
  UniformInsertDelete,
  SingletonHeavy,
  PhasedGrowShrink,
  F2LowerBound,
};

const char* kind_name(GeneratorKind kind);
GeneratorKind kind_from_name(const std::string& name);

// Deterministic in (kind, meta, seed).  Strict generators never drive a
// frequency negative.
Stream gen_stream(GeneratorKind kind, const StreamMeta& meta, uint64_t seed);

// The F2 sensitivity pair: T copies of (1, +1), and its neighbor whose last
// update is (2, +1).  Exact F2 difference at time T is 2T - 2.
std::pair<Stream, Stream> f2_lower_bound_pair(uint64_t length);

// Stream file: "# n=<int> T=<int> model=<insertion|strict|general>" header,
// then one "t,element,sign" line per update with t counting from 1.
void write_stream(const StreamMeta& meta, const Stream& stream,
                  const std::string& path);
std::pair<StreamMeta, Stream> read_stream(const std::string& path);

}  // namespace dpcr
