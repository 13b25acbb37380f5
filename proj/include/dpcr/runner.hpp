#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpcr/metrics.hpp"
#include "dpcr/privacy.hpp"
#include "dpcr/stream.hpp"

namespace dpcr {

enum class EstimatorKind { MinHash, DomainReduction, F2, Counter };

const char* estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::UniformInsertDelete;
  StreamMeta meta;
};

// Everything needed to reproduce a run; serialized into the manifest so a
// manifest alone replays it byte for byte.
struct RunConfig {
  EstimatorKind estimator = EstimatorKind::MinHash;
  double rho = 1.0;
  std::optional<ApproxDP> requested_dp;  // set when budget came as (eps, delta)
  uint64_t seed = 0;
  bool noise_off = false;

  std::string stream_path;               // exactly one of these two
  std::optional<GeneratorSpec> generator;

  double alpha = 0.25;                   // f2
  int jl_constant = 12;                  // f2
  int replicas_per_log = 8;              // minhash / domain-reduction
  double activation_factor = 3.0;        // domain-reduction C'
  int max_level = 20;                    // domain-reduction level cap
  double floor_gamma = 0.0;              // 0 selects 1/T
  double tau_override = 0.0;             // domain-reduction testing knob
  int replica_override = 0;
  int row_override = 0;

  int trials = 1;
  int jobs = 1;
  std::string out_path = "trace.csv";
  std::string manifest_path;             // default: out_path + ".manifest.json"
};

struct RunResult {
  std::vector<std::string> trace_paths;
  nlohmann::json manifest;
  std::string manifest_path;
};

// Loads or generates the configured stream.
std::pair<StreamMeta, Stream> resolve_stream(const RunConfig& config);

// Runs the configured estimator over one stream with the given trial seed.
// Validates the model hypothesis and audits the composed budget.
EstimatorTrace run_trace(const RunConfig& config, const StreamMeta& meta,
                         const Stream& stream, uint64_t trial_seed);

// Full command: fans trials out over jobs workers, writes traces and the
// manifest.  Trace bytes are independent of the job count.
RunResult cmd_run(const RunConfig& config);

nlohmann::json manifest_for(const RunConfig& config);
RunConfig config_from_manifest(const nlohmann::json& manifest);

// Trace path for a trial: the bare out path for single-trial runs,
// otherwise out stem + ".tNNN" + extension.
std::string trial_trace_path(const RunConfig& config, int trial);

}  // namespace dpcr
