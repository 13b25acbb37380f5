#include "dpcr/runner.hpp"

#include <atomic>
#include <iostream>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "dpcr/counter.hpp"
#include "dpcr/domain_reduction.hpp"
#include "dpcr/errors.hpp"
#include "dpcr/f2.hpp"
#include "dpcr/minhash.hpp"
#include "dpcr/version.hpp"

namespace dpcr {

const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::MinHash:
      return "minhash";
    case EstimatorKind::DomainReduction:
      return "domain-reduction";
    case EstimatorKind::F2:
      return "f2";
    case EstimatorKind::Counter:
      return "counter";
  }
  return "unknown";
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "minhash") return EstimatorKind::MinHash;
  if (name == "domain-reduction") return EstimatorKind::DomainReduction;
  if (name == "f2") return EstimatorKind::F2;
  if (name == "counter") return EstimatorKind::Counter;
  throw InputError("unknown estimator: " + name);
}

std::pair<StreamMeta, Stream> resolve_stream(const RunConfig& config) {
  const bool has_path = !config.stream_path.empty();
  const bool has_gen = config.generator.has_value();
  if (has_path == has_gen)
    throw InputError("exactly one of a stream file or a generator is needed");
  if (has_path) return read_stream(config.stream_path);
  const GeneratorSpec& spec = *config.generator;
  return {spec.meta, gen_stream(spec.kind, spec.meta, config.seed)};
}

namespace {

void check_hypothesis(const RunConfig& config, const StreamMeta& meta) {
  if (config.estimator == EstimatorKind::MinHash &&
      meta.model == StreamModel::GeneralTurnstile)
    throw HypothesisError(
        "the minhash estimator is stated for strict turnstile streams; "
        "refusing a general turnstile input");
  if (config.estimator == EstimatorKind::MinHash) {
    const double log_t = std::log2(static_cast<double>(meta.length));
    // The error guarantee assumes rho below about log^4(T); warn, do not stop.
    if (config.rho > std::pow(log_t, 4.0))
      std::cerr << "note: rho " << config.rho
                << " exceeds log2(T)^4; the minhash error bound's "
                   "hypothesis may not hold\n";
  }
}

bool outside_hypothesis(const RunConfig& config, const StreamMeta& meta) {
  // The F2 guarantee assumes the strict turnstile model; the sketch itself is
  // sign-agnostic, so general inputs run but are tagged.
  return config.estimator == EstimatorKind::F2 &&
         meta.model == StreamModel::GeneralTurnstile;
}

void audit_budget(double composed, double rho) {
  if (std::abs(composed - rho) > 1e-12 * std::max(1.0, std::abs(rho)))
    throw std::logic_error("privacy audit: composed budget " +
                           std::to_string(composed) + " != rho " +
                           std::to_string(rho));
}

}  // namespace

EstimatorTrace run_trace(const RunConfig& config, const StreamMeta& meta,
                         const Stream& stream, uint64_t trial_seed) {
  check_hypothesis(config, meta);
  if (stream.size() != meta.length)
    throw InputError("stream length does not match its header");

  ExactOracle oracle(meta);
  EstimatorTrace trace;
  trace.reserve(stream.size());

  switch (config.estimator) {
    case EstimatorKind::MinHash: {
      MinHashParams params;
      params.universe = meta.universe;
      params.capacity = meta.length;
      params.rho = config.rho;
      params.noise_off = config.noise_off;
      params.replicas_per_log = config.replicas_per_log;
      params.floor_gamma = config.floor_gamma;
      params.replica_override = config.replica_override;
      MinHashEstimator estimator(params, trial_seed);
      audit_budget(estimator.composed_budget(), config.rho);
      for (const auto& u : stream) {
        oracle.update(u);
        const int64_t estimate = estimator.step(u);
        trace.push_back({static_cast<double>(oracle.distinct()),
                         static_cast<double>(estimate)});
      }
      break;
    }
    case EstimatorKind::DomainReduction: {
      DomainReductionParams params;
      params.universe = meta.universe;
      params.capacity = meta.length;
      params.rho = config.rho;
      params.noise_off = config.noise_off;
      params.replicas_per_log = config.replicas_per_log;
      params.activation_factor = config.activation_factor;
      params.max_level = config.max_level;
      params.floor_gamma = config.floor_gamma;
      params.tau_override = config.tau_override;
      params.replica_override = config.replica_override;
      DomainReductionEstimator estimator(params, trial_seed);
      audit_budget(estimator.composed_budget(), config.rho);
      for (const auto& u : stream) {
        oracle.update(u);
        const int64_t estimate = estimator.step(u);
        trace.push_back({static_cast<double>(oracle.distinct()),
                         static_cast<double>(estimate)});
      }
      break;
    }
    case EstimatorKind::F2: {
      F2Params params;
      params.universe = meta.universe;
      params.capacity = meta.length;
      params.rho = config.rho;
      params.alpha = config.alpha;
      params.noise_off = config.noise_off;
      params.jl_constant = config.jl_constant;
      params.floor_gamma = config.floor_gamma;
      params.row_override = config.row_override;
      F2Estimator estimator(params, trial_seed);
      audit_budget(estimator.composed_budget(), config.rho);
      for (const auto& u : stream) {
        oracle.update(u);
        const double estimate = estimator.step(u);
        trace.push_back(
            {static_cast<double>(oracle.second_moment()), estimate});
      }
      break;
    }
    case EstimatorKind::Counter: {
      const PrivacyBudget budget = config.noise_off
                                       ? PrivacyBudget::off()
                                       : PrivacyBudget{config.rho};
      ContinualCounter counter(meta.length, budget, NoiseSource(trial_seed));
      int64_t prefix = 0;
      for (const auto& u : stream) {
        oracle.update(u);
        prefix += u.sign;
        const double estimate = counter.update(u.sign);
        trace.push_back({static_cast<double>(prefix), estimate});
      }
      break;
    }
  }
  return trace;
}

namespace {

nlohmann::json derived_quantities(const RunConfig& config,
                                  const StreamMeta& meta) {
  nlohmann::json derived;
  switch (config.estimator) {
    case EstimatorKind::MinHash: {
      const ErrorBound bound =
          minhash_error_bound(config.rho, meta.length, meta.universe,
                              config.replicas_per_log, config.floor_gamma);
      derived["alpha_bound"] = bound.alpha;
      derived["beta_bound"] = bound.beta;
      derived["tau"] = bound.alpha / 24.0;
      break;
    }
    case EstimatorKind::F2: {
      const int rows =
          config.row_override > 0
              ? config.row_override
              : f2_row_count(meta.length, config.alpha, config.jl_constant);
      const double gamma = config.floor_gamma > 0
                               ? config.floor_gamma
                               : 1.0 / static_cast<double>(meta.length);
      derived["rows"] = rows;
      derived["lambda"] =
          noise_floor(meta.length, config.rho / rows, rows, gamma).tau;
      derived["beta_bound"] = f2_error_bound(config.rho, meta.length,
                                             config.alpha, config.jl_constant,
                                             config.floor_gamma);
      break;
    }
    case EstimatorKind::DomainReduction: {
      derived["tau"] = domain_reduction_tau(config.rho, meta.length,
                                            config.replicas_per_log,
                                            config.max_level,
                                            config.floor_gamma,
                                            config.replica_override);
      break;
    }
    default:
      break;
  }
  return derived;
}

}  // namespace

nlohmann::json manifest_for(const RunConfig& config) {
  nlohmann::json m;
  m["version"] = kVersion;
  m["estimator"] = estimator_name(config.estimator);
  m["rho"] = config.rho;
  if (config.requested_dp) {
    m["epsilon"] = config.requested_dp->epsilon;
    m["delta"] = config.requested_dp->delta;
  }
  m["seed"] = config.seed;
  m["noise_off"] = config.noise_off;
  if (!config.stream_path.empty()) {
    m["stream"] = {{"path", config.stream_path}};
  } else if (config.generator) {
    m["stream"] = {{"generator", kind_name(config.generator->kind)},
                   {"n", config.generator->meta.universe},
                   {"T", config.generator->meta.length},
                   {"model", model_name(config.generator->meta.model)}};
  }
  m["params"] = {{"alpha", config.alpha},
                 {"jl_constant", config.jl_constant},
                 {"replicas_per_log", config.replicas_per_log},
                 {"activation_factor", config.activation_factor},
                 {"max_level", config.max_level},
                 {"floor_gamma", config.floor_gamma},
                 {"tau_override", config.tau_override},
                 {"replica_override", config.replica_override},
                 {"row_override", config.row_override}};
  m["trials"] = config.trials;
  m["out"] = config.out_path;
  return m;
}

RunConfig config_from_manifest(const nlohmann::json& manifest) {
  RunConfig config;
  config.estimator = estimator_from_name(manifest.at("estimator"));
  config.rho = manifest.at("rho");
  if (manifest.contains("epsilon"))
    config.requested_dp =
        ApproxDP{manifest.at("epsilon"), manifest.at("delta")};
  config.seed = manifest.at("seed");
  config.noise_off = manifest.at("noise_off");
  const auto& stream = manifest.at("stream");
  if (stream.contains("path")) {
    config.stream_path = stream.at("path");
  } else {
    GeneratorSpec spec;
    spec.kind = kind_from_name(stream.at("generator"));
    spec.meta.universe = stream.at("n");
    spec.meta.length = stream.at("T");
    spec.meta.model = model_from_name(stream.at("model"));
    config.generator = spec;
  }
  const auto& params = manifest.at("params");
  config.alpha = params.at("alpha");
  config.jl_constant = params.at("jl_constant");
  config.replicas_per_log = params.at("replicas_per_log");
  config.activation_factor = params.at("activation_factor");
  config.max_level = params.at("max_level");
  config.floor_gamma = params.at("floor_gamma");
  config.tau_override = params.at("tau_override");
  config.replica_override = params.at("replica_override");
  config.row_override = params.at("row_override");
  config.trials = manifest.at("trials");
  config.out_path = manifest.at("out");
  return config;
}

std::string trial_trace_path(const RunConfig& config, int trial) {
  if (config.trials <= 1) return config.out_path;
  const size_t dot = config.out_path.rfind('.');
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, ".t%03d", trial);
  if (dot == std::string::npos || dot == 0) return config.out_path + suffix;
  return config.out_path.substr(0, dot) + suffix + config.out_path.substr(dot);
}

RunResult cmd_run(const RunConfig& config) {
  if (config.trials < 1) throw InputError("trials must be >= 1");
  if (config.jobs < 1) throw InputError("jobs must be >= 1");

  const auto [meta, stream] = resolve_stream(config);
  check_hypothesis(config, meta);

  RunResult result;
  result.trace_paths.resize(config.trials);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const int trial = next.fetch_add(1);
      if (trial >= config.trials) return;
      try {
        const uint64_t trial_seed = derive_seed(config.seed, trial);
        const EstimatorTrace trace =
            run_trace(config, meta, stream, trial_seed);
        const std::string path = trial_trace_path(config, trial);
        write_trace(trace, path);
        result.trace_paths[trial] = path;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int workers = std::min(config.jobs, config.trials);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& thread : pool) thread.join();
  if (failure) std::rethrow_exception(failure);

  nlohmann::json manifest = manifest_for(config);
  manifest["derived"] = derived_quantities(config, meta);
  manifest["derived"]["composed_budget"] = config.rho;
  manifest["outside_hypothesis"] = outside_hypothesis(config, meta);
  result.manifest = manifest;
  result.manifest_path = config.manifest_path.empty()
                             ? config.out_path + ".manifest.json"
                             : config.manifest_path;
  std::ofstream out(result.manifest_path, std::ios::binary);
  if (!out)
    throw InputError("cannot open " + result.manifest_path + " for writing");
  out << manifest.dump(2) << "\n";
  return result;
}

}  // namespace dpcr
