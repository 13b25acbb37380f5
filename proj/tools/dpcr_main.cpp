#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpcr/counter.hpp"
#include "dpcr/domain_reduction.hpp"
#include "dpcr/errors.hpp"
#include "dpcr/metrics.hpp"
#include "dpcr/privacy.hpp"
#include "dpcr/runner.hpp"
#include "dpcr/stream.hpp"
#include "dpcr/version.hpp"

namespace {

using nlohmann::json;

void emit(const json& report, bool as_json) {
  if (as_json) {
    std::cout << report.dump(2) << "\n";
    return;
  }
  for (const auto& [key, value] : report.items())
    std::cout << key << ": " << value.dump() << "\n";
}

json evaluate_trace(const dpcr::EstimatorTrace& trace,
                    const dpcr::ErrorProfile& profile) {
  const auto check = dpcr::verify_envelope(trace, profile);
  uint64_t violations = 0;
  for (const auto& point : trace) {
    const dpcr::EstimatorTrace single{point};
    if (!dpcr::verify_envelope(single, profile).pass) ++violations;
  }
  json report;
  report["alpha"] = profile.alpha();
  report["beta"] = profile.beta();
  report["p"] = profile.p;
  report["q"] = profile.q;
  report["r"] = profile.r;
  report["s"] = profile.s;
  report["violations"] = violations;
  report["pass"] = check.pass;
  if (!check.pass) report["first_violation_t"] = check.first_violation;
  return report;
}

std::vector<int64_t> synthetic_frequencies(uint64_t universe, uint64_t support,
                                           bool mixed, uint64_t seed) {
  if (support > universe)
    throw dpcr::InputError("support cannot exceed the universe");
  std::vector<int64_t> x(universe, 0);
  dpcr::SeededRng rng(seed);
  for (uint64_t j = 0; j < support; ++j) {
    int64_t magnitude = 1;
    if (mixed && j % 2 == 1) magnitude = 1000;
    x[j] = (rng.next_u64() & 1) ? magnitude : -magnitude;
  }
  return x;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Differentially private continual-release estimators for "
               "turnstile streams"};
  app.set_version_flag("--version", dpcr::kVersion);
  app.require_subcommand(1);
  app.fallthrough();  // --json may follow the subcommand
  bool as_json = false;
  app.add_flag("--json", as_json, "machine-readable JSON output");

  // ---- generate ----
  auto* generate = app.add_subcommand("generate", "write a stream file");
  std::string gen_kind = "uniform-insert-delete";
  uint64_t gen_n = 1024, gen_t = 1024, gen_seed = 0;
  std::string gen_model = "strict", gen_out = "stream.csv";
  generate->add_option("--kind", gen_kind,
                       "uniform-insert-delete | singleton-heavy | "
                       "phased-grow-shrink | f2-lowerbound");
  generate->add_option("--n", gen_n, "universe size");
  generate->add_option("--T", gen_t, "stream length");
  generate->add_option("--model", gen_model, "insertion | strict | general");
  generate->add_option("--seed", gen_seed)->envname("DPCR_SEED");
  generate->add_option("--out", gen_out, "output path; f2-lowerbound also "
                       "writes <out>.neighbor");

  // ---- run ----
  auto* run = app.add_subcommand("run", "run an estimator over a stream");
  std::string run_estimator = "minhash";
  double run_rho = 0.0, run_epsilon = 0.0, run_delta = 0.0;
  uint64_t run_seed = 0;
  std::string run_stream, run_gen_kind, run_model = "strict";
  uint64_t run_n = 1024, run_t = 1024;
  std::string run_out = "trace.csv", run_manifest_out, run_manifest_in;
  dpcr::RunConfig config;
  run->add_option("--estimator", run_estimator,
                  "minhash | domain-reduction | f2 | counter");
  auto* rho_opt = run->add_option("--rho", run_rho, "zCDP budget");
  auto* eps_opt = run->add_option("--epsilon", run_epsilon, "(eps,delta)-DP");
  run->add_option("--delta", run_delta)->needs(eps_opt);
  eps_opt->excludes(rho_opt);
  run->add_option("--seed", run_seed)->envname("DPCR_SEED");
  run->add_option("--stream", run_stream, "input stream file");
  run->add_option("--gen", run_gen_kind, "generator kind instead of a file");
  run->add_option("--n", run_n, "generator universe");
  run->add_option("--T", run_t, "generator length");
  run->add_option("--model", run_model, "generator model");
  run->add_flag("--noise-off", config.noise_off, "disable noise (no privacy)");
  run->add_option("--alpha", config.alpha, "f2 multiplicative slack");
  run->add_option("--jl-constant", config.jl_constant);
  run->add_option("--replicas-per-log", config.replicas_per_log);
  run->add_option("--c-prime", config.activation_factor,
                  "domain-reduction activation factor");
  run->add_option("--max-level", config.max_level);
  run->add_option("--floor-gamma", config.floor_gamma);
  run->add_option("--tau-override", config.tau_override);
  run->add_option("--replica-override", config.replica_override);
  run->add_option("--row-override", config.row_override);
  run->add_option("--trials", config.trials);
  run->add_option("--jobs", config.jobs);
  run->add_option("--out", run_out, "trace path");
  run->add_option("--manifest-out", run_manifest_out);
  run->add_option("--manifest", run_manifest_in, "replay a saved manifest");

  // ---- evaluate ----
  auto* evaluate = app.add_subcommand("evaluate", "score a trace");
  std::string eval_trace, eval_batch, eval_out;
  double eval_alpha = 0.0;
  std::vector<double> eval_profile;
  bool eval_grid = false;
  evaluate->add_option("--trace", eval_trace, "trace CSV");
  evaluate->add_option("--batch", eval_batch, "directory of trace CSVs");
  evaluate->add_option("--alpha", eval_alpha,
                       "report the smallest beta at this alpha");
  evaluate->add_option("--profile", eval_profile, "p,q,r,s envelope")
      ->delimiter(',')
      ->expected(4);
  evaluate->add_flag("--grid", eval_grid,
                     "refine over log-spaced (p,q) splits");
  evaluate->add_option("--out", eval_out, "write the JSON report here too");

  // ---- validate ----
  auto* validate = app.add_subcommand(
      "validate", "Monte-Carlo checks of the domain-reduction lemmas");
  validate->require_subcommand(1);
  struct LemmaArgs {
    uint64_t n = 1u << 20, support = 10000, m = 1, trials = 1000, seed = 0;
    double ell = 0.0, ell_prime = 10.0;
    bool mixed = false;
    std::string stream;
  } lemma_args;
  auto add_lemma_common = [&](CLI::App* cmd) {
    cmd->add_option("--n", lemma_args.n, "universe size");
    cmd->add_option("--support", lemma_args.support, "nonzero entries");
    cmd->add_option("--m", lemma_args.m, "reduced domain size");
    cmd->add_option("--trials", lemma_args.trials);
    cmd->add_option("--seed", lemma_args.seed)->envname("DPCR_SEED");
    cmd->add_flag("--mixed", lemma_args.mixed,
                  "half the entries at magnitude 1000");
    cmd->add_option("--stream", lemma_args.stream,
                    "take frequencies from this stream instead");
  };
  auto* lemma1 = validate->add_subcommand("lemma1", "anti-concentration");
  add_lemma_common(lemma1);
  lemma1->add_option("--ell", lemma_args.ell, "0 selects 100*log2(n)");
  auto* lemma2 = validate->add_subcommand("lemma2", "coordinate emptiness");
  add_lemma_common(lemma2);
  auto* lemma3 = validate->add_subcommand("lemma3", "support preservation");
  add_lemma_common(lemma3);
  lemma3->add_option("--ell", lemma_args.ell, "0 selects 10");
  lemma3->add_option("--ell-prime", lemma_args.ell_prime);

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "micro-benchmarks");
  bench->require_subcommand(1);
  auto* bench_counter = bench->add_subcommand("counter", "tree counter");
  uint64_t bench_t = 1u << 20;
  double bench_rho = 1.0;
  bench_counter->add_option("--T", bench_t);
  bench_counter->add_option("--rho", bench_rho);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? dpcr::kExitOk : dpcr::kExitUsage;
  }

  if (generate->parsed()) {
    dpcr::StreamMeta meta{gen_n, gen_t, dpcr::model_from_name(gen_model)};
    const auto kind = dpcr::kind_from_name(gen_kind);
    if (kind == dpcr::GeneratorKind::F2LowerBound) {
      const auto [base, neighbor] = dpcr::f2_lower_bound_pair(gen_t);
      meta.universe = std::max<uint64_t>(meta.universe, 2);
      dpcr::write_stream(meta, base, gen_out);
      dpcr::write_stream(meta, neighbor, gen_out + ".neighbor");
      emit({{"written", {gen_out, gen_out + ".neighbor"}}}, as_json);
    } else {
      const auto stream = dpcr::gen_stream(kind, meta, gen_seed);
      dpcr::write_stream(meta, stream, gen_out);
      emit({{"written", {gen_out}}}, as_json);
    }
    return dpcr::kExitOk;
  }

  if (run->parsed()) {
    if (!run_manifest_in.empty()) {
      std::ifstream in(run_manifest_in);
      if (!in) throw dpcr::InputError("cannot open " + run_manifest_in);
      const int jobs = config.jobs;
      config = dpcr::config_from_manifest(json::parse(in));
      config.jobs = jobs;  // worker count never affects the bytes
    } else {
      config.estimator = dpcr::estimator_from_name(run_estimator);
      if (eps_opt->count() > 0) {
        const dpcr::ApproxDP requested{run_epsilon, run_delta};
        config.rho = dpcr::approx_to_zcdp(requested).rho;
        config.requested_dp = requested;
      } else if (rho_opt->count() > 0) {
        config.rho = run_rho;
      } else {
        throw dpcr::InputError("one of --rho or --epsilon/--delta is needed");
      }
      config.seed = run_seed;
      config.out_path = run_out;
      config.manifest_path = run_manifest_out;
      if (!run_stream.empty()) {
        config.stream_path = run_stream;
      } else if (!run_gen_kind.empty()) {
        config.generator = dpcr::GeneratorSpec{
            dpcr::kind_from_name(run_gen_kind),
            dpcr::StreamMeta{run_n, run_t, dpcr::model_from_name(run_model)}};
      } else {
        throw dpcr::InputError("one of --stream or --gen is needed");
      }
    }
    const auto result = dpcr::cmd_run(config);
    json report;
    report["traces"] = result.trace_paths;
    report["manifest"] = result.manifest_path;
    if (result.manifest.value("outside_hypothesis", false))
      std::cerr << "note: general turnstile input is outside the stated "
                   "hypothesis of the f2 error guarantee\n";
    emit(report, as_json);
    return dpcr::kExitOk;
  }

  if (evaluate->parsed()) {
    json report;
    if (!eval_batch.empty()) {
      if (eval_profile.empty())
        throw dpcr::InputError("--batch needs --profile");
      std::vector<std::string> paths;
      for (const auto& entry : std::filesystem::directory_iterator(eval_batch))
        if (entry.path().extension() == ".csv")
          paths.push_back(entry.path().string());
      std::sort(paths.begin(), paths.end());
      std::vector<dpcr::EstimatorTrace> traces;
      for (const auto& path : paths)
        traces.push_back(dpcr::read_trace(path));
      const dpcr::ErrorProfile profile{eval_profile[0], eval_profile[1],
                                       eval_profile[2], eval_profile[3]};
      report["traces"] = traces.size();
      report["success_rate"] = dpcr::success_rate(traces, profile);
      report["alpha"] = profile.alpha();
      report["beta"] = profile.beta();
    } else {
      const auto trace = dpcr::read_trace(eval_trace);
      if (!eval_profile.empty()) {
        const dpcr::ErrorProfile profile{eval_profile[0], eval_profile[1],
                                         eval_profile[2], eval_profile[3]};
        report = evaluate_trace(trace, profile);
        report["success_rate"] =
            dpcr::success_rate({trace}, profile);
      } else if (eval_alpha >= 1.0) {
        const auto [beta, profile] =
            eval_grid ? dpcr::minimal_beta_grid(trace, eval_alpha)
                      : dpcr::minimal_beta(trace, eval_alpha);
        report = evaluate_trace(trace, profile);
        report["success_rate"] = report["pass"].get<bool>() ? 1.0 : 0.0;
      } else {
        throw dpcr::InputError("one of --alpha (>= 1) or --profile is needed");
      }
    }
    if (!eval_out.empty()) {
      std::ofstream out(eval_out);
      out << report.dump(2) << "\n";
    }
    emit(report, as_json);
    return dpcr::kExitOk;
  }

  if (validate->parsed()) {
    std::vector<int64_t> frequencies;
    if (!lemma_args.stream.empty()) {
      const auto [meta, stream] = dpcr::read_stream(lemma_args.stream);
      dpcr::ExactOracle oracle(meta);
      for (const auto& u : stream) oracle.update(u);
      frequencies.resize(meta.universe);
      for (uint64_t j = 1; j <= meta.universe; ++j)
        frequencies[j - 1] = oracle.frequency(j);
    } else {
      frequencies = synthetic_frequencies(lemma_args.n, lemma_args.support,
                                          lemma_args.mixed, lemma_args.seed);
    }
    dpcr::LemmaReport lemma_report;
    if (lemma1->parsed()) {
      const double ell =
          lemma_args.ell > 0
              ? lemma_args.ell
              : 100.0 * std::log2(static_cast<double>(frequencies.size()));
      lemma_report =
          dpcr::lemma1_validate(frequencies, lemma_args.m, ell,
                                lemma_args.trials, lemma_args.seed);
    } else if (lemma2->parsed()) {
      lemma_report = dpcr::lemma2_validate(frequencies, lemma_args.m,
                                           lemma_args.trials, lemma_args.seed);
    } else {
      const double ell = lemma_args.ell > 0 ? lemma_args.ell : 10.0;
      lemma_report =
          dpcr::lemma3_validate(frequencies, lemma_args.m, ell,
                                lemma_args.ell_prime, lemma_args.trials,
                                lemma_args.seed);
    }
    json report;
    report["lemma"] = lemma_report.lemma;
    report["hypothesis"] = "satisfied";
    report["trials"] = lemma_report.trials;
    report["empirical"] = lemma_report.empirical;
    report["bound"] = lemma_report.bound;
    for (const auto& [key, value] : lemma_report.extra) report[key] = value;
    emit(report, as_json);
    return dpcr::kExitOk;
  }

  if (bench->parsed() && bench_counter->parsed()) {
    dpcr::ContinualCounter counter(bench_t, dpcr::PrivacyBudget{bench_rho},
                                   dpcr::NoiseSource(1));
    const auto start = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (uint64_t t = 0; t < bench_t; ++t) sink += counter.update(1);
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    json report;
    report["updates"] = bench_t;
    report["seconds"] = elapsed;
    report["updates_per_second"] = bench_t / elapsed;
    report["checksum"] = sink;
    emit(report, as_json);
    return dpcr::kExitOk;
  }

  return dpcr::kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const dpcr::HypothesisError& e) {
    std::cerr << "hypothesis violation: " << e.what() << "\n";
    return dpcr::kExitHypothesis;
  } catch (const dpcr::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dpcr::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return dpcr::kExitInternal;
  }
}
