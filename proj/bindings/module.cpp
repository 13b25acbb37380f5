#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpcr/counter.hpp"
#include "dpcr/domain_reduction.hpp"
#include "dpcr/f2.hpp"
#include "dpcr/metrics.hpp"
#include "dpcr/minhash.hpp"
#include "dpcr/privacy.hpp"
#include "dpcr/stream.hpp"
#include "dpcr/version.hpp"

namespace py = pybind11;
using namespace dpcr;

namespace {

PrivacyBudget budget_from(double rho, bool noise_off) {
  return noise_off ? PrivacyBudget::off() : PrivacyBudget{rho};
}

EstimatorTrace trace_from(const std::vector<std::pair<double, double>>& pairs) {
  EstimatorTrace trace;
  trace.reserve(pairs.size());
  for (const auto& [exact, estimate] : pairs)
    trace.push_back({exact, estimate});
  return trace;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Differentially private continual-release estimators for "
            "turnstile streams";
  m.attr("__version__") = kVersion;

  py::enum_<StreamModel>(m, "StreamModel")
      .value("INSERTION_ONLY", StreamModel::InsertionOnly)
      .value("STRICT_TURNSTILE", StreamModel::StrictTurnstile)
      .value("GENERAL_TURNSTILE", StreamModel::GeneralTurnstile);

  py::enum_<GeneratorKind>(m, "GeneratorKind")
      .value("UNIFORM_INSERT_DELETE", GeneratorKind::UniformInsertDelete)
      .value("SINGLETON_HEAVY", GeneratorKind::SingletonHeavy)
      .value("PHASED_GROW_SHRINK", GeneratorKind::PhasedGrowShrink)
      .value("F2_LOWER_BOUND", GeneratorKind::F2LowerBound);

  py::class_<StreamUpdate>(m, "StreamUpdate")
      .def(py::init<uint64_t, int>(), py::arg("element"), py::arg("sign"))
      .def_readwrite("element", &StreamUpdate::element)
      .def_readwrite("sign", &StreamUpdate::sign)
      .def("__repr__", [](const StreamUpdate& u) {
        return "StreamUpdate(element=" + std::to_string(u.element) +
               ", sign=" + std::to_string(u.sign) + ")";
      });

  py::class_<StreamMeta>(m, "StreamMeta")
      .def(py::init<uint64_t, uint64_t, StreamModel>(), py::arg("universe"),
           py::arg("length"), py::arg("model") = StreamModel::StrictTurnstile)
      .def_readwrite("universe", &StreamMeta::universe)
      .def_readwrite("length", &StreamMeta::length)
      .def_readwrite("model", &StreamMeta::model);

  py::class_<ExactOracle>(m, "ExactOracle")
      .def(py::init<const StreamMeta&>())
      .def("update", &ExactOracle::update)
      .def("frequency", &ExactOracle::frequency)
      .def_property_readonly("distinct", &ExactOracle::distinct)
      .def_property_readonly("second_moment", &ExactOracle::second_moment)
      .def_property_readonly("timestep", &ExactOracle::timestep);

  m.def("gen_stream", &gen_stream, py::arg("kind"), py::arg("meta"),
        py::arg("seed"));
  m.def("f2_lower_bound_pair", &f2_lower_bound_pair, py::arg("length"));
  m.def("write_stream", &write_stream);
  m.def("read_stream", &read_stream);

  m.def("compose", [](const std::vector<double>& rhos) {
    std::vector<PrivacyBudget> parts;
    for (double r : rhos) parts.push_back(PrivacyBudget{r});
    return compose(parts).rho;
  });
  m.def("zcdp_to_approx", [](double rho, double delta) {
    const ApproxDP dp = zcdp_to_approx(PrivacyBudget{rho}, delta);
    return std::make_pair(dp.epsilon, dp.delta);
  });
  m.def("approx_to_zcdp", [](double epsilon, double delta) {
    return approx_to_zcdp(ApproxDP{epsilon, delta}).rho;
  });
  m.def("noise_floor", [](uint64_t capacity, double rho, uint64_t streams,
                          double gamma) {
    return noise_floor(capacity, rho, streams, gamma).tau;
  });

  py::class_<NoiseSource>(m, "NoiseSource")
      .def(py::init<uint64_t>(), py::arg("seed"))
      .def("gaussian", &NoiseSource::gaussian, py::arg("sigma"));

  py::class_<ContinualCounter>(m, "ContinualCounter")
      .def(py::init([](uint64_t capacity, double rho, uint64_t seed,
                       bool noise_off) {
             return ContinualCounter(capacity, budget_from(rho, noise_off),
                                     NoiseSource(seed));
           }),
           py::arg("capacity"), py::arg("rho"), py::arg("seed") = 0,
           py::arg("noise_off") = false)
      .def("update", &ContinualCounter::update)
      .def_property_readonly("current", &ContinualCounter::current)
      .def_property_readonly("exact", &ContinualCounter::exact)
      .def_property_readonly("height", &ContinualCounter::height)
      .def_property_readonly("node_sigma", &ContinualCounter::node_sigma)
      .def_property_readonly("state_words", &ContinualCounter::state_words);

  py::class_<MinHashEstimator>(m, "MinHashEstimator")
      .def(py::init([](uint64_t universe, uint64_t capacity, double rho,
                       uint64_t seed, bool noise_off, int replicas_per_log) {
             MinHashParams params;
             params.universe = universe;
             params.capacity = capacity;
             params.rho = rho;
             params.noise_off = noise_off;
             params.replicas_per_log = replicas_per_log;
             return MinHashEstimator(params, seed);
           }),
           py::arg("universe"), py::arg("capacity"), py::arg("rho"),
           py::arg("seed") = 0, py::arg("noise_off") = false,
           py::arg("replicas_per_log") = 8)
      .def("step", &MinHashEstimator::step)
      .def_property_readonly("current", &MinHashEstimator::current)
      .def_property_readonly("replica_count", &MinHashEstimator::replica_count)
      .def_property_readonly("tau", &MinHashEstimator::tau)
      .def_property_readonly("composed_budget",
                             &MinHashEstimator::composed_budget);

  py::class_<DomainReductionEstimator>(m, "DomainReductionEstimator")
      .def(py::init([](uint64_t universe, uint64_t capacity, double rho,
                       uint64_t seed, bool noise_off, int max_level,
                       double activation_factor) {
             DomainReductionParams params;
             params.universe = universe;
             params.capacity = capacity;
             params.rho = rho;
             params.noise_off = noise_off;
             params.max_level = max_level;
             params.activation_factor = activation_factor;
             return DomainReductionEstimator(params, seed);
           }),
           py::arg("universe"), py::arg("capacity"), py::arg("rho"),
           py::arg("seed") = 0, py::arg("noise_off") = false,
           py::arg("max_level") = 20, py::arg("activation_factor") = 3.0)
      .def("step", &DomainReductionEstimator::step)
      .def_property_readonly("current", &DomainReductionEstimator::current)
      .def_property_readonly("tau", &DomainReductionEstimator::tau)
      .def_property_readonly("composed_budget",
                             &DomainReductionEstimator::composed_budget);

  py::class_<F2Estimator>(m, "F2Estimator")
      .def(py::init([](uint64_t universe, uint64_t capacity, double rho,
                       double alpha, uint64_t seed, bool noise_off) {
             F2Params params;
             params.universe = universe;
             params.capacity = capacity;
             params.rho = rho;
             params.alpha = alpha;
             params.noise_off = noise_off;
             return F2Estimator(params, seed);
           }),
           py::arg("universe"), py::arg("capacity"), py::arg("rho"),
           py::arg("alpha") = 0.25, py::arg("seed") = 0,
           py::arg("noise_off") = false)
      .def("step", &F2Estimator::step)
      .def_property_readonly("current", &F2Estimator::current)
      .def_property_readonly("rows", &F2Estimator::rows)
      .def_property_readonly("composed_budget", &F2Estimator::composed_budget);

  m.def("minhash_error_bound", [](double rho, uint64_t capacity,
                                  uint64_t universe) {
    const ErrorBound bound = minhash_error_bound(rho, capacity, universe);
    return std::make_pair(bound.alpha, bound.beta);
  });
  m.def("f2_error_bound", &f2_error_bound, py::arg("rho"), py::arg("capacity"),
        py::arg("alpha"), py::arg("jl_constant") = 12,
        py::arg("floor_gamma") = 0.0);

  m.def("verify_envelope",
        [](const std::vector<std::pair<double, double>>& trace, double p,
           double q, double r, double s) {
          const auto check =
              verify_envelope(trace_from(trace), ErrorProfile{p, q, r, s});
          return std::make_pair(check.pass, check.first_violation);
        });
  m.def("minimal_beta",
        [](const std::vector<std::pair<double, double>>& trace, double alpha) {
          const auto [beta, profile] = minimal_beta(trace_from(trace), alpha);
          py::dict out;
          out["beta"] = beta;
          out["p"] = profile.p;
          out["q"] = profile.q;
          out["r"] = profile.r;
          out["s"] = profile.s;
          return out;
        });

  m.def("lemma1_validate",
        [](const std::vector<int64_t>& x, uint64_t m_, double ell,
           uint64_t trials, uint64_t seed) {
          const LemmaReport r = lemma1_validate(x, m_, ell, trials, seed);
          return std::make_pair(r.empirical, r.bound);
        });
  m.def("lemma2_validate",
        [](const std::vector<int64_t>& x, uint64_t m_, uint64_t trials,
           uint64_t seed) {
          const LemmaReport r = lemma2_validate(x, m_, trials, seed);
          return std::make_pair(r.empirical, r.bound);
        });
  m.def("lemma3_validate",
        [](const std::vector<int64_t>& x, uint64_t m_, double ell,
           double ell_prime, uint64_t trials, uint64_t seed) {
          const LemmaReport r =
              lemma3_validate(x, m_, ell, ell_prime, trials, seed);
          return std::make_pair(r.empirical, r.bound);
        });
}
