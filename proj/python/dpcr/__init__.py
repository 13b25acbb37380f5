"""Differentially private continual-release estimators for turnstile streams.

Thin wrapper over the C++ core; see the project README for the estimator
surfaces and the evaluation CLI.
"""

from dpcr._core import (  # noqa: F401
    ContinualCounter,
    DomainReductionEstimator,
    ExactOracle,
    F2Estimator,
    GeneratorKind,
    MinHashEstimator,
    NoiseSource,
    StreamMeta,
    StreamModel,
    StreamUpdate,
    __version__,
    approx_to_zcdp,
    compose,
    f2_error_bound,
    f2_lower_bound_pair,
    gen_stream,
    lemma1_validate,
    lemma2_validate,
    lemma3_validate,
    minhash_error_bound,
    minimal_beta,
    noise_floor,
    read_stream,
    verify_envelope,
    write_stream,
    zcdp_to_approx,
)
