"""Batched Thompson Sampling for headline testing.

Per-event Thompson arm selection with Beta-Bernoulli posteriors updated only
at fixed-interval batch boundaries (summation or normalization rule), a
trace-driven simulation harness, a test-rollout baseline, and the evaluation
metrics that compare them.
"""

__version__ = "0.1.0"

from .baseline import BaselineResult, run_baselines, run_test_rollout, split_testing_traffic
from .core import (
    ArmPosterior,
    BanditState,
    BatchCounters,
    UpdateMethod,
    init_arms,
    normalization_update,
    posterior_mean,
    record_response,
    sample_arm,
    summation_update,
)
from .corpus import CorpusParams, generate_synthetic_corpus, parse_corpus, save_corpus
from .errors import ConfigurationError, ValidationError
from .evaluation import (
    CalibratedPrior,
    ClickGainReport,
    ConvergenceVerdict,
    SubOptimalReport,
    SweepCell,
    SweepReport,
    bootstrap_first_hour_ci,
    calibrate_adversarial_prior,
    click_gain,
    compare_frequencies,
    compare_update_methods,
    convergence_verdict,
    false_convergence_rate,
    histogram_minutes,
    percentile_minutes,
    relative_gain,
    self_correction_experiment,
    sign_test_p_value,
    suboptimal_impressions,
    time_to_optimize,
    write_histogram_csv,
)
from .kernel import KERNEL_BACKEND, has_native, simulate_batch
from .rng import derive_rng, derive_seed_sequence
from .simulate import (
    ArticleResult,
    ArticleSpec,
    Batch,
    ImpressionTrace,
    SimConfig,
    active_lifespan,
    build_batches,
    run_article,
    run_corpus,
    simulate_response,
)

__all__ = [
    "__version__",
    "ArmPosterior",
    "ArticleResult",
    "ArticleSpec",
    "BanditState",
    "BaselineResult",
    "Batch",
    "BatchCounters",
    "CalibratedPrior",
    "ClickGainReport",
    "ConfigurationError",
    "ConvergenceVerdict",
    "CorpusParams",
    "ImpressionTrace",
    "KERNEL_BACKEND",
    "SimConfig",
    "SubOptimalReport",
    "SweepCell",
    "SweepReport",
    "UpdateMethod",
    "ValidationError",
    "active_lifespan",
    "bootstrap_first_hour_ci",
    "build_batches",
    "calibrate_adversarial_prior",
    "click_gain",
    "compare_frequencies",
    "compare_update_methods",
    "convergence_verdict",
    "derive_rng",
    "derive_seed_sequence",
    "false_convergence_rate",
    "generate_synthetic_corpus",
    "has_native",
    "histogram_minutes",
    "init_arms",
    "normalization_update",
    "parse_corpus",
    "percentile_minutes",
    "posterior_mean",
    "record_response",
    "relative_gain",
    "run_article",
    "run_baselines",
    "run_corpus",
    "run_test_rollout",
    "sample_arm",
    "save_corpus",
    "self_correction_experiment",
    "sign_test_p_value",
    "simulate_batch",
    "simulate_response",
    "split_testing_traffic",
    "suboptimal_impressions",
    "summation_update",
    "time_to_optimize",
    "write_histogram_csv",
]
