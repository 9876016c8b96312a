"""Robust eigenvalue-based spectrum sensing.

Scatter-matrix M-estimators (sample covariance, Tyler, multivariate-t ML,
generalized Gaussian ML), largest-eigenvalue test statistics, complex
elliptically symmetric noise samplers, and a reproducible Monte Carlo
harness with a CSV-emitting command line.
"""

__version__ = "0.1.0"

from .detectors import DetectorSpec, decide, glrt, largest_eigenvalue, rlrt
from .estimators import (
    EstimationError,
    FixedPointOptions,
    FixedPointResult,
    WeightFunction,
    fixed_point_residual,
    m_estimate,
    m_estimate_batch,
    scm,
    tyler_estimate,
)
from .montecarlo import (
    CdfCurve,
    ExclusionRateError,
    ExperimentResult,
    RocCurve,
    SimConfig,
    StatSample,
    calibrate_threshold,
    derive_seed,
    empirical_pfa_curve,
    ks_distance,
    pod_at_pfa,
    roc_curve,
    run_experiment,
    run_trials,
    threshold_grid,
)
from .sampling import (
    ChannelVector,
    Hypothesis,
    NoiseModel,
    RngStream,
    gg_scale,
    make_channel,
    sample_ces,
    sample_complex_sphere,
    sample_hypothesis,
    sample_texture,
)

__all__ = [
    "__version__",
    "ChannelVector",
    "CdfCurve",
    "DetectorSpec",
    "EstimationError",
    "ExclusionRateError",
    "ExperimentResult",
    "FixedPointOptions",
    "FixedPointResult",
    "Hypothesis",
    "NoiseModel",
    "RngStream",
    "RocCurve",
    "SimConfig",
    "StatSample",
    "WeightFunction",
    "calibrate_threshold",
    "decide",
    "derive_seed",
    "empirical_pfa_curve",
    "fixed_point_residual",
    "gg_scale",
    "glrt",
    "ks_distance",
    "largest_eigenvalue",
    "m_estimate",
    "m_estimate_batch",
    "make_channel",
    "pod_at_pfa",
    "rlrt",
    "roc_curve",
    "run_experiment",
    "run_trials",
    "sample_ces",
    "sample_complex_sphere",
    "sample_hypothesis",
    "sample_texture",
    "scm",
    "threshold_grid",
    "tyler_estimate",
]
