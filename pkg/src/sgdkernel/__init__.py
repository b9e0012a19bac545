"""Discretized transition kernels of SGD iterates.

Quantize iterate trajectories into digit states, estimate the per-parameter
Markov transition kernel with pluggable next-digit providers, impute unseen
rows with debiased Sinkhorn barycenters, and forecast convergence from new
starting points.  A side toolkit reproduces two-state chain mixing and
estimation-error scaling analyses.
"""

from .config import ExperimentConfig, config_hash, load_config
from .errors import (
    ConfigError,
    DegenerateSeriesError,
    DimensionMismatchError,
    DivergenceError,
    EmptyTrajectoryError,
    MalformedContextError,
    NoFilledRowsError,
    NonErgodicChainError,
    OutOfBandWarning,
    OutOfRangeError,
    RemoteUnavailableError,
    SinkhornConvergenceWarning,
    UnknownStateError,
)
from .estimator import TransitionKernelEstimator
from .experiments import (
    run_estimate,
    run_forecast,
    run_regime_probe,
    run_scaling,
    run_simulate,
)
from .forecasting import (
    ConvergenceSummary,
    ForecastReport,
    ForecastRun,
    compare_to_sgd,
    detect_convergence,
    forecast_run_to_csv,
    propagate,
    sample_trajectory,
)
from .kernel import (
    BlockKernel,
    PartialTransitionMatrix,
    assemble,
    default_band,
    estimate_rows,
    impute_missing_rows,
)
from .providers import (
    DigitPdf,
    DigitProvider,
    EmpiricalProvider,
    OracleProvider,
    RemoteProvider,
    hierarchy_pdf,
    make_empirical,
    make_oracle,
    make_remote,
)
from .quantizer import (
    AffineMap,
    TrajectoryQuantizer,
    band_range,
    decode,
    encode,
    fit_affine,
    n_states,
    one_hot,
    parse,
    serialize,
)
from .scaling import (
    MixingCheck,
    PowerLawFit,
    ScalingCurve,
    TwoStateChain,
    embedded_rows,
    embedded_states,
    empirical_provider_factory,
    fit_power_law,
    icl_scaling_experiment,
    mixing_bound_check,
    oracle_provider_factory,
    simulate_chain,
    spectral_gap,
    stationary,
    tv_distance,
)
from .sgd import (
    Dataset,
    LinearRegressionObjective,
    Objective,
    SineRegressionObjective,
    Trajectory,
    make_linreg,
    make_sine,
    run_gld,
    run_sgd,
    trajectory_to_csv,
)
from .sinkhorn import SinkhornConfig, debiased_sinkhorn_barycenter, default_epsilon

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
