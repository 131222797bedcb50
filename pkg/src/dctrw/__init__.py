"""Directed CTRW with one-step jump memory.

A library and CLI for a directed continuous-time random walk whose jump
magnitudes carry one step of memory: closed-form moment and velocity
autocorrelation curves, a transform-domain numerical oracle, an exact
event simulator with optional intraday seasonality, and an estimation
pipeline for tick data.
"""

__version__ = "0.1.0"

from .closed_forms import (
    VafDecayParams,
    double_exponential_decay_params,
    mean_drift,
    moment_ratio,
    nvaf_double_exponential,
    nvaf_exponential,
    nvaf_seasonal,
)
from .errors import (
    ConvergenceError,
    DctrwError,
    EstimationError,
    MethodFailureError,
    NumericError,
    ParseError,
    ValidationError,
)
from .laplace import (
    LaplaceFunction,
    PropagatorEvaluator,
    char_fn,
    first_wait_laplace,
    invert_laplace,
    moment1_laplace,
    moment2_laplace,
    nvaf_continuous_transform,
    propagator,
    vaf_laplace,
    wtd_laplace,
)
from .models import (
    DegenerateJumps,
    DoubleExponentialWaits,
    EmpiricalJumps,
    EventSeries,
    ExponentialJumps,
    ExponentialWaits,
    FirstWaitMode,
    JumpModel,
    SeasonalityModel,
    SimConfig,
    VafCurve,
    seasonal_normalization,
)
from .simulate import (
    MomentEstimate,
    empirical_nvaf,
    ensemble_moments,
    sample_first_wait,
    sample_sessions,
    sample_trajectory,
    sample_trajectory_seasonal,
)
from .estimate import (
    BinSpec,
    FittedModel,
    JumpStats,
    SeasonalityFit,
    WtdFit,
    estimate_jump_stats,
    fit_model,
    fit_seasonality,
    fit_wtd,
    ingest_ticks,
    lag_autocorrelation,
    model_from_json,
    model_to_json,
    pooled_mean_wait,
    write_ticks,
)

__all__ = [name for name in dir() if not name.startswith("_")]
