"""Shared builders and frozen reference values for the test suite.

The CANON_* constants are the fitted parameter set used throughout the
suite as a realistic working point.  Values in FROZEN were computed
independently of the library (high-precision arithmetic and adaptive
quadrature, rounded to double) so that algebra regressions surface as
hard failures rather than drifting tolerances.
"""

import numpy as np

from dctrw import (
    DoubleExponentialWaits,
    EmpiricalJumps,
    JumpModel,
    SeasonalityModel,
    seasonal_normalization,
)

CANON_TAU1 = 3.63
CANON_TAU2 = 32.57
CANON_WEIGHT = 0.586
CANON_EPS = 0.258
CANON_M = 0.269
CANON_MEAN_WAIT = 15.61116
CANON_P = 14986.0
CANON_Q = 2.25e8
CANON_DAY = 28800.0

# two-point magnitude table on {1, 20} whose moment ratio is exactly CANON_M
TWO_POINT_LOW = 1.0
TWO_POINT_HIGH = 20.0
TWO_POINT_P = 0.81914372148403866

FROZEN = {
    # transform values at s = 0.1 for the canonical mixture
    "psi_at_0p1": 0.52718555480929859,
    "first_wait_at_0p1": 0.30286951462332166,
    # equilibrium first-wait distribution: mixture weight on the tau1
    # component and the mean of the first wait
    "eq_weight": 0.13626021384701711,
    "first_wait_mean": 28.62662941126733,
    # decay-mode parameters for (canonical wtd, eps, M)
    "rate_mix": 0.1741435907065181,
    "v0": 0.13204160397059608,
    "v1": 0.23449213470421861,
    "v2": 0.026764013570613909,
    "a0": 0.059226726273496295,
    "a1": 0.058790935804249419,
    "a2": 0.0068953300358863841,
    # canonical continuous nVAF samples
    "nvaf_lags": (0.5, 2.0, 10.0, 40.0, 100.0),
    "nvaf_values": (
        0.11453316281813813,
        0.088798524893181537,
        0.026726548282461901,
        0.0026699012650743074,
        0.00047457910943174889,
    ),
    # exponential-wait nVAF at t=2 with eps=0.5, M=0.5, mean=1
    "exp_nvaf_at_2": 0.18393972058572116,
}


def canon_wtd():
    return DoubleExponentialWaits(CANON_TAU1, CANON_TAU2, CANON_WEIGHT)


def two_point_jumps():
    return EmpiricalJumps(
        np.array([TWO_POINT_LOW, TWO_POINT_HIGH]),
        np.array([TWO_POINT_P, 1.0 - TWO_POINT_P]),
    )


def canon_jump_model(epsilon=CANON_EPS):
    return JumpModel(two_point_jumps(), epsilon)


def canon_season(mean_wait=CANON_MEAN_WAIT):
    norm = seasonal_normalization(CANON_P, CANON_Q, CANON_DAY, mean_wait)
    return SeasonalityModel(CANON_P, CANON_Q, CANON_DAY, norm)
