"""Closed-form moments and velocity autocorrelation curves.

All curves here are for the normalized velocity autocorrelation (nVAF):
the raw autocorrelation of the jump-velocity process scaled by
2*mean_wait/M2 so that the lag-zero spike carries unit delta weight.
The continuous part then depends on the waiting-time model, the copy
probability ``epsilon``, and the magnitude moment ratio M = M1^2/M2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import NumericError, ValidationError
from .models import (
    DoubleExponentialWaits,
    ExponentialWaits,
    JumpModel,
    SeasonalityModel,
    VafCurve,
    WaitingTimeModel,
)

__all__ = [
    "moment_ratio",
    "mean_drift",
    "nvaf_exponential",
    "nvaf_double_exponential",
    "nvaf_seasonal",
    "VafDecayParams",
    "double_exponential_decay_params",
]


def moment_ratio(jumps: JumpModel) -> float:
    """M = M1^2 / M2 of the magnitude distribution; always in (0, 1]."""
    m1 = jumps.m1()
    m2 = jumps.m2()
    ratio = m1 * m1 / m2
    # Jensen guarantees the bound; only rounding can nudge it past 1.
    return min(ratio, 1.0)


def mean_drift(jumps: JumpModel, wtd: WaitingTimeModel) -> float:
    """Slope of the mean path, M1/mean_wait.  Independent of epsilon."""
    return jumps.m1() / wtd.mean_wait


def _check_m_ratio(m_ratio: float) -> float:
    m = float(m_ratio)
    if not math.isfinite(m) or not 0.0 < m <= 1.0:
        raise ValidationError(f"moment ratio must lie in (0, 1], got {m!r}")
    return m


def _check_epsilon(epsilon: float) -> float:
    eps = float(epsilon)
    if not math.isfinite(eps) or not 0.0 <= eps < 1.0:
        raise ValidationError(f"epsilon must lie in [0, 1), got {eps!r}")
    return eps


def _check_lags(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValidationError("lag grid must be a nonempty 1-d array")
    if t[0] <= 0.0 or np.any(np.diff(t) <= 0.0):
        raise ValidationError("lags must be strictly increasing and > 0")
    return t


def nvaf_exponential(
    t_grid, epsilon: float, wtd: ExponentialWaits, m_ratio: float
) -> VafCurve:
    """Continuous nVAF for exponential waits: a single decaying mode.

    value(t) = 2*eps*(1 - M)/mean * exp(-(1 - eps)*t/mean), which is
    identically zero when eps = 0 or M = 1.
    """
    if not isinstance(wtd, ExponentialWaits):
        raise TypeError(f"expected ExponentialWaits, got {type(wtd).__name__}")
    eps = _check_epsilon(epsilon)
    m = _check_m_ratio(m_ratio)
    t = _check_lags(t_grid)
    mean = wtd.mean
    amp = 2.0 * eps * (1.0 - m) / mean
    values = amp * np.exp(-(1.0 - eps) * t / mean)
    return VafCurve(delta_weight=1.0, lags=t, values=values)


@dataclass(frozen=True)
class VafDecayParams:
    """Rates and amplitudes of the three-mode nVAF for two-scale waits.

    ``w1``/``w2`` are the component rates 1/tau1, 1/tau2; ``rate_mix`` is
    the weight-averaged rate.  v0 carries the burstiness mode (present
    even at eps = 0), v1 and v2 the two memory modes.
    """

    w1: float
    w2: float
    rate_mix: float
    v0: float
    v1: float
    v2: float
    a0: float
    a1: float
    a2: float


def double_exponential_decay_params(
    wtd: DoubleExponentialWaits, epsilon: float, m_ratio: float
) -> VafDecayParams:
    """Compute the (A_j, v_j) triple for a non-degenerate mixture."""
    if not isinstance(wtd, DoubleExponentialWaits):
        raise TypeError(f"expected DoubleExponentialWaits, got {type(wtd).__name__}")
    eps = _check_epsilon(epsilon)
    m = _check_m_ratio(m_ratio)
    if wtd.is_degenerate():
        raise ValidationError(
            "mixture is degenerate (single effective scale); use the exponential form"
        )
    w = wtd.weight
    w1 = 1.0 / wtd.tau1
    w2 = 1.0 / wtd.tau2
    rate_mix = w * w1 + (1.0 - w) * w2
    v0 = (1.0 - w) * w1 + w * w2

    # Roots of v^2 - b v + c with b = w1 + w2 - eps*rate_mix, c = w1*w2*(1-eps).
    # b > 0 always, and both roots are real for any eps in [0, 1).  Larger
    # root by addition, smaller via the product, which keeps the smaller
    # root accurate when the discriminant is nearly b^2.
    b = w1 + w2 - eps * rate_mix
    c = w1 * w2 * (1.0 - eps)
    disc = b * b - 4.0 * c
    if disc < 0.0:
        if disc < -1e-12 * b * b:
            raise NumericError(f"negative discriminant {disc!r} for valid mixture")
        disc = 0.0
    v1 = 0.5 * (b + math.sqrt(disc))
    v2 = c / v1

    a0 = 2.0 * m * w * (1.0 - w) * (w1 - w2) ** 2 / v0
    pref = 2.0 * eps * (1.0 - m) / (v1 - v2) if eps > 0.0 else 0.0
    a1 = -pref * (w1 * w2 - rate_mix * v1)
    a2 = pref * (w1 * w2 - rate_mix * v2)
    return VafDecayParams(
        w1=w1, w2=w2, rate_mix=rate_mix, v0=v0, v1=v1, v2=v2, a0=a0, a1=a1, a2=a2
    )


def nvaf_double_exponential(
    t_grid, epsilon: float, wtd: DoubleExponentialWaits, m_ratio: float
) -> VafCurve:
    """Continuous nVAF for two-scale waits: three decaying modes.

    Degenerate mixtures (equal scales, or all mass on one component)
    collapse to the exponential single-mode form.
    """
    if not isinstance(wtd, DoubleExponentialWaits):
        raise TypeError(f"expected DoubleExponentialWaits, got {type(wtd).__name__}")
    if wtd.is_degenerate():
        return nvaf_exponential(t_grid, epsilon, wtd.collapse(), m_ratio)
    par = double_exponential_decay_params(wtd, epsilon, m_ratio)
    t = _check_lags(t_grid)
    values = (
        par.a0 * np.exp(-par.v0 * t)
        + par.a1 * np.exp(-par.v1 * t)
        + par.a2 * np.exp(-par.v2 * t)
    )
    return VafCurve(delta_weight=1.0, lags=t, values=values)


def nvaf_seasonal(
    t_grid,
    epsilon: float,
    wtd: DoubleExponentialWaits,
    m_ratio: float,
    season: SeasonalityModel,
) -> VafCurve:
    """Day-averaged nVAF under the intraday seasonality profile.

    Each stationary mode A_j * exp(-v_j * u) is averaged over day
    positions with the lag measured on the operational clock implied by
    theta; the average evaluates to an erf pair per mode.  Lags must lie
    strictly inside (0, day_length).  The profile normalization does not
    enter (the curve is invariant to rescaling theta's prefactor).
    """
    par = double_exponential_decay_params(wtd, epsilon, m_ratio)
    t = _check_lags(t_grid)
    T = season.day_length
    if t[-1] >= T:
        raise ValidationError(
            f"seasonal lags must be < day_length={T}, got max lag {t[-1]}"
        )
    p, q = season.p, season.q
    x_const = T * T / 3.0 - p * T + p * p + q
    j_factor = 0.5 / (T - t) * np.sqrt(math.pi * x_const / t)
    j0 = (t / x_const) * (0.5 * t - p) ** 2
    jk = (t / x_const) * (0.5 * t - (p - T)) ** 2
    tau_min = (t * t / 12.0 + q) / x_const * t

    values = np.zeros_like(t)
    for a_j, v_j in (
        (par.a0, par.v0),
        (par.a1, par.v1),
        (par.a2, par.v2),
    ):
        if a_j == 0.0:
            continue
        values += (
            a_j
            * j_factor
            / math.sqrt(v_j)
            * np.exp(-v_j * tau_min)
            * (erf(np.sqrt(v_j * j0)) + erf(np.sqrt(v_j * jk)))
        )
    return VafCurve(delta_weight=1.0, lags=t, values=values)
