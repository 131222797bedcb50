"""Transform-domain route to moments and the velocity autocorrelation.

Everything here works on the Laplace transform of the walk's propagator
and moments, evaluated numerically and inverted with classical real- or
complex-node schemes.  It deliberately shares no algebra with
``closed_forms`` beyond the model parameters, so the two routes check
each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConvergenceError, MethodFailureError, ValidationError
from .models import (
    DegenerateJumps,
    DoubleExponentialWaits,
    EmpiricalJumps,
    ExponentialJumps,
    ExponentialWaits,
    JumpModel,
    MagnitudeDistribution,
    WaitingTimeModel,
)

__all__ = [
    "LaplaceFunction",
    "wtd_laplace",
    "first_wait_laplace",
    "char_fn",
    "PropagatorEvaluator",
    "propagator",
    "moment1_laplace",
    "moment2_laplace",
    "vaf_laplace",
    "nvaf_continuous_transform",
    "invert_laplace",
]

# Below this value of |s|*mean_wait the direct (1 - psi)/(mean*s) form of
# the equilibrium first-wait transform loses too many digits; switch to
# its Taylor series in s.
SMALL_S_THRESHOLD = 1e-6


@dataclass(frozen=True)
class LaplaceFunction:
    """A transform f(s) together with a bound on its rightmost singularity."""

    fn: Callable
    abscissa: float = 0.0

    def __call__(self, s):
        return self.fn(s)


def wtd_laplace(wtd: WaitingTimeModel, s):
    """Laplace transform of the waiting-time density at s (real or complex).

    Exponential: 1/(1 + mean*s).  Mixture: the weighted sum of component
    transforms.  Evaluating exactly on a pole raises.
    """
    s = np.asarray(s)
    if isinstance(wtd, ExponentialWaits):
        den = 1.0 + wtd.mean * s
        if np.any(den == 0.0):
            raise ValidationError(f"s = {-1.0 / wtd.mean} is a pole of the transform")
        return 1.0 / den
    if isinstance(wtd, DoubleExponentialWaits):
        den1 = 1.0 + wtd.tau1 * s
        den2 = 1.0 + wtd.tau2 * s
        if np.any(den1 == 0.0) or np.any(den2 == 0.0):
            raise ValidationError("s coincides with a pole of the mixture transform")
        return wtd.weight / den1 + (1.0 - wtd.weight) / den2
    raise TypeError(f"unsupported waiting-time model {type(wtd).__name__}")


def first_wait_laplace(wtd: WaitingTimeModel, s):
    """Transform of the equilibrium first-wait density, (1 - psi~)/(mean*s).

    Near s = 0 the quotient is evaluated by its series
    1 - s*<t^2>/(2<t>) + s^2*<t^3>/(6<t>) to avoid cancellation.
    """
    s = np.asarray(s)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    mean = wtd.mean_wait
    small = np.abs(s) * mean < SMALL_S_THRESHOLD
    out = np.empty(s.shape, dtype=complex if np.iscomplexobj(s) else float)
    if np.any(~small):
        sb = s[~small]
        out[~small] = (1.0 - wtd_laplace(wtd, sb)) / (mean * sb)
    if np.any(small):
        ss = s[small]
        c1 = wtd.moment(2) / (2.0 * mean)
        c2 = wtd.moment(3) / (6.0 * mean)
        out[small] = 1.0 - c1 * ss + c2 * ss * ss
    return out[0] if scalar else out


def char_fn(magnitudes: MagnitudeDistribution, k):
    """Characteristic function E[exp(i*k*R)] of the magnitude distribution.

    The empirical variant is the exact finite sum over the table.
    """
    k = np.asarray(k)
    if isinstance(magnitudes, DegenerateJumps):
        return np.exp(1j * k * magnitudes.r0)
    if isinstance(magnitudes, ExponentialJumps):
        return 1.0 / (1.0 - 1j * k * magnitudes.mean)
    if isinstance(magnitudes, EmpiricalJumps):
        # outer product over the support; k may be any shape
        kk = np.atleast_1d(k).astype(complex)
        vals = np.exp(1j * np.multiply.outer(kk, magnitudes.values))
        res = vals @ magnitudes.probabilities
        return res.reshape(k.shape) if k.ndim else res[0]
    raise TypeError(f"unsupported magnitude distribution {type(magnitudes).__name__}")


@dataclass(frozen=True)
class PropagatorEvaluator:
    """Evaluation context for the propagator's memory series."""

    wtd: WaitingTimeModel
    jumps: JumpModel
    series_tol: float = 1e-12
    max_terms: int = 100_000


def _memory_series(k: float, s: complex, ev: PropagatorEvaluator) -> complex:
    """S(k; s) = sum_{n>=1} (psi~ * eps)^(n-1) * H~(n*k), truncated when a
    term falls below series_tol relative to the running sum."""
    psi = complex(wtd_laplace(ev.wtd, s))
    eps = ev.jumps.epsilon
    ratio = psi * eps
    total = 0.0 + 0.0j
    factor = 1.0 + 0.0j
    for n in range(1, ev.max_terms + 1):
        term = factor * complex(char_fn(ev.jumps.magnitudes, n * k))
        total += term
        if abs(term) <= ev.series_tol * abs(total):
            return total
        factor *= ratio
    raise ConvergenceError(
        f"memory series did not converge within {ev.max_terms} terms "
        f"(|psi~*eps| = {abs(ratio):.6g})"
    )


def propagator(k: float, s: complex, ev: PropagatorEvaluator) -> complex:
    """Laplace-Fourier propagator P~(k; s) of the equilibrium walk.

    Valid for Re(s) > 0.  At k = 0 this reduces to 1/s exactly
    (normalization), which the memory series reproduces analytically.
    """
    s = complex(s)
    if s.real <= 0.0:
        raise ValidationError(f"propagator requires Re(s) > 0, got {s!r}")
    psi = complex(wtd_laplace(ev.wtd, s))
    mean = ev.wtd.mean_wait
    eps = ev.jumps.epsilon
    series = _memory_series(k, s, ev)
    head = 1.0 / s - (1.0 - psi) / (mean * s * s)
    tail = (1.0 - psi) ** 2 / (mean * s * s) * series / (1.0 - (1.0 - eps) * psi * series)
    return head + tail


def moment1_laplace(jumps: JumpModel, wtd: WaitingTimeModel, s):
    """Transform of the mean path: M1/(mean*s^2); no epsilon dependence."""
    s = np.asarray(s)
    return jumps.m1() / (wtd.mean_wait * s * s)


def moment2_laplace(jumps: JumpModel, wtd: WaitingTimeModel, s):
    """Transform of the second moment of the walk."""
    s = np.asarray(s)
    psi = wtd_laplace(wtd, s)
    eps = jumps.epsilon
    mean = wtd.mean_wait
    m1 = jumps.m1()
    m2 = jumps.m2()
    term_sq = m2 * (1.0 + eps * psi) / (mean * s * s * (1.0 - eps * psi))
    term_cross = (
        2.0
        * (1.0 - eps)
        * psi
        * m1
        * m1
        / (mean * s * s * (1.0 - psi) * (1.0 - eps * psi))
    )
    return term_sq + term_cross


def vaf_laplace(jumps: JumpModel, wtd: WaitingTimeModel, s):
    """Transform-domain normalized velocity autocorrelation.

    Returns the full normalized combination
        (1 - M)*(1 + eps*psi~)/(1 - eps*psi~)
        + M*((1 + psi~)/(1 - psi~) - 2/(mean*s)),
    whose inverse is the unit delta at zero lag plus the continuous part.
    Subtract 1 before inversion to obtain the continuous part alone.
    """
    s = np.asarray(s)
    psi = wtd_laplace(wtd, s)
    eps = jumps.epsilon
    mean = wtd.mean_wait
    m = jumps.m1() ** 2 / jumps.m2()
    memory_part = (1.0 + eps * psi) / (1.0 - eps * psi)
    burst_part = (1.0 + psi) / (1.0 - psi) - 2.0 / (mean * s)
    return (1.0 - m) * memory_part + m * burst_part


def nvaf_continuous_transform(jumps: JumpModel, wtd: WaitingTimeModel) -> LaplaceFunction:
    """Transform of the continuous nVAF part, ready for inversion.

    The delta weight is carried symbolically (it is the s -> infinity
    constant of the full expression, exactly 1 after normalization).
    """

    def fn(s):
        return vaf_laplace(jumps, wtd, s) - 1.0

    # slowest pole: the relaxation rates all lie at Re(s) < 0
    return LaplaceFunction(fn=fn, abscissa=0.0)


# ---------------------------------------------------------------------------
# Numerical inversion
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _stehfest_weights(order: int) -> tuple[float, ...]:
    """Salzer summation weights, computed exactly then cast to float."""
    if order < 2 or order % 2 != 0:
        raise ValidationError(f"Gaver-Stehfest order must be even and >= 2, got {order}")
    half = order // 2
    weights = []
    for k in range(1, order + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            num = Fraction(j**half) * Fraction(math.factorial(2 * j))
            den = (
                math.factorial(half - j)
                * math.factorial(j)
                * math.factorial(j - 1)
                * math.factorial(k - j)
                * math.factorial(2 * j - k)
            )
            acc += num / den
        sign = -1 if (k + half) % 2 else 1
        weights.append(float(sign * acc))
    return tuple(weights)


def _as_transform(f) -> LaplaceFunction:
    if isinstance(f, LaplaceFunction):
        return f
    return LaplaceFunction(fn=f, abscissa=0.0)


def _stehfest_point(f: LaplaceFunction, t: float, order: int, shift: float) -> float:
    weights = np.array(_stehfest_weights(order))
    ln2_t = math.log(2.0) / t
    s = np.arange(1, order + 1) * ln2_t + shift
    vals = np.asarray(f(s), dtype=float)
    terms = weights * vals
    result = ln2_t * terms.sum()
    if not np.all(np.isfinite(terms)):
        raise MethodFailureError(
            "Gaver-Stehfest terms are not finite; try method='talbot'"
        )
    # The alternating sum always cancels, but a cancellation ratio this
    # extreme means every significant digit is gone (oscillatory or
    # otherwise unsuitable transform).  Benign transforms stay below
    # ~1e12 even where the inverted value is tiny.
    gross = ln2_t * np.abs(terms).sum()
    if gross > 1e15 * max(abs(result), 1e-300):
        raise MethodFailureError(
            "Gaver-Stehfest sum cancels catastrophically (term blow-up); "
            "try method='talbot'"
        )
    if shift:
        result *= math.exp(shift * t)
    return result


def _talbot_point(f: LaplaceFunction, t: float, n_nodes: int, shift: float) -> float:
    """Fixed Talbot rule: contour s = r*theta*(cot(theta) + i), r = 2M/(5t)."""
    m_nodes = n_nodes
    r = 2.0 * m_nodes / (5.0 * t)
    theta = np.pi * np.arange(1, m_nodes) / m_nodes
    cot = 1.0 / np.tan(theta)
    s = r * theta * (cot + 1j)
    sigma = theta + (theta * cot - 1.0) * cot
    vals = np.asarray(f(s + shift), dtype=complex)
    total = 0.5 * math.exp(r * t) * complex(f(np.asarray(r + shift)))
    total += np.sum(np.exp(t * s) * vals * (1.0 + 1j * sigma)).real
    result = (r / m_nodes) * (total.real if isinstance(total, complex) else total)
    if not math.isfinite(result):
        raise MethodFailureError("Talbot inversion produced a non-finite value")
    if shift:
        result *= math.exp(shift * t)
    return result


def invert_laplace(
    f,
    t_grid,
    method: str = "talbot",
    *,
    order: int = 14,
    n_nodes: int = 32,
    return_error: bool = False,
):
    """Invert a Laplace transform on a grid of positive times.

    method='stehfest' uses Gaver-Stehfest with Salzer weights (real
    nodes; ``order`` even, default 14, about the double-precision sweet
    spot).  method='talbot' uses the fixed Talbot contour with
    ``n_nodes`` nodes (default 32).  With ``return_error`` a per-point
    error estimate is attached, obtained by re-running the method at a
    lower order and taking the difference.
    """
    f = _as_transform(f)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(t <= 0.0) or not np.all(np.isfinite(t)):
        raise ValidationError("inversion times must be finite and > 0")
    shift = max(0.0, f.abscissa)

    if method == "stehfest":
        if order < 4 or order % 2:
            raise ValidationError(f"order must be even and >= 4, got {order}")
        main = np.array([_stehfest_point(f, ti, order, shift) for ti in t])
        if return_error:
            low = np.array([_stehfest_point(f, ti, order - 2, shift) for ti in t])
            err = np.abs(main - low)
    elif method == "talbot":
        if n_nodes < 12:
            raise ValidationError(f"n_nodes must be >= 12, got {n_nodes}")
        main = np.array([_talbot_point(f, ti, n_nodes, shift) for ti in t])
        if return_error:
            low = np.array([_talbot_point(f, ti, n_nodes - 8, shift) for ti in t])
            err = np.abs(main - low)
    else:
        raise ValidationError(f"unknown inversion method {method!r}")

    scalar = np.ndim(t_grid) == 0
    if scalar:
        main = main[0]
        if return_error:
            err = err[0]
    return (main, err) if return_error else main
