"""Domain types for the directed CTRW with one-step jump memory.

The walk is a sequence of strictly positive price-change magnitudes
separated by random waiting times.  Magnitudes carry one step of memory:
with probability ``epsilon`` a magnitude is an exact copy of its
predecessor, otherwise it is a fresh draw from the magnitude
distribution.  Waiting times are exponential or a two-component
exponential mixture; an optional intraday seasonality profile rescales
them by time of day.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# Copy probabilities this close to 1 make relaxation times diverge and
# break the estimator's own clamping convention, so reject them up front.
MAX_EPSILON = 1.0 - 1e-6

# Relative spread below which a two-component waiting-time mixture is
# treated as a plain exponential (component scales indistinguishable, or
# all mass on one component).
DEGENERATE_REL_TOL = 1e-12


def _require_finite_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(f"{name} must be finite and > 0, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Waiting-time models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialWaits:
    """Exponential waiting times with density exp(-t/mean)/mean."""

    mean: float

    def __post_init__(self):
        _require_finite_positive("mean", self.mean)

    @property
    def mean_wait(self) -> float:
        return self.mean

    def moment(self, k: int) -> float:
        """k-th raw moment, k! * mean**k."""
        return math.factorial(k) * self.mean**k

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0.0, 0.0, np.exp(-t / self.mean) / self.mean)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0.0, 0.0, -np.expm1(-t / self.mean))

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0.0, 1.0, np.exp(-t / self.mean))


@dataclass(frozen=True)
class DoubleExponentialWaits:
    """Mixture of two exponentials.

    ``weight`` is the probability mass on the ``tau1`` component, so the
    density is  weight/tau1 * exp(-t/tau1) + (1-weight)/tau2 * exp(-t/tau2)
    and the mean wait is  weight*tau1 + (1-weight)*tau2.
    """

    tau1: float
    tau2: float
    weight: float

    def __post_init__(self):
        _require_finite_positive("tau1", self.tau1)
        _require_finite_positive("tau2", self.tau2)
        w = float(self.weight)
        if not math.isfinite(w) or not 0.0 <= w <= 1.0:
            raise ValidationError(f"weight must lie in [0, 1], got {w!r}")

    @property
    def mean_wait(self) -> float:
        return self.weight * self.tau1 + (1.0 - self.weight) * self.tau2

    def moment(self, k: int) -> float:
        fk = math.factorial(k)
        return fk * (self.weight * self.tau1**k + (1.0 - self.weight) * self.tau2**k)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        w = self.weight
        val = w / self.tau1 * np.exp(-t / self.tau1) + (1.0 - w) / self.tau2 * np.exp(
            -t / self.tau2
        )
        return np.where(t < 0.0, 0.0, val)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        w = self.weight
        val = -w * np.expm1(-t / self.tau1) - (1.0 - w) * np.expm1(-t / self.tau2)
        return np.where(t < 0.0, 0.0, val)

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        w = self.weight
        val = w * np.exp(-t / self.tau1) + (1.0 - w) * np.exp(-t / self.tau2)
        return np.where(t < 0.0, 1.0, val)

    def is_degenerate(self, rel_tol: float = DEGENERATE_REL_TOL) -> bool:
        """True when the mixture collapses to a single exponential."""
        scale = max(self.tau1, self.tau2)
        if abs(self.tau1 - self.tau2) <= rel_tol * scale:
            return True
        return self.weight <= rel_tol or self.weight >= 1.0 - rel_tol

    def collapse(self) -> ExponentialWaits:
        """Equivalent single exponential for a degenerate mixture."""
        if not self.is_degenerate():
            raise ValidationError("mixture is not degenerate; nothing to collapse")
        if self.weight <= DEGENERATE_REL_TOL:
            return ExponentialWaits(self.tau2)
        if self.weight >= 1.0 - DEGENERATE_REL_TOL:
            return ExponentialWaits(self.tau1)
        return ExponentialWaits(self.mean_wait)


WaitingTimeModel = ExponentialWaits | DoubleExponentialWaits


# ---------------------------------------------------------------------------
# Jump magnitude distributions and the one-step memory wrapper
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegenerateJumps:
    """Every magnitude equals r0."""

    r0: float

    def __post_init__(self):
        _require_finite_positive("r0", self.r0)

    def m1(self) -> float:
        return self.r0

    def m2(self) -> float:
        return self.r0**2


@dataclass(frozen=True)
class ExponentialJumps:
    """Exponentially distributed magnitudes with the given mean."""

    mean: float

    def __post_init__(self):
        _require_finite_positive("mean", self.mean)

    def m1(self) -> float:
        return self.mean

    def m2(self) -> float:
        return 2.0 * self.mean**2


@dataclass(frozen=True)
class EmpiricalJumps:
    """Finite discrete magnitude distribution (values with probabilities)."""

    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        if values.size == 0:
            raise ValidationError("empirical magnitude table is empty")
        if values.shape != probs.shape or values.ndim != 1:
            raise ValidationError("values and probabilities must be equal-length 1-d arrays")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise ValidationError("empirical magnitudes must be finite and > 0")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
            raise ValidationError("probabilities must be finite and >= 0")
        total = probs.sum()
        if not math.isclose(total, 1.0, rel_tol=1e-9, abs_tol=1e-12):
            raise ValidationError(f"probabilities must sum to 1, got {total!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probabilities", probs / total)

    def m1(self) -> float:
        return float(np.dot(self.probabilities, self.values))

    def m2(self) -> float:
        return float(np.dot(self.probabilities, self.values**2))


MagnitudeDistribution = DegenerateJumps | ExponentialJumps | EmpiricalJumps


@dataclass(frozen=True)
class JumpModel:
    """Magnitude distribution plus the one-step copy probability."""

    magnitudes: MagnitudeDistribution
    epsilon: float = 0.0

    def __post_init__(self):
        eps = float(self.epsilon)
        if not math.isfinite(eps) or eps < 0.0 or eps > MAX_EPSILON:
            raise ValidationError(
                f"epsilon must lie in [0, {MAX_EPSILON}], got {eps!r}"
            )

    def m1(self) -> float:
        return self.magnitudes.m1()

    def m2(self) -> float:
        return self.magnitudes.m2()


# ---------------------------------------------------------------------------
# Seasonality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeasonalityModel:
    """Intraday mean-wait profile theta(t) = 1 / (a * ((t - p)^2 + q)).

    ``p`` is the time of day (seconds from open) where waits are longest,
    ``q`` sets how sharply activity recovers away from ``p``, and
    ``normalization`` is the prefactor ``a``.  ``day_length`` is the
    session length in the same time unit.
    """

    p: float
    q: float
    day_length: float
    normalization: float

    def __post_init__(self):
        _require_finite_positive("q", self.q)
        _require_finite_positive("day_length", self.day_length)
        _require_finite_positive("normalization", self.normalization)
        p = float(self.p)
        if not math.isfinite(p) or not 0.0 <= p <= self.day_length:
            raise ValidationError(
                f"p must lie in [0, day_length={self.day_length}], got {p!r}"
            )

    def theta(self, t):
        """Local mean wait at time-of-day t (t is wrapped into the day)."""
        t = np.mod(np.asarray(t, dtype=float), self.day_length)
        return 1.0 / (self.normalization * ((t - self.p) ** 2 + self.q))

    def day_average_theta(self) -> float:
        """Exact arithmetic day-average of theta."""
        rq = math.sqrt(self.q)
        integral = (
            math.atan((self.day_length - self.p) / rq) + math.atan(self.p / rq)
        ) / rq
        return integral / (self.normalization * self.day_length)


def seasonal_normalization(p: float, q: float, day_length: float, mean_wait: float) -> float:
    """Normalization ``a`` making the day-average of theta equal mean_wait."""
    _require_finite_positive("q", q)
    _require_finite_positive("day_length", day_length)
    _require_finite_positive("mean_wait", mean_wait)
    rq = math.sqrt(q)
    integral = (math.atan((day_length - p) / rq) + math.atan(p / rq)) / rq
    return integral / (day_length * mean_wait)


# ---------------------------------------------------------------------------
# Trajectories and curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventSeries:
    """One session of timestamped jumps on (0, horizon].

    ``times`` are strictly increasing event epochs, ``jumps`` the
    magnitudes.  Magnitudes are nonnegative; the simulator always
    produces strictly positive ones, but the tick-file reader's
    keep-zeros policy may legitimately retain zero-change events.
    """

    times: np.ndarray
    jumps: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=float)
        jumps = np.ascontiguousarray(self.jumps, dtype=float)
        if times.ndim != 1 or jumps.ndim != 1 or times.shape != jumps.shape:
            raise ValidationError("times and jumps must be equal-length 1-d arrays")
        horizon = float(self.horizon)
        if not math.isfinite(horizon) or horizon <= 0.0:
            raise ValidationError(f"horizon must be finite and > 0, got {horizon!r}")
        if times.size:
            if not np.all(np.isfinite(times)) or not np.all(np.isfinite(jumps)):
                raise ValidationError("times and jumps must be finite")
            if times[0] <= 0.0 or np.any(np.diff(times) <= 0.0):
                raise ValidationError("times must be strictly increasing and > 0")
            if times[-1] > horizon:
                raise ValidationError("event times must not exceed the horizon")
            if np.any(jumps < 0.0):
                raise ValidationError("jump magnitudes must be >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "horizon", horizon)

    def __len__(self) -> int:
        return int(self.times.size)

    def position(self, t):
        """Cumulative magnitude X(t) evaluated at the given times."""
        t = np.asarray(t, dtype=float)
        csum = np.concatenate(([0.0], np.cumsum(self.jumps)))
        return csum[np.searchsorted(self.times, t, side="right")]


@dataclass(frozen=True)
class VafCurve:
    """Normalized velocity autocorrelation: unit-delta weight at lag 0
    plus a continuous part sampled on a positive lag grid."""

    delta_weight: float
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if lags.ndim != 1 or lags.shape != values.shape:
            raise ValidationError("lags and values must be equal-length 1-d arrays")
        if lags.size and (lags[0] <= 0.0 or np.any(np.diff(lags) <= 0.0)):
            raise ValidationError("lags must be strictly increasing and > 0")
        if self.stderr is not None:
            stderr = np.asarray(self.stderr, dtype=float)
            if stderr.shape != lags.shape:
                raise ValidationError("stderr must match the lag grid")
            object.__setattr__(self, "stderr", stderr)
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "values", values)


# ---------------------------------------------------------------------------
# Simulation config
# ---------------------------------------------------------------------------


class FirstWaitMode(enum.Enum):
    """How the wait to the first event is drawn.

    EQUILIBRIUM uses the stationary forward-recurrence density
    survival(t)/mean, which makes increments stationary from t = 0;
    ORDINARY draws the first wait from the plain waiting-time density.
    """

    EQUILIBRIUM = "equilibrium"
    ORDINARY = "ordinary"


@dataclass(frozen=True)
class SimConfig:
    wtd: WaitingTimeModel
    jumps: JumpModel
    horizon: float
    seed: int
    seasonality: SeasonalityModel | None = None
    first_wait_mode: FirstWaitMode = FirstWaitMode.EQUILIBRIUM

    def __post_init__(self):
        _require_finite_positive("horizon", self.horizon)
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValidationError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.seasonality is not None:
            T = self.seasonality.day_length
            n_days = self.horizon / T
            if self.horizon > T and abs(n_days - round(n_days)) > 1e-9:
                raise ValidationError(
                    "seasonal horizon must be <= day_length or a whole number of days"
                )
