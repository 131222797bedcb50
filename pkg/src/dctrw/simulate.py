"""Event-driven Monte Carlo for the directed walk.

Trajectories are generated exactly: waits from the waiting-time model
(first wait per the configured mode), magnitudes from the magnitude
distribution with the one-step copy rule.  Everything is driven by a
single integer seed through numpy's SeedSequence, so identical configs
reproduce identical event series bit for bit, and ensemble members get
independently spawned streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import EstimationError, ValidationError
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
    WaitingTimeModel,
)

__all__ = [
    "sample_first_wait",
    "sample_trajectory",
    "sample_trajectory_seasonal",
    "sample_sessions",
    "ensemble_moments",
    "MomentEstimate",
    "empirical_nvaf",
]


# ---------------------------------------------------------------------------
# Elementary draws
# ---------------------------------------------------------------------------


def _psi_waits(wtd: WaitingTimeModel, rng: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(wtd, ExponentialWaits):
        return rng.exponential(wtd.mean, n)
    comp1 = rng.random(n) < wtd.weight
    scale = np.where(comp1, wtd.tau1, wtd.tau2)
    return rng.exponential(1.0, n) * scale


def _first_waits(
    wtd: WaitingTimeModel, mode: FirstWaitMode, rng: np.random.Generator, n: int
) -> np.ndarray:
    if mode is FirstWaitMode.ORDINARY or isinstance(wtd, ExponentialWaits):
        # exponential waits are memoryless: equilibrium first wait == psi
        return _psi_waits(wtd, rng, n)
    # equilibrium start: survival(t)/mean is again a two-exponential
    # mixture, with component masses reweighted by their means
    w_eq = wtd.weight * wtd.tau1 / wtd.mean_wait
    comp1 = rng.random(n) < w_eq
    scale = np.where(comp1, wtd.tau1, wtd.tau2)
    return rng.exponential(1.0, n) * scale


def sample_first_wait(
    wtd: WaitingTimeModel,
    mode: FirstWaitMode = FirstWaitMode.EQUILIBRIUM,
    rng: np.random.Generator | None = None,
    size: int | None = None,
):
    """Draw the wait preceding the first event.

    In EQUILIBRIUM mode the draw follows the stationary forward
    recurrence density survival(t)/mean_wait; in ORDINARY mode the plain
    waiting-time density.
    """
    if rng is None:
        rng = np.random.default_rng()
    n = 1 if size is None else int(size)
    out = _first_waits(wtd, mode, rng, n)
    return float(out[0]) if size is None else out


def _draw_magnitudes(dist, rng: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(dist, DegenerateJumps):
        return np.full(n, dist.r0)
    if isinstance(dist, ExponentialJumps):
        return rng.exponential(dist.mean, n)
    if isinstance(dist, EmpiricalJumps):
        idx = rng.choice(dist.values.size, size=n, p=dist.probabilities)
        return dist.values[idx]
    raise ValidationError(f"unsupported magnitude distribution {type(dist).__name__}")


def _magnitude_chain(jumps: JumpModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Magnitudes with the one-step copy rule.

    Fresh draws are made for every slot; each slot then points at the
    most recent slot that was flagged fresh (copy with prob epsilon),
    which reproduces the chain exactly while staying vectorized.
    """
    if n == 0:
        return np.empty(0)
    fresh_vals = _draw_magnitudes(jumps.magnitudes, rng, n)
    eps = jumps.epsilon
    if eps == 0.0 or n == 1:
        return fresh_vals
    fresh = rng.random(n) >= eps
    fresh[0] = True
    idx = np.where(fresh, np.arange(n), 0)
    np.maximum.accumulate(idx, out=idx)
    return fresh_vals[idx]


# ---------------------------------------------------------------------------
# Stationary trajectories
# ---------------------------------------------------------------------------


def _stationary_times(
    wtd: WaitingTimeModel,
    mode: FirstWaitMode,
    rng: np.random.Generator,
    horizon: float,
) -> np.ndarray:
    first = _first_waits(wtd, mode, rng, 1)[0]
    if first > horizon:
        return np.empty(0)
    mean = wtd.mean_wait
    expect = max(horizon / mean, 1.0)
    block = int(expect + 4.0 * math.sqrt(expect)) + 16
    chunks = [np.array([first])]
    total = first
    while True:
        cum = total + np.cumsum(_psi_waits(wtd, rng, block))
        if cum[-1] > horizon:
            cut = int(np.searchsorted(cum, horizon, side="right"))
            if cut:
                chunks.append(cum[:cut])
            break
        chunks.append(cum)
        total = cum[-1]
        block = max(block // 4, 1024)
    return np.concatenate(chunks) if len(chunks) > 1 else chunks[0]


def _sample_arrays(cfg: SimConfig, rng: np.random.Generator):
    if cfg.seasonality is None:
        times = _stationary_times(cfg.wtd, cfg.first_wait_mode, rng, cfg.horizon)
    else:
        times = _seasonal_times(
            cfg.wtd, cfg.first_wait_mode, cfg.seasonality, rng, cfg.horizon
        )
    mags = _magnitude_chain(cfg.jumps, rng, times.size)
    return times, mags


def sample_trajectory(cfg: SimConfig) -> EventSeries:
    """Generate one trajectory; identical configs give identical output."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    times, mags = _sample_arrays(cfg, rng)
    return EventSeries(times=times, jumps=mags, horizon=cfg.horizon)


def sample_trajectory_seasonal(cfg: SimConfig) -> EventSeries:
    """Seasonal variant of sample_trajectory (config must carry a profile)."""
    if cfg.seasonality is None:
        raise ValidationError("config has no seasonality profile")
    return sample_trajectory(cfg)


def sample_sessions(cfg: SimConfig, n_sessions: int) -> list[EventSeries]:
    """Independent single-horizon sessions with spawned per-session streams."""
    if n_sessions < 1:
        raise ValidationError("n_sessions must be >= 1")
    children = np.random.SeedSequence(cfg.seed).spawn(n_sessions)
    out = []
    for child in children:
        rng = np.random.default_rng(child)
        times, mags = _sample_arrays(cfg, rng)
        out.append(EventSeries(times=times, jumps=mags, horizon=cfg.horizon))
    return out


# ---------------------------------------------------------------------------
# Seasonal trajectories
# ---------------------------------------------------------------------------
#
# Waits are unit-mean draws from the waiting-time shape, rescaled by the
# profile value at the epoch where the wait begins (left-point rule).
# The recurrence t_{n+1} = t_n + u_n * theta(t_n) is inherently serial,
# so it runs in a jitted kernel over pre-drawn unit waits.


@njit(cache=True)
def _seasonal_kernel(times, n, t, units, i, horizon, p, q, a, day_length):
    n_max = times.shape[0]
    n_units = units.shape[0]
    while i < n_units:
        if n >= n_max:
            return n, i, t, False
        tod = t % day_length
        theta = 1.0 / (a * ((tod - p) ** 2 + q))
        t = t + units[i] * theta
        i += 1
        if t > horizon:
            return n, i, t, True
        times[n] = t
        n += 1
    return n, i, t, False


def _unit_waits(wtd: WaitingTimeModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Waits from psi rescaled to unit mean."""
    if isinstance(wtd, ExponentialWaits):
        return rng.exponential(1.0, n)
    comp1 = rng.random(n) < wtd.weight
    scale = np.where(comp1, wtd.tau1, wtd.tau2) / wtd.mean_wait
    return rng.exponential(1.0, n) * scale


def _unit_first_wait(
    wtd: WaitingTimeModel, mode: FirstWaitMode, rng: np.random.Generator
) -> float:
    return float(_first_waits(wtd, mode, rng, 1)[0] / wtd.mean_wait)


def _seasonal_times(
    wtd: WaitingTimeModel,
    mode: FirstWaitMode,
    season: SeasonalityModel,
    rng: np.random.Generator,
    horizon: float,
) -> np.ndarray:
    p, q, a, T = season.p, season.q, season.normalization, season.day_length
    theta0 = 1.0 / (a * (p * p + q))
    first = _unit_first_wait(wtd, mode, rng) * theta0
    if first > horizon:
        return np.empty(0)

    # expected event count: integral of the local rate 1/theta
    x_const = T * T / 3.0 - p * T + p * p + q
    expect = max(a * x_const * horizon, 16.0)
    times = np.empty(int(expect + 4.0 * math.sqrt(expect)) + 64)
    times[0] = first
    n, t = 1, first
    block = times.size
    units = _unit_waits(wtd, rng, block)
    i = 0
    while True:
        n, i, t, done = _seasonal_kernel(times, n, t, units, i, horizon, p, q, a, T)
        if done:
            return times[:n].copy()
        if n >= times.size:
            times = np.concatenate([times, np.empty(times.size // 2 + 64)])
        if i >= units.size:
            units = _unit_waits(wtd, rng, max(block // 4, 1024))
            i = 0


# ---------------------------------------------------------------------------
# Ensemble statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentEstimate:
    """Ensemble moments of the walk on a time grid, with standard errors.

    ``slope`` is the per-trajectory least-squares slope of X(t) through
    the origin, averaged over the ensemble; its stderr comes from the
    trajectory-to-trajectory spread, so it is safe for significance
    tests even though grid points are correlated within a trajectory.
    """

    t_grid: np.ndarray
    m1: np.ndarray
    m1_stderr: np.ndarray
    m2: np.ndarray
    m2_stderr: np.ndarray
    slope: float
    slope_stderr: float
    n_traj: int


def ensemble_moments(cfg: SimConfig, n_traj: int, t_grid) -> MomentEstimate:
    """Monte Carlo m1(t), m2(t) over independent trajectories.

    Standard errors need n_traj >= 2; a single trajectory reports zero
    spread.
    """
    if n_traj < 1:
        raise ValidationError("n_traj must be >= 1")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t < 0.0) or np.any(t > cfg.horizon):
        raise ValidationError("t_grid must lie within [0, horizon]")
    children = np.random.SeedSequence(cfg.seed).spawn(n_traj)
    sum_x = np.zeros(t.size)
    sum_x2 = np.zeros(t.size)
    sum_x4 = np.zeros(t.size)
    slopes = np.empty(n_traj)
    tt = float(np.dot(t, t))
    for j, child in enumerate(children):
        rng = np.random.default_rng(child)
        times, mags = _sample_arrays(cfg, rng)
        csum = np.concatenate(([0.0], np.cumsum(mags)))
        x = csum[np.searchsorted(times, t, side="right")]
        sum_x += x
        sum_x2 += x * x
        sum_x4 += x**4
        slopes[j] = np.dot(x, t) / tt if tt > 0.0 else np.nan
    m1 = sum_x / n_traj
    m2 = sum_x2 / n_traj
    var_x = np.maximum(sum_x2 / n_traj - m1 * m1, 0.0)
    var_x2 = np.maximum(sum_x4 / n_traj - m2 * m2, 0.0)
    slope_stderr = (
        float(np.std(slopes, ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else 0.0
    )
    return MomentEstimate(
        t_grid=t,
        m1=m1,
        m1_stderr=np.sqrt(var_x / n_traj),
        m2=m2,
        m2_stderr=np.sqrt(var_x2 / n_traj),
        slope=float(np.mean(slopes)),
        slope_stderr=slope_stderr,
        n_traj=n_traj,
    )


# ---------------------------------------------------------------------------
# Empirical normalized VAF
# ---------------------------------------------------------------------------


def _pair_histogram(t_cat, r_cat, batch_id, n_batches, bin_width, n_bins):
    """Sum of R_i*R_j over ordered pairs per (batch-of-left-event, lag bin)."""
    max_lag = bin_width * n_bins
    hist = np.zeros(n_batches * n_bins)
    n = t_cat.size
    d = 1
    while d < n:
        dt = t_cat[d:] - t_cat[:-d]
        mask = dt < max_lag
        if not mask.any():
            break
        k = (dt[mask] / bin_width).astype(np.int64)
        np.minimum(k, n_bins - 1, out=k)  # guards the dt == max_lag-epsilon edge
        weights = r_cat[:-d][mask] * r_cat[d:][mask]
        key = batch_id[:-d][mask] * n_bins + k
        hist += np.bincount(key, weights=weights, minlength=hist.size)
        d += 1
    return hist.reshape(n_batches, n_bins)


def empirical_nvaf(
    series: EventSeries | list[EventSeries],
    bin_width: float,
    max_lag: float,
    *,
    n_batches: int = 64,
) -> VafCurve:
    """Estimate the normalized VAF from event data by pair counting.

    For each lag bin [k*w, (k+1)*w), k >= 1, sums R_i*R_j over ordered
    event pairs whose separation falls in the bin, normalizes per unit
    observation time and bin width (edge-corrected), subtracts the
    squared drift, and scales by 2*mean_wait/M2.  The delta weight comes
    from the lag-zero diagonal sum of squares.  Standard errors are
    jackknife-over-batches; with several sessions, whole sessions are
    the batching unit.
    """
    sessions = [series] if isinstance(series, EventSeries) else list(series)
    if not sessions:
        raise EstimationError("no event series supplied")
    if bin_width <= 0.0 or max_lag <= bin_width:
        raise ValidationError("need bin_width > 0 and max_lag > bin_width")
    n_bins = int(round(max_lag / bin_width))
    if abs(n_bins * bin_width - max_lag) > 1e-9 * max_lag:
        raise ValidationError("max_lag must be an integer multiple of bin_width")
    n_total = sum(len(s) for s in sessions)
    if n_total < 2:
        raise EstimationError(f"need at least 2 events, got {n_total}")

    # concatenate sessions with dead gaps so no cross-session pair can
    # land inside the lag window
    offsets = np.cumsum([0.0] + [s.horizon + 2.0 * max_lag for s in sessions[:-1]])
    t_cat = np.concatenate([s.times + off for s, off in zip(sessions, offsets)])
    r_cat = np.concatenate([s.jumps for s in sessions])
    t_obs = float(sum(s.horizon for s in sessions))

    # pooled within-session mean wait
    n_gaps = sum(max(len(s) - 1, 0) for s in sessions)
    if n_gaps == 0:
        raise EstimationError("no within-session waits available")
    gap_total = sum(
        float(s.times[-1] - s.times[0]) for s in sessions if len(s) > 1
    )
    mean_wait = gap_total / n_gaps
    if mean_wait <= 0.0:
        raise EstimationError("degenerate timestamps: zero mean wait")

    m1_hat = float(np.mean(r_cat))
    m2_hat = float(np.mean(r_cat * r_cat))
    if m2_hat == 0.0:
        raise EstimationError("all magnitudes are zero")
    drift = float(r_cat.sum()) / t_obs
    scale = 2.0 * mean_wait / m2_hat

    n_batches = max(2, min(n_batches, max(n_total // 2, 2)))
    if len(sessions) >= 8:
        # whole sessions per batch: exact edge-corrected denominators
        sess_batch = np.arange(len(sessions)) % n_batches
        batch_id = np.concatenate(
            [np.full(len(s), b, dtype=np.int64) for s, b in zip(sessions, sess_batch)]
        )
        horizons = np.array([s.horizon for s in sessions])
        lag_centers = (np.arange(1, n_bins) + 0.5) * bin_width
        # W[b, k] = sum over sessions in batch of max(T_s - lag_k, 0)
        per_lag = np.maximum(horizons[:, None] - lag_centers[None, :], 0.0)
        w_batch = np.zeros((n_batches, lag_centers.size))
        np.add.at(w_batch, sess_batch, per_lag)
        r_sum_b = np.bincount(batch_id, weights=r_cat, minlength=n_batches)
        t_obs_b = np.bincount(sess_batch, weights=horizons, minlength=n_batches)
    else:
        span = t_cat[-1] - t_cat[0] if n_total > 1 else 1.0
        frac = (t_cat - t_cat[0]) / max(span, 1e-300)
        batch_id = np.minimum((frac * n_batches).astype(np.int64), n_batches - 1)
        lag_centers = (np.arange(1, n_bins) + 0.5) * bin_width
        # chunk spans approximate the per-batch observation time; fine
        # as long as chunks are much longer than max_lag
        total_w = np.maximum(t_obs - lag_centers, 0.0)
        w_batch = np.tile(total_w / n_batches, (n_batches, 1))
        r_sum_b = np.bincount(batch_id, weights=r_cat, minlength=n_batches)
        t_obs_b = np.full(n_batches, t_obs / n_batches)

    hist = _pair_histogram(t_cat, r_cat, batch_id, n_batches, bin_width, n_bins)
    hist = hist[:, 1:]  # k >= 1 per the estimator definition

    w_total = w_batch.sum(axis=0)
    s_total = hist.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = scale * (
            np.where(w_total > 0, s_total / (w_total * bin_width), np.nan)
            - drift * drift
        )

    # leave-one-batch-out jackknife
    r_total = float(r_cat.sum())
    est = np.empty((n_batches, lag_centers.size))
    for b in range(n_batches):
        w_rest = w_total - w_batch[b]
        s_rest = s_total - hist[b]
        drift_b = (r_total - r_sum_b[b]) / max(t_obs - t_obs_b[b], 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            est[b] = scale * (
                np.where(w_rest > 0, s_rest / (w_rest * bin_width), np.nan)
                - drift_b * drift_b
            )
    mean_est = np.nanmean(est, axis=0)
    stderr = np.sqrt(
        (n_batches - 1) / n_batches * np.nansum((est - mean_est) ** 2, axis=0)
    )

    delta_weight = mean_wait / m2_hat * float(np.dot(r_cat, r_cat)) / t_obs
    return VafCurve(
        delta_weight=delta_weight, lags=lag_centers, values=values, stderr=stderr
    )
