"""Empirical pipeline: tick data in, fitted model parameters out.

Ingests tick CSVs (one section per trading session), extracts waits and
absolute price changes, fits the two-exponential waiting-time density
and the intraday activity profile, and estimates the magnitude moments
and the copy probability.  The fitted parameters slot directly into the
closed-form curves and the simulator.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .errors import EstimationError, ParseError, ValidationError
from .models import (
    DoubleExponentialWaits,
    EventSeries,
    SeasonalityModel,
)

__all__ = [
    "BinSpec",
    "WtdFit",
    "JumpStats",
    "SeasonalityFit",
    "FittedModel",
    "ingest_ticks",
    "write_ticks",
    "fit_wtd",
    "estimate_jump_stats",
    "fit_seasonality",
    "lag_autocorrelation",
    "pooled_mean_wait",
    "fit_model",
    "model_to_json",
    "model_from_json",
]

TICKS_VERSION = "dctrw-ticks/1"
MODEL_VERSION = "dctrw-fitted-model/1"

# practical identifiability threshold for flagging a collapsed mixture
DEGENERATE_FIT_TOL = 1e-2


# ---------------------------------------------------------------------------
# Tick CSV format
# ---------------------------------------------------------------------------
#
# Plain UTF-8 CSV.  Comment lines start with '#'.  Each session opens
# with a 'time,price' header row; repeating the header starts a new
# session.  Timestamps are seconds since session open, nondecreasing
# within a session; prices are positive decimals.  An optional
# '# horizon=<seconds>' comment pins the observation window of the
# current session (default: last tick time).


def _zero_filtered(times, prices, keep_zeros):
    """Event times and magnitudes from one session's raw ticks."""
    if len(times) < 2:
        return np.empty(0), np.empty(0)
    t = np.asarray(times)
    p = np.asarray(prices)
    jumps = np.abs(np.diff(p))
    ev_t = t[1:]
    if not keep_zeros:
        m = jumps > 0.0
        ev_t, jumps = ev_t[m], jumps[m]
    # ticks sharing a timestamp collapse into one event carrying the
    # total absolute change at that instant
    if ev_t.size > 1:
        new_group = np.concatenate(([True], np.diff(ev_t) > 0.0))
        if not new_group.all():
            idx = np.cumsum(new_group) - 1
            ev_t = ev_t[new_group]
            jumps = np.bincount(idx, weights=jumps)
    return ev_t, jumps


def ingest_ticks(source, *, keep_zeros: bool = False) -> list[EventSeries]:
    """Parse a tick CSV into one EventSeries per session.

    Zero-magnitude transactions are dropped by default (their waits
    merge into the following wait); ``keep_zeros`` retains them as
    zero-jump events.
    """
    if hasattr(source, "read"):
        text, name = source.read(), getattr(source, "name", "<stream>")
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read tick file: {exc}", source=str(path)) from exc
        name = str(path)

    sessions: list[EventSeries] = []
    times: list[float] = []
    prices: list[float] = []
    horizon: float | None = None
    open_line = 0

    def close_session():
        if not times and horizon is None:
            return
        ev_t, jumps = _zero_filtered(times, prices, keep_zeros)
        h = horizon if horizon is not None else (times[-1] if times else 0.0)
        if h <= 0.0:
            raise ParseError(
                "session has no positive horizon", source=name, line=open_line
            )
        if ev_t.size and ev_t[-1] > h:
            raise ParseError(
                f"tick at t={ev_t[-1]} exceeds declared horizon {h}",
                source=name,
                line=open_line,
            )
        try:
            sessions.append(EventSeries(times=ev_t, jumps=jumps, horizon=float(h)))
        except ValidationError as exc:
            raise ParseError(str(exc), source=name, line=open_line) from exc

    in_session = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("horizon"):
                _, _, val = body.partition("=")
                try:
                    horizon = float(val)
                except ValueError:
                    raise ParseError(
                        f"bad horizon comment {body!r}", source=name, line=lineno
                    ) from None
            continue
        if line.replace(" ", "") == "time,price":
            if in_session:
                close_session()
            times, prices, horizon = [], [], None
            in_session = True
            open_line = lineno
            continue
        if not in_session:
            raise ParseError(
                "data before 'time,price' header", source=name, line=lineno
            )
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'time,price', got {line!r}", source=name, line=lineno)
        try:
            t, p = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", source=name, line=lineno) from None
        if p <= 0.0:
            raise ParseError(f"non-positive price {p}", source=name, line=lineno)
        if times and t < times[-1]:
            raise ParseError(
                f"timestamp {t} decreases (previous {times[-1]})",
                source=name,
                line=lineno,
            )
        times.append(t)
        prices.append(p)
    if in_session:
        close_session()
    if not sessions:
        raise ParseError("no sessions found", source=name)
    return sessions


def write_ticks(target, sessions, *, base_price: float = 128.0) -> None:
    """Serialize event series as a tick CSV readable by ingest_ticks.

    Each session opens at ``base_price``; prices accumulate the jump
    magnitudes.  Floats are written with shortest round-trip repr, so
    re-ingesting recovers timestamps exactly and magnitudes to within
    accumulated rounding (exactly, for dyadic magnitudes).
    """
    if isinstance(sessions, EventSeries):
        sessions = [sessions]
    if base_price <= 0.0:
        raise ValidationError("base_price must be positive")

    def emit(f):
        f.write(f"# version {TICKS_VERSION}\n")
        for s in sessions:
            f.write("time,price\n")
            f.write(f"# horizon={float(s.horizon)!r}\n")
            f.write(f"0.0,{float(base_price)!r}\n")
            prices = base_price + np.cumsum(s.jumps)
            for t, p in zip(s.times.tolist(), prices.tolist()):
                f.write(f"{t!r},{p!r}\n")

    if hasattr(target, "write"):
        emit(target)
    else:
        with open(target, "w", encoding="utf-8") as f:
            emit(f)


# ---------------------------------------------------------------------------
# Waiting-time density fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinSpec:
    """Histogram layout for the waiting-time fit (logarithmic bins).

    Default range trims the extreme quantiles: edge bins would hold a
    handful of events and their noise overwhelms an unweighted fit.
    """

    n_bins: int = 60
    lo: float | None = None  # default: 0.1% quantile
    hi: float | None = None  # default: 99.99% quantile

    def edges(self, waits: np.ndarray) -> np.ndarray:
        if self.n_bins < 4:
            raise ValidationError("need at least 4 bins")
        lo = self.lo if self.lo is not None else float(np.quantile(waits, 1e-3))
        hi = self.hi if self.hi is not None else float(np.quantile(waits, 1.0 - 1e-4))
        if not 0.0 < lo < hi:
            raise ValidationError(f"bad bin range [{lo}, {hi}]")
        return np.geomspace(lo, hi, self.n_bins + 1)


@dataclass(frozen=True)
class WtdFit:
    wtd: DoubleExponentialWaits
    residual_norm: float
    n_waits: int
    bin_edges: np.ndarray
    degenerate: bool


def _mixture_bin_density(edges, tau1, tau2, weight):
    """Model density averaged over each bin via exact CDF differences."""
    cdf = weight * (-np.expm1(-edges / tau1)) + (1.0 - weight) * (
        -np.expm1(-edges / tau2)
    )
    return np.diff(cdf) / np.diff(edges)


def fit_wtd(waits, bin_spec: BinSpec | None = None, *, log_space: bool = False) -> WtdFit:
    """Least-squares fit of the two-exponential density to a wait histogram.

    Histogram uses logarithmic bins (the two scales typically sit a
    decade apart); the model prediction per bin is the exact bin-average
    density, so narrow bins are not required.  ``log_space`` switches
    the residuals to log-density.  Multistart local optimization;
    component order is normalized to tau1 < tau2.
    """
    w_arr = np.asarray(waits, dtype=float).ravel()
    w_arr = w_arr[w_arr > 0.0]
    if w_arr.size < 1000:
        raise EstimationError(f"need >= 1000 positive waits, got {w_arr.size}")
    spec = bin_spec if bin_spec is not None else BinSpec()
    edges = spec.edges(w_arr)
    counts, _ = np.histogram(w_arr, edges)
    widths = np.diff(edges)
    inside = int(counts.sum())
    density = counts / (inside * widths)
    occupied = counts > 0

    if log_space:
        target = np.where(occupied, np.log(np.maximum(density, 1e-300)), 0.0)

        def residuals(x):
            model = _mixture_bin_density(edges, *x)
            r = np.log(np.maximum(model, 1e-300)) - target
            return np.where(occupied, r, 0.0)

    else:
        # density residuals scaled by the per-bin sampling noise; the
        # unweighted objective leaves the tail scale nearly free
        sigma = np.sqrt(np.maximum(counts, 1.0)) / (inside * widths)

        def residuals(x):
            return (_mixture_bin_density(edges, *x) - density) / sigma

    mean = float(w_arr.mean())
    q10, q90 = np.quantile(w_arr, [0.1, 0.9])
    starts = [
        (0.3 * mean, 3.0 * mean, 0.5),
        (max(q10, 1e-3 * mean), max(q90, 2.0 * mean), 0.5),
        (0.1 * mean, 2.0 * mean, 0.7),
        (0.8 * mean, 1.25 * mean, 0.5),
        (0.05 * mean, 5.0 * mean, 0.3),
    ]
    lo_b = max(1e-6 * mean, 1e-12)
    bounds = ([lo_b, lo_b, 0.0], [np.inf, np.inf, 1.0])
    best = None
    for x0 in starts:
        try:
            res = least_squares(residuals, x0, bounds=bounds, method="trf")
        except Exception:
            continue
        if res.success and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise EstimationError(
            f"waiting-time fit failed to converge from {len(starts)} starts"
        )
    tau1, tau2, weight = (float(v) for v in best.x)
    if tau1 > tau2:
        tau1, tau2, weight = tau2, tau1, 1.0 - weight
    weight = min(max(weight, 0.0), 1.0)
    wtd = DoubleExponentialWaits(tau1=tau1, tau2=tau2, weight=weight)
    return WtdFit(
        wtd=wtd,
        residual_norm=float(math.sqrt(2.0 * best.cost)),
        n_waits=int(w_arr.size),
        bin_edges=edges,
        degenerate=wtd.is_degenerate(rel_tol=DEGENERATE_FIT_TOL),
    )


# ---------------------------------------------------------------------------
# Magnitude statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpStats:
    m1: float
    m2: float
    m_ratio: float
    epsilon: float
    degenerate: bool

    @property
    def m(self) -> float:  # alias used in reports
        return self.m_ratio


def estimate_jump_stats(jumps) -> JumpStats:
    """Sample magnitude moments and the lag-1 copy probability.

    epsilon is the Pearson correlation of consecutive magnitudes,
    clamped to [0, 1 - 1e-6).  Constant magnitudes have no defined
    autocorrelation: they return the degenerate flag with M = 1.
    """
    x = np.asarray(jumps, dtype=float).ravel()
    if x.size < 2:
        raise EstimationError(f"need >= 2 jumps, got {x.size}")
    if np.any(x < 0.0):
        raise ValidationError("magnitudes must be nonnegative")
    m1 = float(x.mean())
    m2 = float(np.mean(x * x))
    if m2 == 0.0:
        raise EstimationError("all magnitudes are zero")
    if np.ptp(x) == 0.0:
        return JumpStats(m1=m1, m2=m2, m_ratio=1.0, epsilon=0.0, degenerate=True)
    eps = float(np.corrcoef(x[:-1], x[1:])[0, 1])
    if not np.isfinite(eps):
        return JumpStats(m1=m1, m2=m2, m_ratio=min(m1 * m1 / m2, 1.0), epsilon=0.0, degenerate=True)
    eps = min(max(eps, 0.0), 1.0 - 1e-6)
    return JumpStats(
        m1=m1, m2=m2, m_ratio=min(m1 * m1 / m2, 1.0), epsilon=eps, degenerate=False
    )


def lag_autocorrelation(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at event-step lags 1..max_lag.

    Biased normalization with the global mean (every lag shares the
    lag-0 denominator), the standard stationary-sequence diagnostic.
    """
    x = np.asarray(series, dtype=float).ravel()
    if max_lag < 1:
        raise ValidationError("max_lag must be >= 1")
    if x.size <= max_lag:
        raise EstimationError(f"need > {max_lag} points, got {x.size}")
    c = x - x.mean()
    denom = float(np.dot(c, c))
    if denom == 0.0:
        raise EstimationError("zero variance: autocorrelation undefined")
    return np.array(
        [float(np.dot(c[:-k], c[k:])) / denom for k in range(1, max_lag + 1)]
    )


def pooled_mean_wait(sessions) -> float:
    """Mean intertrade wait pooled over sessions (first waits excluded)."""
    if isinstance(sessions, EventSeries):
        sessions = [sessions]
    n_gaps = sum(max(len(s) - 1, 0) for s in sessions)
    if n_gaps == 0:
        raise EstimationError("no within-session waits available")
    total = sum(float(s.times[-1] - s.times[0]) for s in sessions if len(s) > 1)
    if total <= 0.0:
        raise EstimationError("degenerate timestamps: zero mean wait")
    return total / n_gaps


# ---------------------------------------------------------------------------
# Seasonality fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeasonalityFit:
    season: SeasonalityModel
    residual_norm: float
    bucket_centers: np.ndarray
    bucket_means: np.ndarray
    flat: bool


# beyond this width-to-day ratio the profile varies by < ~1% intraday
FLAT_WIDTH_FACTOR = 5.0


def fit_seasonality(sessions, day_length: float, n_buckets: int = 48) -> SeasonalityFit:
    """Fit the rational intraday profile to bucketed mean waits.

    Waits are bucketed by the time of day at which they start (first
    wait of each session excluded); empty buckets are merged into their
    neighbors by using the occupied buckets' own mean epochs.  The fit
    runs over (peak wait, peak position, width); a width much larger
    than the day flags a flat profile.
    """
    if isinstance(sessions, EventSeries):
        sessions = [sessions]
    if day_length <= 0.0:
        raise ValidationError("day_length must be positive")
    if n_buckets < 3:
        raise ValidationError("need n_buckets >= 3")
    starts_l, waits_l = [], []
    for s in sessions:
        if len(s) > 1:
            starts_l.append(np.mod(s.times[:-1], day_length))
            waits_l.append(np.diff(s.times))
    if not starts_l:
        raise EstimationError("no within-session waits to bucket")
    starts = np.concatenate(starts_l)
    waits = np.concatenate(waits_l)

    idx = np.minimum(
        (starts / day_length * n_buckets).astype(np.int64), n_buckets - 1
    )
    count = np.bincount(idx, minlength=n_buckets)
    occupied = count > 0
    if occupied.sum() < 3:
        raise EstimationError("fewer than 3 occupied intraday buckets")
    wsum = np.bincount(idx, weights=waits, minlength=n_buckets)
    tsum = np.bincount(idx, weights=starts, minlength=n_buckets)
    means = wsum[occupied] / count[occupied]
    centers = tsum[occupied] / count[occupied]

    t_day = day_length
    s_max = FLAT_WIDTH_FACTOR * FLAT_WIDTH_FACTOR * t_day  # generous headroom

    def residuals(x):
        peak, p, s = x
        return peak * s * s / ((centers - p) ** 2 + s * s) - means

    peak0 = float(means.max())
    p0 = float(centers[np.argmax(means)])
    starts0 = [
        (peak0, p0, 0.25 * t_day),
        (peak0, 0.5 * t_day, 0.5 * t_day),
        (float(means.mean()), p0, 2.0 * t_day),
    ]
    bounds = ([1e-300, 0.0, 1e-6 * t_day], [np.inf, t_day, s_max])
    best = None
    for x0 in starts0:
        try:
            res = least_squares(residuals, x0, bounds=bounds, method="trf")
        except Exception:
            continue
        if res.success and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise EstimationError("seasonality fit failed to converge")
    peak, p_hat, s_hat = (float(v) for v in best.x)
    q_hat = s_hat * s_hat
    a_hat = 1.0 / (peak * q_hat)
    season = SeasonalityModel(
        p=p_hat, q=q_hat, day_length=t_day, normalization=a_hat
    )
    return SeasonalityFit(
        season=season,
        residual_norm=float(math.sqrt(2.0 * best.cost)),
        bucket_centers=centers,
        bucket_means=means,
        flat=s_hat >= FLAT_WIDTH_FACTOR * t_day,
    )


# ---------------------------------------------------------------------------
# Full pipeline and the fitted-model document
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FittedModel:
    wtd: DoubleExponentialWaits
    epsilon: float
    m1: float
    m2: float
    m_ratio: float
    mean_wait: float
    seasonality: SeasonalityModel | None = None
    diagnostics: dict = field(default_factory=dict)


def fit_model(
    sessions,
    *,
    day_length: float | None = None,
    n_buckets: int = 48,
    bin_spec: BinSpec | None = None,
    log_space: bool = False,
) -> FittedModel:
    """Run the full estimation pipeline over ingested sessions.

    Fits the waiting-time density to pooled within-session waits,
    estimates magnitude moments and the copy probability from the
    concatenated magnitude sequence, and, when ``day_length`` is given,
    fits the intraday profile as well.
    """
    if isinstance(sessions, EventSeries):
        sessions = [sessions]
    if not sessions:
        raise EstimationError("no sessions supplied")
    waits = np.concatenate(
        [np.diff(s.times) for s in sessions if len(s) > 1] or [np.empty(0)]
    )
    if waits.size == 0:
        raise EstimationError("no within-session waits available")
    jumps = np.concatenate([s.jumps for s in sessions])

    wtd_fit = fit_wtd(waits, bin_spec, log_space=log_space)
    stats = estimate_jump_stats(jumps)
    mean_wait = pooled_mean_wait(sessions)
    diagnostics = {
        "n_sessions": len(sessions),
        "n_events": int(sum(len(s) for s in sessions)),
        "wtd_residual_norm": wtd_fit.residual_norm,
        "wtd_n_bins": int(wtd_fit.bin_edges.size - 1),
        "wtd_bin_lo": float(wtd_fit.bin_edges[0]),
        "wtd_bin_hi": float(wtd_fit.bin_edges[-1]),
        "wtd_degenerate": wtd_fit.degenerate,
        "jumps_degenerate": stats.degenerate,
    }
    season = None
    if day_length is not None:
        sfit = fit_seasonality(sessions, day_length, n_buckets)
        season = sfit.season
        diagnostics["seasonality_residual_norm"] = sfit.residual_norm
        diagnostics["seasonality_flat"] = sfit.flat
    return FittedModel(
        wtd=wtd_fit.wtd,
        epsilon=stats.epsilon,
        m1=stats.m1,
        m2=stats.m2,
        m_ratio=stats.m_ratio,
        mean_wait=mean_wait,
        seasonality=season,
        diagnostics=diagnostics,
    )


def model_to_json(model: FittedModel) -> str:
    doc = {
        "version": MODEL_VERSION,
        "wtd": {
            "tau1": model.wtd.tau1,
            "tau2": model.wtd.tau2,
            "weight": model.wtd.weight,
        },
        "epsilon": model.epsilon,
        "m1": model.m1,
        "m2": model.m2,
        "m_ratio": model.m_ratio,
        "mean_wait": model.mean_wait,
        "seasonality": None
        if model.seasonality is None
        else {
            "p": model.seasonality.p,
            "q": model.seasonality.q,
            "day_length": model.seasonality.day_length,
            "normalization": model.seasonality.normalization,
        },
        "diagnostics": model.diagnostics,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def model_from_json(text: str) -> FittedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad model JSON: {exc}") from exc
    if not isinstance(doc, dict) or "wtd" not in doc:
        raise ParseError("model JSON missing 'wtd' section")
    version = doc.get("version", MODEL_VERSION)
    if not str(version).startswith("dctrw-fitted-model/"):
        raise ParseError(f"unrecognized model version {version!r}")
    try:
        wtd = DoubleExponentialWaits(
            tau1=doc["wtd"]["tau1"],
            tau2=doc["wtd"]["tau2"],
            weight=doc["wtd"]["weight"],
        )
        season = None
        if doc.get("seasonality") is not None:
            s = doc["seasonality"]
            season = SeasonalityModel(
                p=s["p"],
                q=s["q"],
                day_length=s["day_length"],
                normalization=s["normalization"],
            )
        return FittedModel(
            wtd=wtd,
            epsilon=float(doc["epsilon"]),
            m1=float(doc["m1"]),
            m2=float(doc["m2"]),
            m_ratio=float(doc["m_ratio"]),
            mean_wait=float(doc["mean_wait"]),
            seasonality=season,
            diagnostics=dict(doc.get("diagnostics", {})),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"model JSON missing field: {exc}") from exc
