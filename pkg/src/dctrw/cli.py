"""Batch command line interface.

Four subcommands cover the pipeline: ``simulate`` writes synthetic tick
data, ``analyze`` fits model parameters and the empirical curve,
``curves`` evaluates the closed-form curves (optionally with a
numerical-inversion cross-check column), and ``compare`` scores an
empirical curve against a theory curve.  Every run emits a manifest
recording the resolved configuration, seed, input digests, and output
paths; ``--from-manifest`` replays a manifest byte for byte.

Exit codes: 0 success, 2 validation or estimation failure, 3 parse
failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .closed_forms import (
    nvaf_double_exponential,
    nvaf_exponential,
    nvaf_seasonal,
)
from .errors import (
    DctrwError,
    EstimationError,
    NumericError,
    ParseError,
    ValidationError,
)
from .estimate import (
    BinSpec,
    fit_model,
    ingest_ticks,
    model_from_json,
    model_to_json,
    write_ticks,
)
from .laplace import invert_laplace, nvaf_continuous_transform
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
    seasonal_normalization,
)
from .simulate import empirical_nvaf, sample_sessions

MANIFEST_VERSION = "dctrw-manifest/1"
CURVES_VERSION = "dctrw-curves/1"
VAF_VERSION = "dctrw-vaf/1"
REPORT_VERSION = "dctrw-report/1"


# ---------------------------------------------------------------------------
# Spec-string parsing
# ---------------------------------------------------------------------------


def parse_wtd_spec(spec: str):
    """'exp:MEAN' or 'dexp:TAU1,TAU2,W'."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "exp":
            return ExponentialWaits(mean=float(rest))
        if kind == "dexp":
            tau1, tau2, w = (float(v) for v in rest.split(","))
            return DoubleExponentialWaits(tau1=tau1, tau2=tau2, weight=w)
    except (ValueError, TypeError):
        raise ValidationError(f"bad waiting-time spec {spec!r}") from None
    raise ValidationError(f"unknown waiting-time kind {kind!r} (use exp: or dexp:)")


def parse_jumps_spec(spec: str):
    """'const:R0', 'exp:MEAN', or 'empirical:PATH' (CSV value,probability)."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "const":
            return DegenerateJumps(r0=float(rest))
        if kind == "exp":
            return ExponentialJumps(mean=float(rest))
    except (ValueError, TypeError):
        raise ValidationError(f"bad magnitude spec {spec!r}") from None
    if kind == "empirical":
        return _read_empirical_jumps(rest)
    raise ValidationError(
        f"unknown magnitude kind {kind!r} (use const:, exp:, or empirical:)"
    )


def _read_empirical_jumps(path: str) -> EmpiricalJumps:
    values, probs = [], []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read magnitude table: {exc}", source=path) from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.replace(" ", "") == "value,probability":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(
                f"expected 'value,probability', got {line!r}", source=path, line=lineno
            )
        try:
            values.append(float(parts[0]))
            probs.append(float(parts[1]))
        except ValueError:
            raise ParseError(
                f"non-numeric field in {line!r}", source=path, line=lineno
            ) from None
    if not values:
        raise ParseError("empty magnitude table", source=path)
    return EmpiricalJumps(
        values=np.asarray(values), probabilities=np.asarray(probs)
    )


def parse_lag_grid(spec: str) -> np.ndarray:
    """'START:STOP:STEP', endpoints inclusive up to rounding."""
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ValidationError(f"bad lag grid {spec!r} (use start:stop:step)") from None
    if step <= 0.0 or stop < start or start <= 0.0:
        raise ValidationError(f"bad lag grid {spec!r}")
    n = int((stop - start) / step + 1.5)
    grid = start + step * np.arange(n)
    return grid[grid <= stop * (1.0 + 1e-12)]


# ---------------------------------------------------------------------------
# Manifest plumbing
# ---------------------------------------------------------------------------


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(subcommand: str, cfg: dict, inputs: list, outputs: list) -> None:
    doc = {
        "version": MANIFEST_VERSION,
        "tool_version": __version__,
        "subcommand": subcommand,
        "config": cfg,
        "seed": cfg.get("seed"),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": list(outputs),
    }
    path = cfg["out_manifest"]
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _run_from_manifest(path: str) -> int:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest: {exc}", source=path) from exc
    if doc.get("version") != MANIFEST_VERSION:
        raise ParseError(
            f"unrecognized manifest version {doc.get('version')!r}", source=path
        )
    sub = doc.get("subcommand")
    handlers = {
        "simulate": _run_simulate,
        "analyze": _run_analyze,
        "curves": _run_curves,
        "compare": _run_compare,
    }
    if sub not in handlers:
        raise ParseError(f"unknown subcommand {sub!r} in manifest", source=path)
    cfg = doc.get("config")
    if not isinstance(cfg, dict):
        raise ParseError("manifest has no config object", source=path)
    # inputs must be unchanged for the replay to be meaningful
    for p, digest in doc.get("inputs", {}).items():
        if _sha256(p) != digest:
            raise ValidationError(f"input {p} changed since the manifest was written")
    handlers[sub](cfg)
    return 0


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------


def _write_csv(path: str, version: str, meta: dict, header: list, columns: list) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# version {version}\n")
        for key, val in meta.items():
            f.write(f"# {key}={val!r}\n")
        f.write(",".join(header) + "\n")
        for row in zip(*[c.tolist() for c in columns]):
            f.write(",".join(repr(v) for v in row) + "\n")


def _read_curve_csv(path: str):
    """Header plus float columns from a curve CSV; returns (names, meta, cols)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read curve file: {exc}", source=path) from exc
    names, rows, meta = None, [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, eq, val = body.partition("=")
            if eq:
                meta[key.strip()] = val.strip()
            continue
        if names is None:
            names = [c.strip() for c in line.split(",")]
            continue
        parts = line.split(",")
        if len(parts) != len(names):
            raise ParseError(
                f"row has {len(parts)} fields, header has {len(names)}",
                source=path,
                line=lineno,
            )
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", source=path, line=lineno) from None
    if names is None or not rows:
        raise ParseError("no data rows", source=path)
    cols = {name: np.array(col) for name, col in zip(names, zip(*rows))}
    return names, meta, cols


# ---------------------------------------------------------------------------
# Subcommand bodies (operate on plain config dicts so manifests replay)
# ---------------------------------------------------------------------------


def _build_sim_config(cfg: dict) -> SimConfig:
    wtd = parse_wtd_spec(cfg["wtd"])
    jumps = JumpModel(
        magnitudes=parse_jumps_spec(cfg["jumps"]), epsilon=cfg["eps"]
    )
    season = None
    if cfg.get("season_p") is not None or cfg.get("season_q") is not None:
        if cfg.get("season_p") is None or cfg.get("season_q") is None:
            raise ValidationError("seasonal runs need both --season-p and --season-q")
        day_length = cfg.get("day_length") or cfg["horizon"]
        season = SeasonalityModel(
            p=cfg["season_p"],
            q=cfg["season_q"],
            day_length=day_length,
            normalization=seasonal_normalization(
                cfg["season_p"], cfg["season_q"], day_length, wtd.mean_wait
            ),
        )
    mode = (
        FirstWaitMode.ORDINARY
        if cfg.get("first_wait") == "ordinary"
        else FirstWaitMode.EQUILIBRIUM
    )
    return SimConfig(
        wtd=wtd,
        jumps=jumps,
        horizon=cfg["horizon"],
        seed=cfg["seed"],
        seasonality=season,
        first_wait_mode=mode,
    )


def _run_simulate(cfg: dict):
    sim_cfg = _build_sim_config(cfg)
    sessions = sample_sessions(sim_cfg, cfg["sessions"])
    write_ticks(cfg["out"], sessions, base_price=cfg["base_price"])
    inputs = [] if not cfg["jumps"].startswith("empirical:") else [
        cfg["jumps"].partition(":")[2]
    ]
    _write_manifest("simulate", cfg, inputs, [cfg["out"]])
    total = sum(len(s) for s in sessions)
    print(f"wrote {cfg['out']}: {len(sessions)} session(s), {total} events")


def _run_analyze(cfg: dict):
    sessions: list[EventSeries] = []
    for path in cfg["ticks"]:
        sessions.extend(ingest_ticks(path, keep_zeros=cfg["keep_zeros"]))
    bin_spec = None
    if cfg.get("wtd_bins"):
        bin_spec = BinSpec(n_bins=cfg["wtd_bins"])
    model = fit_model(
        sessions,
        day_length=cfg["day_length"] if cfg["seasonality"] else None,
        n_buckets=cfg["buckets"],
        bin_spec=bin_spec,
        log_space=cfg["log_space"],
    )
    Path(cfg["out_model"]).write_text(model_to_json(model), encoding="utf-8")
    curve = empirical_nvaf(
        sessions, bin_width=cfg["bin_width"], max_lag=cfg["max_lag"]
    )
    _write_csv(
        cfg["out_vaf"],
        VAF_VERSION,
        {"delta_weight": curve.delta_weight},
        ["lag", "nvaf", "stderr"],
        [curve.lags, curve.values, curve.stderr],
    )
    _write_manifest(
        "analyze", cfg, list(cfg["ticks"]), [cfg["out_model"], cfg["out_vaf"]]
    )
    print(f"wrote {cfg['out_model']} and {cfg['out_vaf']}")


def _curves_params(cfg: dict):
    """Resolve (wtd, eps, m_ratio, season) from a model JSON or flags."""
    inputs = []
    if cfg.get("model"):
        inputs.append(cfg["model"])
        try:
            text = Path(cfg["model"]).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read model: {exc}", source=cfg["model"]) from exc
        fitted = model_from_json(text)
        return fitted.wtd, fitted.epsilon, fitted.m_ratio, fitted.seasonality, inputs
    if not cfg.get("wtd"):
        raise ValidationError("need either --model or --wtd (with --eps/--m)")
    wtd = parse_wtd_spec(cfg["wtd"])
    season = None
    if cfg.get("season_p") is not None or cfg.get("season_q") is not None:
        if cfg.get("season_p") is None or cfg.get("season_q") is None:
            raise ValidationError("seasonal curves need both --season-p and --season-q")
        day_length = cfg.get("day_length")
        if not day_length:
            raise ValidationError("seasonal curves need --day-length")
        season = SeasonalityModel(
            p=cfg["season_p"],
            q=cfg["season_q"],
            day_length=day_length,
            normalization=seasonal_normalization(
                cfg["season_p"], cfg["season_q"], day_length, wtd.mean_wait
            ),
        )
    return wtd, cfg["eps"], cfg["m"], season, inputs


def _run_curves(cfg: dict):
    wtd, eps, m_ratio, season, inputs = _curves_params(cfg)
    lags = parse_lag_grid(cfg["lags"])
    if isinstance(wtd, ExponentialWaits):
        stationary = nvaf_exponential(lags, eps, wtd, m_ratio)
    else:
        stationary = nvaf_double_exponential(lags, eps, wtd, m_ratio)
    header = ["lag", "nvaf_stationary"]
    columns = [lags, stationary.values]
    if season is not None:
        if not isinstance(wtd, DoubleExponentialWaits):
            raise ValidationError("seasonal curve needs a double-exponential model")
        header.append("nvaf_seasonal")
        columns.append(nvaf_seasonal(lags, eps, wtd, m_ratio, season).values)
    if cfg["oracle"]:
        transform = nvaf_continuous_transform(_jump_model_for_ratio(eps, m_ratio), wtd)
        header.append("nvaf_oracle")
        columns.append(invert_laplace(transform, lags, method="talbot"))
    _write_csv(
        cfg["out"],
        CURVES_VERSION,
        {"delta_weight": stationary.delta_weight},
        header,
        columns,
    )
    _write_manifest("curves", cfg, inputs, [cfg["out"]])
    print(f"wrote {cfg['out']}: {lags.size} lags")


def _jump_model_for_ratio(eps: float, m_ratio: float) -> JumpModel:
    """Two-point magnitude model realizing a given moment ratio.

    The transform depends on magnitudes only through M1^2/M2, so any
    distribution hitting the requested ratio serves; a two-point set
    {1, r} with the right mixing does for every M in (0, 1].
    """
    if not 0.0 < m_ratio <= 1.0:
        raise ValidationError(f"moment ratio must be in (0, 1], got {m_ratio}")
    if m_ratio == 1.0:
        return JumpModel(magnitudes=DegenerateJumps(r0=1.0), epsilon=eps)
    # p on {1, r}: M = (p + (1-p) r)^2 / (p + (1-p) r^2); r fixed at 20
    r = 20.0
    # quadratic in p from M * (p + (1-p) r^2) = (p + (1-p) r)^2
    a = (1.0 - r) ** 2
    b = 2.0 * r * (1.0 - r) - m_ratio * (1.0 - r * r)
    c = r * r * (1.0 - m_ratio)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NumericError(f"no two-point mixture for moment ratio {m_ratio}")
    p = (-b - np.sqrt(disc)) / (2.0 * a)
    if not 0.0 < p < 1.0:
        p = (-b + np.sqrt(disc)) / (2.0 * a)
    if not 0.0 < p < 1.0:
        raise NumericError(f"no valid mixture weight for moment ratio {m_ratio}")
    return JumpModel(
        magnitudes=EmpiricalJumps(
            values=np.array([1.0, r]), probabilities=np.array([p, 1.0 - p])
        ),
        epsilon=eps,
    )


def _run_compare(cfg: dict):
    _, _, emp = _read_curve_csv(cfg["empirical"])
    _, _, theo = _read_curve_csv(cfg["theory"])
    for col in ("lag", "nvaf", "stderr"):
        if col not in emp:
            raise ParseError(f"empirical curve lacks column {col!r}", source=cfg["empirical"])
    column = cfg["column"]
    if column not in theo:
        raise ParseError(f"theory curve lacks column {column!r}", source=cfg["theory"])
    lo = max(emp["lag"][0], theo["lag"][0])
    hi = min(emp["lag"][-1], theo["lag"][-1])
    if lo > hi:
        raise ValidationError("empirical and theory lag ranges do not overlap")
    sel = (emp["lag"] >= lo) & (emp["lag"] <= hi)
    lags = emp["lag"][sel]
    values = emp["nvaf"][sel]
    stderr = emp["stderr"][sel]
    theory = np.interp(lags, theo["lag"], theo[column])
    residual = values - theory
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stderr > 0, residual / stderr, np.nan)
    finite = np.isfinite(z)
    chi2 = float(np.sum(z[finite] ** 2))
    dof = int(finite.sum())
    report = {
        "version": REPORT_VERSION,
        "empirical": cfg["empirical"],
        "theory": cfg["theory"],
        "column": column,
        "n_lags": int(lags.size),
        "lag": lags.tolist(),
        "empirical_nvaf": values.tolist(),
        "theory_nvaf": theory.tolist(),
        "residual": residual.tolist(),
        "z_score": [v if np.isfinite(v) else None for v in z.tolist()],
        "chi_square": chi2,
        "dof": dof,
        "chi_square_per_dof": chi2 / dof if dof else None,
    }
    Path(cfg["out"]).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(
        "compare", cfg, [cfg["empirical"], cfg["theory"]], [cfg["out"]]
    )
    print(
        f"wrote {cfg['out']}: {dof} lags, chi2/dof = "
        f"{report['chi_square_per_dof']:.3f}"
    )


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _load_config_file(path: str) -> dict:
    """Flat key-value JSON mirroring the long flags (dashes as underscores)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read config: {exc}", source=path) from exc
    if not isinstance(doc, dict):
        raise ParseError("config must be a flat JSON object", source=path)
    return doc


def _merge_config(args: argparse.Namespace, keys: list) -> dict:
    """Resolved config dict: config-file values, overridden by explicit flags."""
    file_cfg = _load_config_file(args.config) if args.config else {}
    cfg = {}
    for key in keys:
        val = getattr(args, key)
        if val is None and key in file_cfg:
            val = file_cfg[key]
        cfg[key] = val
    unknown = set(file_cfg) - set(keys)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _require(cfg: dict, keys: list) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ValidationError(f"missing required options: {missing}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dctrw",
        description="Directed random-walk model: simulation, fitting, curves.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--from-manifest",
        metavar="PATH",
        help="replay a previous run from its manifest (byte-identical outputs)",
    )
    sub = parser.add_subparsers(dest="subcommand")

    sim = sub.add_parser("simulate", help="generate synthetic tick data")
    sim.add_argument("--config", help="flat JSON key-value config file")
    sim.add_argument("--wtd", help="waiting times: exp:MEAN or dexp:T1,T2,W")
    sim.add_argument("--jumps", help="magnitudes: const:R0, exp:MEAN, empirical:PATH")
    sim.add_argument("--eps", type=float, default=None, help="copy probability (default 0)")
    sim.add_argument("--horizon", type=float, default=None, help="session length")
    sim.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    sim.add_argument("--sessions", type=int, default=None, help="number of sessions (default 1)")
    sim.add_argument("--season-p", type=float, default=None, help="profile peak position")
    sim.add_argument("--season-q", type=float, default=None, help="profile width squared")
    sim.add_argument("--day-length", type=float, default=None, help="profile period (default horizon)")
    sim.add_argument("--first-wait", choices=["equilibrium", "ordinary"], default=None)
    sim.add_argument("--base-price", type=float, default=None, help="price at session open (default 128)")
    sim.add_argument("--out", default=None, help="tick CSV path (default ticks.csv)")
    sim.add_argument("--out-manifest", default=None)

    ana = sub.add_parser("analyze", help="fit parameters and empirical curve")
    ana.add_argument("ticks", nargs="+", help="tick CSV files")
    ana.add_argument("--config", help="flat JSON key-value config file")
    ana.add_argument("--bin-width", type=float, default=None, help="lag bin width (default 2)")
    ana.add_argument("--max-lag", type=float, default=None, help="largest lag (default 100)")
    ana.add_argument("--seasonality", action="store_true", help="fit the intraday profile too")
    ana.add_argument("--day-length", type=float, default=None)
    ana.add_argument("--buckets", type=int, default=None, help="intraday buckets (default 48)")
    ana.add_argument("--wtd-bins", type=int, default=None, help="wait histogram bins (default 60)")
    ana.add_argument("--log-space", action="store_true", help="fit log-density instead of density")
    ana.add_argument("--keep-zeros", action="store_true", help="keep zero price changes as events")
    ana.add_argument("--out-model", default=None, help="fitted model JSON (default model.json)")
    ana.add_argument("--out-vaf", default=None, help="empirical curve CSV (default vaf.csv)")
    ana.add_argument("--out-manifest", default=None)

    cur = sub.add_parser("curves", help="evaluate closed-form curves")
    cur.add_argument("--config", help="flat JSON key-value config file")
    cur.add_argument("--model", default=None, help="fitted model JSON from analyze")
    cur.add_argument("--wtd", default=None, help="waiting times (alternative to --model)")
    cur.add_argument("--eps", type=float, default=None, help="copy probability")
    cur.add_argument("--m", type=float, default=None, help="magnitude moment ratio M1^2/M2")
    cur.add_argument("--season-p", type=float, default=None)
    cur.add_argument("--season-q", type=float, default=None)
    cur.add_argument("--day-length", type=float, default=None)
    cur.add_argument("--lags", default=None, help="lag grid START:STOP:STEP (default 0.5:100:0.5)")
    cur.add_argument("--oracle", action="store_true", help="add a numerical-inversion column")
    cur.add_argument("--out", default=None, help="curve CSV (default curves.csv)")
    cur.add_argument("--out-manifest", default=None)

    cmp_ = sub.add_parser("compare", help="score empirical curve against theory")
    cmp_.add_argument("empirical", help="empirical curve CSV (lag,nvaf,stderr)")
    cmp_.add_argument("theory", help="theory curve CSV")
    cmp_.add_argument("--config", help="flat JSON key-value config file")
    cmp_.add_argument("--column", default=None, help="theory column (default nvaf_stationary)")
    cmp_.add_argument("--out", default=None, help="report JSON (default report.json)")
    cmp_.add_argument("--out-manifest", default=None)
    return parser


_SIM_KEYS = [
    "wtd", "jumps", "eps", "horizon", "seed", "sessions", "season_p", "season_q",
    "day_length", "first_wait", "base_price", "out", "out_manifest",
]
_ANA_KEYS = [
    "ticks", "bin_width", "max_lag", "seasonality", "day_length", "buckets",
    "wtd_bins", "log_space", "keep_zeros", "out_model", "out_vaf", "out_manifest",
]
_CUR_KEYS = [
    "model", "wtd", "eps", "m", "season_p", "season_q", "day_length", "lags",
    "oracle", "out", "out_manifest",
]
_CMP_KEYS = ["empirical", "theory", "column", "out", "out_manifest"]


def _dispatch(args: argparse.Namespace) -> int:
    if args.subcommand == "simulate":
        cfg = _merge_config(args, _SIM_KEYS)
        _require(cfg, ["wtd", "jumps", "horizon"])
        cfg["eps"] = 0.0 if cfg["eps"] is None else cfg["eps"]
        cfg["seed"] = 0 if cfg["seed"] is None else cfg["seed"]
        cfg["sessions"] = 1 if cfg["sessions"] is None else cfg["sessions"]
        cfg["base_price"] = 128.0 if cfg["base_price"] is None else cfg["base_price"]
        cfg["out"] = cfg["out"] or "ticks.csv"
        cfg["out_manifest"] = cfg["out_manifest"] or cfg["out"] + ".manifest.json"
        _run_simulate(cfg)
        return 0
    if args.subcommand == "analyze":
        cfg = _merge_config(args, _ANA_KEYS)
        cfg["bin_width"] = 2.0 if cfg["bin_width"] is None else cfg["bin_width"]
        cfg["max_lag"] = 100.0 if cfg["max_lag"] is None else cfg["max_lag"]
        cfg["seasonality"] = bool(cfg["seasonality"])
        cfg["log_space"] = bool(cfg["log_space"])
        cfg["keep_zeros"] = bool(cfg["keep_zeros"])
        cfg["buckets"] = 48 if cfg["buckets"] is None else cfg["buckets"]
        if cfg["seasonality"] and not cfg["day_length"]:
            raise ValidationError("--seasonality needs --day-length")
        cfg["out_model"] = cfg["out_model"] or "model.json"
        cfg["out_vaf"] = cfg["out_vaf"] or "vaf.csv"
        cfg["out_manifest"] = cfg["out_manifest"] or cfg["out_model"] + ".manifest.json"
        _run_analyze(cfg)
        return 0
    if args.subcommand == "curves":
        cfg = _merge_config(args, _CUR_KEYS)
        cfg["eps"] = 0.0 if cfg["eps"] is None else cfg["eps"]
        if cfg["m"] is None and not cfg.get("model"):
            raise ValidationError("need --m with --wtd (or use --model)")
        cfg["lags"] = cfg["lags"] or "0.5:100:0.5"
        cfg["oracle"] = bool(cfg["oracle"])
        cfg["out"] = cfg["out"] or "curves.csv"
        cfg["out_manifest"] = cfg["out_manifest"] or cfg["out"] + ".manifest.json"
        _run_curves(cfg)
        return 0
    if args.subcommand == "compare":
        cfg = _merge_config(args, _CMP_KEYS)
        cfg["column"] = cfg["column"] or "nvaf_stationary"
        cfg["out"] = cfg["out"] or "report.json"
        cfg["out_manifest"] = cfg["out_manifest"] or cfg["out"] + ".manifest.json"
        _run_compare(cfg)
        return 0
    raise ValidationError("no subcommand given (see --help)")


def _apply_thread_env() -> None:
    raw = os.environ.get("DCTRW_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"DCTRW_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"DCTRW_THREADS must be >= 1, got {n}")
    import numba

    numba.set_num_threads(n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_env()
        if args.from_manifest:
            return _run_from_manifest(args.from_manifest)
        return _dispatch(args)
    except ParseError as exc:
        print(f"dctrw: parse error: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, EstimationError) as exc:
        print(f"dctrw: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"dctrw: numeric failure: {exc}", file=sys.stderr)
        return 4
    except DctrwError as exc:  # any library error not mapped above
        print(f"dctrw: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
