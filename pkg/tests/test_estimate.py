"""Estimation pipeline: tick files, waiting-time and jump fits, seasonality."""

import io
import json

import numpy as np
import pytest

from dctrw import (
    BinSpec,
    DoubleExponentialWaits,
    EstimationError,
    EventSeries,
    ExponentialJumps,
    ExponentialWaits,
    JumpModel,
    ParseError,
    SimConfig,
    estimate_jump_stats,
    fit_model,
    fit_seasonality,
    fit_wtd,
    ingest_ticks,
    lag_autocorrelation,
    model_from_json,
    model_to_json,
    pooled_mean_wait,
    sample_sessions,
    sample_trajectory,
    sample_trajectory_seasonal,
    write_ticks,
)
from helpers import (
    CANON_DAY,
    CANON_P,
    CANON_Q,
    CANON_TAU1,
    CANON_TAU2,
    CANON_WEIGHT,
    canon_jump_model,
    canon_season,
    canon_wtd,
)

THREE_TICKS = """time,price
# horizon=5.0
0.0,100.0
2.0,100.5
4.0,100.5
"""


def draw_waits(n, seed=0):
    rng = np.random.default_rng(seed)
    pick = rng.random(n) < CANON_WEIGHT
    scale = np.where(pick, CANON_TAU1, CANON_TAU2)
    return rng.exponential(scale)


class TestIngest:
    def test_three_tick_example(self):
        sessions = ingest_ticks(io.StringIO(THREE_TICKS))
        assert len(sessions) == 1
        s = sessions[0]
        np.testing.assert_allclose(s.times, [2.0])
        np.testing.assert_allclose(s.jumps, [0.5])
        assert s.horizon == 5.0

    def test_keep_zeros(self):
        s = ingest_ticks(io.StringIO(THREE_TICKS), keep_zeros=True)[0]
        np.testing.assert_allclose(s.times, [2.0, 4.0])
        np.testing.assert_allclose(s.jumps, [0.5, 0.0])

    def test_horizon_defaults_to_last_tick(self):
        text = "time,price\n0.0,10.0\n3.0,11.0\n"
        s = ingest_ticks(io.StringIO(text))[0]
        assert s.horizon == 3.0

    def test_downticks_count_as_magnitude(self):
        text = "time,price\n# horizon=4.0\n0.0,10.0\n1.0,9.0\n2.0,9.5\n"
        s = ingest_ticks(io.StringIO(text))[0]
        np.testing.assert_allclose(s.jumps, [1.0, 0.5])

    def test_same_timestamp_ticks_collapse(self):
        text = "time,price\n# horizon=4.0\n0.0,10.0\n1.0,11.0\n1.0,11.5\n2.0,12.0\n"
        s = ingest_ticks(io.StringIO(text))[0]
        np.testing.assert_allclose(s.times, [1.0, 2.0])
        np.testing.assert_allclose(s.jumps, [1.5, 0.5])

    def test_multiple_sessions(self):
        text = THREE_TICKS + "time,price\n# horizon=7.0\n0.0,50.0\n1.0,51.0\n"
        sessions = ingest_ticks(io.StringIO(text))
        assert len(sessions) == 2
        assert sessions[1].horizon == 7.0

    def test_parse_errors_carry_line_numbers(self):
        bad = "time,price\n0.0,10.0\n2.0,11.0\n1.0,12.0\n"
        with pytest.raises(ParseError, match=r":4: timestamp"):
            ingest_ticks(io.StringIO(bad))
        with pytest.raises(ParseError, match="non-positive price"):
            ingest_ticks(io.StringIO("time,price\n0.0,10.0\n1.0,-3.0\n"))
        with pytest.raises(ParseError, match="before"):
            ingest_ticks(io.StringIO("0.0,10.0\n"))
        with pytest.raises(ParseError, match="horizon"):
            ingest_ticks(io.StringIO("time,price\n# horizon=abc\n0.0,10.0\n"))
        with pytest.raises(ParseError, match="non-numeric"):
            ingest_ticks(io.StringIO("time,price\n0.0,ten\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read"):
            ingest_ticks(tmp_path / "nope.csv")

    def test_round_trip_is_exact(self, tmp_path):
        cfg = SimConfig(canon_wtd(), canon_jump_model(), 5e4, 3)
        sessions = sample_sessions(cfg, 4)
        path = tmp_path / "ticks.csv"
        write_ticks(path, sessions)
        back = ingest_ticks(path)
        assert len(back) == 4
        for a, b in zip(sessions, back):
            # magnitudes are dyadic here, so cumulative prices are exact
            assert np.array_equal(a.times, b.times)
            assert np.array_equal(a.jumps, b.jumps)
            assert a.horizon == b.horizon


class TestFitWtd:
    def test_recovers_mixture(self):
        fit = fit_wtd(draw_waits(1_000_000, seed=11))
        assert not fit.degenerate
        assert fit.wtd.tau1 == pytest.approx(CANON_TAU1, rel=0.05)
        assert fit.wtd.tau2 == pytest.approx(CANON_TAU2, rel=0.05)
        assert fit.wtd.weight == pytest.approx(CANON_WEIGHT, abs=0.03)
        assert fit.n_waits == 1_000_000

    def test_log_space_variant(self):
        fit = fit_wtd(draw_waits(1_000_000, seed=13), log_space=True)
        assert fit.wtd.tau1 == pytest.approx(CANON_TAU1, rel=0.05)
        assert fit.wtd.tau2 == pytest.approx(CANON_TAU2, rel=0.05)

    def test_single_scale_flags_degenerate(self):
        rng = np.random.default_rng(17)
        fit = fit_wtd(rng.exponential(5.0, 200_000))
        assert fit.degenerate

    def test_requires_enough_waits(self):
        with pytest.raises(EstimationError):
            fit_wtd(draw_waits(999))

    def test_custom_bin_spec(self):
        fit = fit_wtd(draw_waits(100_000, seed=19), BinSpec(n_bins=40, lo=0.05, hi=200.0))
        assert fit.bin_edges.size == 41
        assert fit.wtd.tau2 == pytest.approx(CANON_TAU2, rel=0.15)


class TestJumpStats:
    def test_constant_jumps_degenerate(self):
        stats = estimate_jump_stats(np.full(5000, 2.0))
        assert stats.degenerate
        assert stats.m_ratio == 1.0
        assert stats.m == 1.0
        assert stats.epsilon == 0.0

    def test_iid_sample(self):
        rng = np.random.default_rng(23)
        jumps = rng.exponential(1.0, 500_000)
        stats = estimate_jump_stats(jumps)
        assert not stats.degenerate
        assert stats.m_ratio == pytest.approx(0.5, abs=0.01)
        assert 0.0 <= stats.epsilon < 0.01

    def test_memory_chain_recovered(self):
        cfg = SimConfig(ExponentialWaits(1.0), canon_jump_model(0.258), 5e5, 29)
        traj = sample_trajectory(cfg)
        stats = estimate_jump_stats(traj.jumps)
        assert stats.epsilon == pytest.approx(0.258, abs=0.01)
        assert stats.m_ratio == pytest.approx(0.269, rel=0.02)

    def test_scale_invariance(self):
        rng = np.random.default_rng(31)
        jumps = rng.exponential(1.0, 100_000)
        a = estimate_jump_stats(jumps)
        b = estimate_jump_stats(1000.0 * jumps)
        assert b.m_ratio == pytest.approx(a.m_ratio, rel=1e-12)
        assert b.epsilon == pytest.approx(a.epsilon, abs=1e-12)

    def test_requires_two_jumps(self):
        with pytest.raises(EstimationError):
            estimate_jump_stats(np.array([1.0]))
        with pytest.raises(EstimationError):
            estimate_jump_stats(np.zeros(100))


class TestLagAutocorrelation:
    def test_iid_is_noise(self):
        rng = np.random.default_rng(37)
        x = rng.exponential(1.0, 100_000)
        rho = lag_autocorrelation(x, 10)
        assert rho.shape == (10,)
        assert np.abs(rho).max() < 3.0 / np.sqrt(x.size)

    def test_memory_chain_geometric(self):
        cfg = SimConfig(ExponentialWaits(1.0), JumpModel(ExponentialJumps(1.0), 0.5), 4e5, 41)
        r = sample_trajectory(cfg).jumps
        rho = lag_autocorrelation(r, 5)
        for k in range(1, 6):
            assert rho[k - 1] == pytest.approx(0.5**k, abs=0.02)

    def test_waits_are_uncorrelated(self):
        traj = sample_trajectory(SimConfig(canon_wtd(), canon_jump_model(), 4e5, 43))
        rho = lag_autocorrelation(np.diff(traj.times), 5)
        assert np.abs(rho).max() < 4.0 / np.sqrt(len(traj) - 1.0)

    def test_errors(self):
        with pytest.raises(EstimationError):
            lag_autocorrelation(np.ones(100), 5)  # zero variance
        with pytest.raises(EstimationError):
            lag_autocorrelation(np.arange(5.0), 10)  # too short


class TestSeasonality:
    def test_exact_profile_recovered(self):
        # deterministic walk: every wait equals the local profile value,
        # so bucket means trace theta exactly up to bucketing
        season = canon_season()
        sessions = []
        for day in range(3):
            t, times = 0.0, []
            while True:
                t += float(season.theta(t))
                if t >= CANON_DAY:
                    break
                times.append(t)
            arr = np.array(times)
            sessions.append(EventSeries(arr, np.ones(arr.size), CANON_DAY))
        fit = fit_seasonality(sessions, CANON_DAY)
        assert not fit.flat
        assert fit.season.p == pytest.approx(CANON_P, abs=0.02 * CANON_DAY)
        assert fit.season.q == pytest.approx(CANON_Q, rel=0.02)

    def test_monte_carlo_recovery(self):
        cfg = SimConfig(
            canon_wtd(),
            canon_jump_model(),
            200 * CANON_DAY,
            47,
            seasonality=canon_season(),
        )
        traj = sample_trajectory_seasonal(cfg)
        day_idx = (traj.times // CANON_DAY).astype(int)
        sessions = []
        for d in range(200):
            sel = day_idx == d
            tt = traj.times[sel] - d * CANON_DAY
            keep = tt > 0
            sessions.append(EventSeries(tt[keep], traj.jumps[sel][keep], CANON_DAY))
        fit = fit_seasonality(sessions, CANON_DAY)
        assert not fit.flat
        assert fit.season.p == pytest.approx(CANON_P, abs=0.02 * CANON_DAY)
        assert fit.season.q == pytest.approx(CANON_Q, rel=0.10)

    def test_flat_data_flagged(self):
        cfg = SimConfig(canon_wtd(), canon_jump_model(), CANON_DAY, 53)
        sessions = sample_sessions(cfg, 100)
        fit = fit_seasonality(sessions, CANON_DAY)
        assert fit.flat

    def test_requires_occupied_buckets(self):
        sparse = [EventSeries(np.array([1.0, 2.0]), np.ones(2), CANON_DAY)]
        with pytest.raises(EstimationError):
            fit_seasonality(sparse, CANON_DAY)


class TestPooledMeanWait:
    def test_manual_value(self):
        s1 = EventSeries(np.array([1.0, 3.0, 6.0]), np.ones(3), 10.0)
        s2 = EventSeries(np.array([2.0, 4.0]), np.ones(2), 10.0)
        # gaps: (2, 3) and (2) -> 7/3
        assert pooled_mean_wait([s1, s2]) == pytest.approx(7.0 / 3.0, rel=1e-12)


@pytest.fixture(scope="module")
def sessions():
    cfg = SimConfig(canon_wtd(), canon_jump_model(), 2e5, 59)
    return sample_sessions(cfg, 8)


class TestFitModel:

    def test_recovers_parameters(self, sessions):
        model = fit_model(sessions)
        assert model.wtd.tau1 == pytest.approx(CANON_TAU1, rel=0.10)
        assert model.wtd.tau2 == pytest.approx(CANON_TAU2, rel=0.10)
        assert model.epsilon == pytest.approx(0.258, abs=0.02)
        assert model.m_ratio == pytest.approx(0.269, rel=0.05)
        assert model.seasonality is None
        assert model.diagnostics["n_sessions"] == 8
        assert model.diagnostics["n_events"] > 90_000

    def test_single_event_session_rejected(self):
        tiny = [EventSeries(np.array([1.0]), np.array([1.0]), 5.0)]
        with pytest.raises(EstimationError):
            fit_model(tiny)

    def test_json_round_trip(self, sessions):
        model = fit_model(sessions)
        back = model_from_json(model_to_json(model))
        assert back.wtd.tau1 == model.wtd.tau1
        assert back.wtd.tau2 == model.wtd.tau2
        assert back.wtd.weight == model.wtd.weight
        assert back.epsilon == model.epsilon
        assert back.m_ratio == model.m_ratio
        assert back.mean_wait == model.mean_wait
        assert back.seasonality is None

    def test_seasonal_round_trip(self):
        cfg = SimConfig(
            canon_wtd(), canon_jump_model(), 30 * CANON_DAY, 61, seasonality=canon_season()
        )
        traj = sample_trajectory_seasonal(cfg)
        day_idx = (traj.times // CANON_DAY).astype(int)
        sessions = []
        for d in range(30):
            sel = day_idx == d
            tt = traj.times[sel] - d * CANON_DAY
            keep = tt > 0
            sessions.append(EventSeries(tt[keep], traj.jumps[sel][keep], CANON_DAY))
        model = fit_model(sessions, day_length=CANON_DAY)
        assert model.seasonality is not None
        back = model_from_json(model_to_json(model))
        assert back.seasonality.p == model.seasonality.p
        assert back.seasonality.q == model.seasonality.q

    def test_json_errors(self, sessions):
        with pytest.raises(ParseError):
            model_from_json("not json {")
        good = json.loads(model_to_json(fit_model(sessions)))
        bad_version = dict(good, version="other-tool/9")
        with pytest.raises(ParseError, match="version"):
            model_from_json(json.dumps(bad_version))
        missing = {k: v for k, v in good.items() if k != "epsilon"}
        with pytest.raises(ParseError):
            model_from_json(json.dumps(missing))
