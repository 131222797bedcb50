"""Parameter objects: validation, densities, moments, basic invariants."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from dctrw import (
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
    ValidationError,
    seasonal_normalization,
)
from helpers import (
    CANON_DAY,
    CANON_MEAN_WAIT,
    CANON_P,
    CANON_Q,
    canon_season,
    canon_wtd,
    two_point_jumps,
)


class TestExponentialWaits:
    def test_mean_and_moments(self):
        wtd = ExponentialWaits(2.5)
        assert wtd.mean_wait == 2.5
        assert wtd.moment(1) == 2.5
        assert wtd.moment(2) == pytest.approx(2 * 2.5**2, rel=1e-15)
        assert wtd.moment(3) == pytest.approx(6 * 2.5**3, rel=1e-15)

    def test_density_normalized(self):
        wtd = ExponentialWaits(3.0)
        total, _ = quad(wtd.density, 0.0, 50 * 3.0)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_density_matches_moments(self):
        wtd = ExponentialWaits(1.7)
        m1, _ = quad(lambda t: t * wtd.density(t), 0.0, 80.0)
        m2, _ = quad(lambda t: t * t * wtd.density(t), 0.0, 120.0)
        assert m1 == pytest.approx(wtd.moment(1), rel=1e-9)
        assert m2 == pytest.approx(wtd.moment(2), rel=1e-9)

    def test_cdf_survival_complement(self):
        wtd = ExponentialWaits(1.0)
        t = np.array([0.0, 0.3, 1.0, 5.0])
        np.testing.assert_allclose(wtd.cdf(t) + wtd.survival(t), 1.0, rtol=1e-15)

    @pytest.mark.parametrize("mean", [0.0, -1.0, float("inf"), float("nan")])
    def test_invalid_mean(self, mean):
        with pytest.raises(ValidationError):
            ExponentialWaits(mean)


class TestDoubleExponentialWaits:
    def test_canonical_mean(self):
        assert canon_wtd().mean_wait == pytest.approx(CANON_MEAN_WAIT, rel=1e-12)

    def test_density_normalized(self):
        wtd = canon_wtd()
        total, _ = quad(wtd.density, 0.0, 50 * wtd.mean_wait, limit=200)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_moments_match_quadrature(self):
        wtd = DoubleExponentialWaits(0.7, 9.0, 0.4)
        for k in (1, 2, 3):
            val, _ = quad(lambda t: t**k * wtd.density(t), 0.0, 400.0, limit=400)
            assert val == pytest.approx(wtd.moment(k), rel=1e-8)

    def test_cdf_survival_complement(self):
        wtd = canon_wtd()
        t = np.linspace(0.0, 200.0, 40)
        np.testing.assert_allclose(wtd.cdf(t) + wtd.survival(t), 1.0, rtol=1e-14)

    def test_degenerate_equal_scales(self):
        assert DoubleExponentialWaits(2.0, 2.0, 0.3).is_degenerate()
        assert DoubleExponentialWaits(2.0, 2.0 * (1 + 1e-13), 0.3).is_degenerate()
        assert not DoubleExponentialWaits(2.0, 2.1, 0.3).is_degenerate()

    def test_degenerate_extreme_weight(self):
        assert DoubleExponentialWaits(2.0, 7.0, 0.0).is_degenerate()
        assert DoubleExponentialWaits(2.0, 7.0, 1.0).is_degenerate()
        assert not DoubleExponentialWaits(2.0, 7.0, 0.01).is_degenerate()

    def test_collapse(self):
        assert DoubleExponentialWaits(2.0, 7.0, 1.0).collapse().mean == 2.0
        assert DoubleExponentialWaits(2.0, 7.0, 0.0).collapse().mean == 7.0
        eq = DoubleExponentialWaits(3.0, 3.0, 0.4).collapse()
        assert eq.mean == pytest.approx(3.0, rel=1e-12)

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            DoubleExponentialWaits(-1.0, 2.0, 0.5)
        with pytest.raises(ValidationError):
            DoubleExponentialWaits(1.0, 0.0, 0.5)
        with pytest.raises(ValidationError):
            DoubleExponentialWaits(1.0, 2.0, 1.5)
        with pytest.raises(ValidationError):
            DoubleExponentialWaits(1.0, 2.0, -0.1)


class TestJumpMagnitudes:
    def test_degenerate_moments(self):
        j = DegenerateJumps(0.5)
        assert j.m1() == 0.5
        assert j.m2() == 0.25

    def test_exponential_moments(self):
        j = ExponentialJumps(2.0)
        assert j.m1() == 2.0
        assert j.m2() == pytest.approx(8.0, rel=1e-15)

    def test_empirical_moments(self):
        j = EmpiricalJumps(np.array([1.0, 3.0]), np.array([0.25, 0.75]))
        assert j.m1() == pytest.approx(0.25 + 2.25, rel=1e-15)
        assert j.m2() == pytest.approx(0.25 + 6.75, rel=1e-15)

    def test_empirical_renormalizes_small_drift(self):
        # sums to 1 + 5e-10, inside the rel=1e-9 acceptance window
        probs = np.array([0.5, 0.5 + 5e-10])
        j = EmpiricalJumps(np.array([1.0, 2.0]), probs)
        assert float(np.sum(j.probabilities)) == pytest.approx(1.0, abs=1e-15)

    def test_empirical_rejects_bad_tables(self):
        with pytest.raises(ValidationError):
            EmpiricalJumps(np.array([]), np.array([]))
        with pytest.raises(ValidationError):
            EmpiricalJumps(np.array([1.0, 2.0]), np.array([0.6, 0.6]))
        with pytest.raises(ValidationError):
            EmpiricalJumps(np.array([1.0, -2.0]), np.array([0.5, 0.5]))
        with pytest.raises(ValidationError):
            EmpiricalJumps(np.array([0.0, 2.0]), np.array([0.5, 0.5]))
        with pytest.raises(ValidationError):
            EmpiricalJumps(np.array([1.0, 2.0]), np.array([1.2, -0.2]))

    def test_jump_model_epsilon_bounds(self):
        mags = two_point_jumps()
        JumpModel(mags, 0.0)
        JumpModel(mags, 0.999999)
        with pytest.raises(ValidationError):
            JumpModel(mags, 1.0)
        with pytest.raises(ValidationError):
            JumpModel(mags, -0.01)

    def test_jump_model_delegates_moments(self):
        jm = JumpModel(ExponentialJumps(1.5), 0.2)
        assert jm.m1() == 1.5
        assert jm.m2() == pytest.approx(4.5, rel=1e-15)


class TestSeasonalityModel:
    def test_theta_positive_and_wraps(self):
        season = canon_season()
        t = np.array([0.0, 1000.0, CANON_P, CANON_DAY - 1.0])
        assert (season.theta(t) > 0).all()
        assert season.theta(CANON_DAY + 123.0) == pytest.approx(
            season.theta(123.0), rel=1e-12
        )
        assert season.theta(-5.0) == pytest.approx(
            season.theta(CANON_DAY - 5.0), rel=1e-12
        )

    def test_peak_at_p(self):
        season = canon_season()
        t = np.linspace(0.0, CANON_DAY, 2001, endpoint=False)
        assert season.theta(CANON_P) >= season.theta(t).max() - 1e-12

    def test_day_average_matches_quadrature(self):
        season = canon_season()
        val, _ = quad(season.theta, 0.0, CANON_DAY, limit=400)
        assert val / CANON_DAY == pytest.approx(season.day_average_theta(), rel=1e-9)

    def test_normalization_fixes_day_average(self):
        # by construction the day-average local mean wait is the global mean
        season = canon_season()
        assert season.day_average_theta() == pytest.approx(CANON_MEAN_WAIT, rel=1e-12)

    def test_normalization_scaling(self):
        a1 = seasonal_normalization(CANON_P, CANON_Q, CANON_DAY, 1.0)
        a2 = seasonal_normalization(CANON_P, CANON_Q, CANON_DAY, 4.0)
        assert a1 == pytest.approx(4.0 * a2, rel=1e-14)

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            SeasonalityModel(-1.0, CANON_Q, CANON_DAY, 1.0)
        with pytest.raises(ValidationError):
            SeasonalityModel(CANON_DAY + 1.0, CANON_Q, CANON_DAY, 1.0)
        with pytest.raises(ValidationError):
            SeasonalityModel(CANON_P, -1.0, CANON_DAY, 1.0)
        with pytest.raises(ValidationError):
            SeasonalityModel(CANON_P, CANON_Q, CANON_DAY, 0.0)


class TestEventSeries:
    def test_basic_accessors(self):
        s = EventSeries(np.array([1.0, 2.5, 4.0]), np.array([1.0, 0.5, 2.0]), 5.0)
        assert len(s) == 3
        assert s.position(0.5) == 0.0
        assert s.position(2.5) == pytest.approx(1.5)
        assert s.position(10.0) == pytest.approx(3.5)

    def test_position_vectorized(self):
        s = EventSeries(np.array([1.0, 2.0]), np.array([1.0, 1.0]), 3.0)
        np.testing.assert_allclose(s.position(np.array([0.0, 1.0, 2.0])), [0, 1, 2])

    def test_validation(self):
        with pytest.raises(ValidationError):
            EventSeries(np.array([2.0, 1.0]), np.array([1.0, 1.0]), 3.0)
        with pytest.raises(ValidationError):
            EventSeries(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 3.0)
        with pytest.raises(ValidationError):
            EventSeries(np.array([1.0, 4.0]), np.array([1.0, 1.0]), 3.0)
        with pytest.raises(ValidationError):
            EventSeries(np.array([1.0, 2.0]), np.array([1.0, -1.0]), 3.0)
        with pytest.raises(ValidationError):
            EventSeries(np.array([1.0, 2.0]), np.array([1.0]), 3.0)

    def test_zero_jumps_allowed(self):
        # reader may keep zero-magnitude ticks; the container accepts them
        s = EventSeries(np.array([1.0, 2.0]), np.array([0.0, 1.0]), 3.0)
        assert s.position(1.5) == 0.0


class TestVafCurve:
    def test_stderr_shape_checked(self):
        lags = np.array([1.0, 2.0])
        VafCurve(1.0, lags, np.array([0.1, 0.2]), np.array([0.01, 0.01]))
        with pytest.raises(ValidationError):
            VafCurve(1.0, lags, np.array([0.1, 0.2]), np.array([0.01]))

    def test_negative_values_allowed(self):
        # empirical curves fluctuate below zero at long lags
        VafCurve(1.0, np.array([1.0]), np.array([-0.05]))

    def test_lag_validation(self):
        with pytest.raises(ValidationError):
            VafCurve(1.0, np.array([2.0, 1.0]), np.array([0.1, 0.2]))
        with pytest.raises(ValidationError):
            VafCurve(1.0, np.array([0.0, 1.0]), np.array([0.1, 0.2]))


class TestSimConfig:
    def test_seed_validation(self):
        wtd = ExponentialWaits(1.0)
        jumps = JumpModel(DegenerateJumps(1.0), 0.0)
        SimConfig(wtd, jumps, 10.0, 0)
        with pytest.raises(ValidationError):
            SimConfig(wtd, jumps, 10.0, -1)
        with pytest.raises(ValidationError):
            SimConfig(wtd, jumps, 10.0, 1.5)
        with pytest.raises(ValidationError):
            SimConfig(wtd, jumps, 0.0, 0)

    def test_seasonal_horizon_rule(self):
        wtd = canon_wtd()
        jumps = JumpModel(DegenerateJumps(1.0), 0.0)
        season = canon_season()
        SimConfig(wtd, jumps, CANON_DAY, 0, seasonality=season)
        SimConfig(wtd, jumps, 3 * CANON_DAY, 0, seasonality=season)
        SimConfig(wtd, jumps, 0.5 * CANON_DAY, 0, seasonality=season)
        with pytest.raises(ValidationError):
            SimConfig(wtd, jumps, 1.5 * CANON_DAY, 0, seasonality=season)

    def test_first_wait_mode_default(self):
        cfg = SimConfig(ExponentialWaits(1.0), JumpModel(DegenerateJumps(1.0)), 1.0, 0)
        assert cfg.first_wait_mode is FirstWaitMode.EQUILIBRIUM
