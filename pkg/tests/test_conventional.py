from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from RainfallBC.conventional import (
    ConvParams,
    ConvPeriod,
    apply_loci,
    apply_qm,
    calibrate_loci,
    calibrate_qm,
    mean_excess,
    quantile_map,
)
from RainfallBC.core import DailySeries, PeriodScheme, rain_indicator
from RainfallBC.enums import Method
from RainfallBC.errors import ConfigError
from RainfallBC.stats import GammaParams

from .conftest import series

T_X = 0.85


def loci_params(threshold: float, scale: float) -> ConvParams:
    return ConvParams(Method.LOCI, T_X, {1: ConvPeriod(threshold, scale)})


def test_apply_loci_example(single_period: PeriodScheme) -> None:
    model = series(date(2000, 1, 1), 4.0, 1.0, 2.0, None)
    corrected = apply_loci(model, loci_params(2.0, 1.5), single_period)

    assert corrected.values[0] == pytest.approx(3.85)
    assert corrected.values[1] == 0.0
    assert corrected.values[2] == T_X
    assert np.isnan(corrected.values[3])


def test_apply_loci_keeps_wet_days_above_threshold(single_period: PeriodScheme) -> None:
    model = series(date(2000, 1, 1), 2.0 + 1e-12, 2.5)
    corrected = apply_loci(model, loci_params(2.0, 1e-9), single_period)

    assert (corrected.values > T_X).all()


def test_apply_rejects_uncovered_period() -> None:
    params = loci_params(1.0, 1.0)
    model = series(date(2000, 2, 1), 3.0)

    with pytest.raises(ConfigError):
        apply_loci(model, params, PeriodScheme.monthly())


def test_loci_matches_frequency_and_mean_excess(
    seasonal_pair: tuple[DailySeries, DailySeries]
) -> None:
    obs, model = seasonal_pair
    scheme = PeriodScheme.default()
    params = calibrate_loci(obs, model, scheme, T_X)
    corrected = apply_loci(model, params, scheme)
    periods = scheme.periods_of(obs)
    both = obs.present & model.present

    for m, period in params.periods.items():
        sel = both & (periods == m)
        x, y = obs.values[sel], corrected.values[sel]
        wet_obs = (x > T_X).mean()
        wet_corrected = (y > T_X).mean()

        assert abs(wet_corrected - wet_obs) <= 1 / sel.sum() + 1e-12
        assert mean_excess(y, T_X) == pytest.approx(mean_excess(x, T_X), rel=1e-9)
        assert period.obs_wet_fraction == pytest.approx(wet_obs)


def test_loci_self_calibration(single_period: PeriodScheme) -> None:
    values = np.random.default_rng(3).uniform(0.0, 10.0, 5000)
    obs = DailySeries(date(2000, 1, 1), values)
    period = calibrate_loci(obs, obs, single_period, T_X).period(1)
    below = values[values <= T_X]

    # one order statistic below T_X at most
    assert period.threshold_ty == below.max()
    assert period.loci_scale == pytest.approx(1.0, abs=5e-3)


def test_apply_qm_identical_gammas_shifts_excess(single_period: PeriodScheme) -> None:
    gamma = GammaParams(0.8, 5.0)
    params = ConvParams(Method.QM, T_X, {1: ConvPeriod(2.0, 1.0, None, None, 0, gamma, gamma)})
    corrected = apply_qm(series(date(2000, 1, 1), 2.5, 12.0), params, single_period)

    assert corrected.values == pytest.approx([T_X + 0.5, T_X + 10.0], rel=1e-8)


def test_loci_empty_period_falls_back(single_period: PeriodScheme) -> None:
    obs = series(date(2000, 1, 1), None, None)
    model = series(date(2000, 1, 1), 1.0, 2.0)
    params = calibrate_loci(obs, model, single_period)

    assert params.period(1).threshold_ty == T_X
    assert params.period(1).loci_scale == 1.0
    assert params.warnings


def test_quantile_map_between_identical_distributions_is_identity() -> None:
    gamma = GammaParams(0.8, 7.0)
    excess = np.array([0.1, 1.0, 10.0, 50.0])
    mapped, saturated = quantile_map(excess, gamma, gamma)

    assert mapped == pytest.approx(excess, rel=1e-8)
    assert saturated == 0


def test_quantile_map_clamps_saturated_values() -> None:
    mapped, saturated = quantile_map(
        np.array([1e4]), GammaParams(1.0, 1.0), GammaParams(1.0, 2.0)
    )

    assert saturated == 1
    assert np.isfinite(mapped).all()


def test_apply_qm_maps_excess(single_period: PeriodScheme) -> None:
    obs_gamma, model_gamma = GammaParams(1.0, 4.0), GammaParams(1.0, 2.0)
    period = ConvPeriod(1.0, 2.0, gamma_obs=obs_gamma, gamma_model=model_gamma)
    params = ConvParams(Method.QM, T_X, {1: period})
    model = series(date(2000, 1, 1), 3.0, 1.0, 0.2)
    corrected = apply_qm(model, params, single_period)

    # exponential to exponential mapping doubles the excess
    assert corrected.values[0] == pytest.approx(T_X + 4.0)
    assert corrected.values[1:].tolist() == [0.0, 0.0]


def test_apply_qm_without_gammas_scales(single_period: PeriodScheme) -> None:
    params = ConvParams(Method.QM, T_X, {1: ConvPeriod(2.0, 1.5)})
    model = series(date(2000, 1, 1), 4.0)

    assert apply_qm(model, params, single_period).values[0] == pytest.approx(3.85)


def test_qm_calibration_fits_both_sides(seasonal_pair: tuple[DailySeries, DailySeries]) -> None:
    obs, model = seasonal_pair
    scheme = PeriodScheme.default()
    params = calibrate_qm(obs, model, scheme, T_X)
    corrected = apply_qm(model, params, scheme)

    assert all(period.has_gammas for period in params.periods.values())
    assert corrected.n_present == model.n_present
    assert ((corrected.values == 0) | (corrected.values > T_X)).all()

    obs_wet = rain_indicator(obs, T_X).wet.mean()
    corrected_wet = rain_indicator(corrected, T_X).wet.mean()
    assert corrected_wet == pytest.approx(obs_wet, abs=0.01)


def test_qm_small_sample_falls_back(single_period: PeriodScheme) -> None:
    obs = series(date(2000, 1, 1), 0.0, 2.0, 3.0, 0.0)
    model = series(date(2000, 1, 1), 0.5, 1.0, 4.0, 0.1)
    params = calibrate_qm(obs, model, single_period, T_X)

    assert not params.period(1).has_gammas
    assert any("falling back" in w for w in params.warnings)


def test_params_json_restores(seasonal_pair: tuple[DailySeries, DailySeries]) -> None:
    obs, model = seasonal_pair
    scheme = PeriodScheme.default()
    params = calibrate_qm(obs, model, scheme, T_X, map_raw_values=True)
    restored = ConvParams.from_dict(params.to_dict())

    assert restored.map_raw_values
    assert restored.to_dict() == params.to_dict()
    assert apply_qm(model, restored, scheme) == apply_qm(model, params, scheme)
