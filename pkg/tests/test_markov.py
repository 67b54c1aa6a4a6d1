from __future__ import annotations

import json
from datetime import date

import numpy as np
import pytest

from RainfallBC.core import DailySeries, PeriodScheme, lagged_state, rain_indicator
from RainfallBC.enums import Method, WetState
from RainfallBC.errors import ConfigError, DegenerateSampleError
from RainfallBC.markov import (
    CalibrationConfig,
    McAmountParams,
    McParams,
    McThresholds,
    PeriodAmounts,
    PeriodSample,
    PeriodThresholds,
    TransitionTargets,
    apply_mc_loci,
    apply_mc_qm,
    calibrate_markov,
    calibrate_mc_thresholds,
    conditional_frequencies,
    estimate_transition_targets,
    generate_indicator,
    stationarity_p0,
    total_probability_p0,
)
from RainfallBC.stats import GammaParams

from .conftest import series

T_X = 0.85
W, D, M = int(WetState.WET), int(WetState.DRY), int(WetState.MISSING)
RAINY_SEASON = (10, 11, 12, 1, 2, 3)


def test_stationarity_p0() -> None:
    assert stationarity_p0(0.5, 0.25) == pytest.approx(1 / 3)
    assert stationarity_p0(0.6, 0.2) == pytest.approx(1 / 3)

    with pytest.raises(DegenerateSampleError):
        stationarity_p0(1.0, 0.0)


def test_conditional_frequencies_skip_missing_lags() -> None:
    freq = conditional_frequencies([W, W, D, W, M, D], [M, W, W, D, W, M])

    assert (freq.n0, freq.nw, freq.nd) == (5, 2, 1)
    assert freq.p0 == pytest.approx(3 / 5)
    assert freq.pw == pytest.approx(1 / 2)
    assert freq.pd == 1.0


def test_law_of_total_probability(seasonal_pair: tuple[DailySeries, DailySeries]) -> None:
    indicator = rain_indicator(seasonal_pair[0], T_X)
    lags = lagged_state(indicator)
    freq = conditional_frequencies(indicator.states, lags)
    conditioned = indicator.present & (lags != M)

    assert total_probability_p0(freq) == pytest.approx(
        indicator.wet[conditioned].mean(), abs=1e-12
    )


def test_targets_recover_generator_probabilities(
    constant_pair: tuple[DailySeries, DailySeries], single_period: PeriodScheme
) -> None:
    indicator = rain_indicator(constant_pair[0], T_X)
    targets = estimate_transition_targets(indicator, lagged_state(indicator), single_period, 1)

    assert targets.pw == pytest.approx(0.6, abs=0.02)
    assert targets.pd == pytest.approx(0.2, abs=0.02)
    assert targets.stationary_p0 == pytest.approx(1 / 3, abs=0.02)
    assert targets.p0 == pytest.approx(1 / 3, abs=0.02)


def test_targets_condition_on_day_before_period() -> None:
    indicator = rain_indicator(series(date(2000, 1, 31), 5.0, 5.0, 0.0), T_X)
    targets = estimate_transition_targets(
        indicator, lagged_state(indicator), PeriodScheme.monthly(), 2
    )

    # 1 February is conditioned on 31 January
    assert (targets.nw, targets.nd) == (2, 0)
    assert targets.pw == 0.5
    assert targets.pd is None
    assert targets.stationary_p0 is None


def thresholds(t0: float, tw: float, td: float) -> McThresholds:
    return McThresholds({1: PeriodThresholds(1, t0, tw, td)})


def test_generate_indicator_switches_threshold(single_period: PeriodScheme) -> None:
    model = series(date(2000, 1, 1), 3.0, 1.0, 3.0)
    indicator = generate_indicator(model, thresholds(2.0, 2.5, 1.5), single_period)

    assert indicator.states.tolist() == [W, D, W]


def test_generate_indicator_restarts_after_missing(single_period: PeriodScheme) -> None:
    model = series(date(2000, 1, 1), 3.0, None, 1.8)
    indicator = generate_indicator(model, thresholds(2.0, 1.0, 1.5), single_period)

    # after a missing day the unconditional threshold applies
    assert indicator.states.tolist() == [W, M, D]


def test_generate_indicator_restarts_each_block(single_period: PeriodScheme) -> None:
    model = series(date(2000, 1, 1), 3.0, 1.8, 1.8, 1.8)
    params = thresholds(2.0, 2.5, 1.5)

    continuous = generate_indicator(model, params, single_period, D)
    blocks = generate_indicator(model, params, single_period, {0: D, 2: W})

    assert continuous.states.tolist() == [W, D, W, D]
    assert blocks.states.tolist() == [W, D, D, W]

    with pytest.raises(ConfigError):
        generate_indicator(model, params, single_period, {4: W})


def test_period_blocks_start_from_the_gauge_lag() -> None:
    obs = series(date(2000, 1, 30), 0.0, 5.0, 0.0, 0.0)
    model = series(date(2000, 1, 30), 5.0, 0.0, 5.0, 5.0)
    lags = lagged_state(rain_indicator(obs, T_X))
    sample = PeriodSample.build(model, PeriodScheme.monthly(), 2, carry_in=lags)

    assert sample.positions.tolist() == [2, 3]
    # the model was dry on 31 January, the gauge wet
    assert sample.carry_in == {0: W}


def test_calibration_config() -> None:
    cfg = CalibrationConfig.from_dict({"lambda": 0.5, "epsilon": 0.02})

    assert cfg.damping == 0.5
    assert cfg.to_dict()["lambda"] == 0.5
    assert CalibrationConfig.from_dict(cfg.to_dict()) == cfg

    with pytest.raises(ConfigError):
        CalibrationConfig(damping=0.0)


def calibration_sample(
    pair: tuple[DailySeries, DailySeries], scheme: PeriodScheme, m: int
) -> tuple[TransitionTargets, PeriodSample]:
    obs, model = pair
    indicator = rain_indicator(obs, T_X)
    lags = lagged_state(indicator)
    targets = estimate_transition_targets(indicator, lags, scheme, m)
    return targets, PeriodSample.build(model, scheme, m, carry_in=lags)


def test_rainy_season_thresholds_converge(seasonal_pair: tuple[DailySeries, DailySeries]) -> None:
    scheme = PeriodScheme.default()
    cfg = CalibrationConfig()

    for month in RAINY_SEASON:
        m = scheme.period_of_month(month)
        targets, sample = calibration_sample(seasonal_pair, scheme, m)
        result = calibrate_mc_thresholds(seasonal_pair[1], targets, scheme, cfg, sample=sample)

        assert result.converged, result.warnings
        assert result.iterations <= cfg.max_iterations
        assert abs(result.achieved_pw - targets.pw) < cfg.epsilon
        assert abs(result.achieved_pd - targets.pd) < cfg.epsilon

        # the achieved probabilities are those of the returned thresholds
        freq = sample.evaluate(result.t0, result.tw, result.td)
        assert (freq.pw, freq.pd) == (result.achieved_pw, result.achieved_pd)


def grid_search_error(
    sample: PeriodSample, t0: float, targets: TransitionTargets, grid: np.ndarray
) -> float:
    """Smallest max(|pw - target|, |pd - target|) over every (tw, td) pair of the grid."""
    tw, td = np.meshgrid(grid, grid, indexing="ij")
    prev = np.full(tw.shape, M)
    n_w, wet_w, n_d, wet_d = (np.zeros(tw.shape) for _ in range(4))

    for i, value in enumerate(sample.y.tolist()):
        if i in sample.carry_in:
            prev = np.full(tw.shape, sample.carry_in[i])

        if value != value:
            prev = np.full(tw.shape, M)
            continue

        threshold = np.where(prev == W, tw, np.where(prev == D, td, t0))
        wet = value > threshold
        n_w += prev == W
        wet_w += (prev == W) & wet
        n_d += prev == D
        wet_d += (prev == D) & wet
        prev = np.where(wet, W, D)

    with np.errstate(divide="ignore", invalid="ignore"):
        error = np.fmax(np.abs(wet_w / n_w - targets.pw), np.abs(wet_d / n_d - targets.pd))

    return float(np.min(np.where(np.isnan(error), np.inf, error)))


@pytest.mark.parametrize("month", [1, 11, 3])
def test_fixed_point_no_worse_than_grid_search(
    seasonal_pair: tuple[DailySeries, DailySeries], month: int
) -> None:
    scheme = PeriodScheme.default()
    cfg = CalibrationConfig()
    m = scheme.period_of_month(month)
    targets, sample = calibration_sample(seasonal_pair, scheme, m)
    result = calibrate_mc_thresholds(seasonal_pair[1], targets, scheme, cfg, sample=sample)

    grid = np.linspace(0.0, float(np.quantile(sample.y, 0.99)), 200)
    best = grid_search_error(sample, result.t0, targets, grid)
    achieved = max(abs(result.achieved_pw - targets.pw), abs(result.achieved_pd - targets.pd))

    assert achieved <= best + cfg.epsilon


def test_missing_conditional_target_freezes(single_period: PeriodScheme) -> None:
    model = DailySeries(date(2000, 1, 1), np.random.default_rng(2).uniform(0, 10, 2000))
    targets = TransitionTargets(1, 0.3, None, 0.3, 2000, 0, 1500)
    result = calibrate_mc_thresholds(model, targets, single_period)

    assert result.frozen_w
    assert not result.frozen_d
    assert result.tw == result.t0
    assert not result.converged
    assert any("frozen" in w for w in result.warnings)


def branch_example() -> tuple[DailySeries, McThresholds, PeriodScheme]:
    # starts on the first day of the dry season, so day 0 is unconditional
    model = series(date(2000, 4, 1), 5.0, 4.0, 0.5, 4.0, None, 3.0)
    return model, thresholds(2.0, 2.0, 1.0), PeriodScheme((1,) * 12)


def test_apply_mc_loci_branches() -> None:
    model, thr, scheme = branch_example()
    amounts = McAmountParams({1: PeriodAmounts(s=1.0, sw=1.5, sd=2.0)})
    corrected = apply_mc_loci(model, thr, amounts, scheme, T_X)

    assert corrected.to_list() == pytest.approx([3.85, 3.85, 0.0, 6.85, None, 1.85])


def test_apply_mc_loci_dry_excess_from_tw() -> None:
    model, thr, scheme = branch_example()
    amounts = McAmountParams({1: PeriodAmounts(s=1.0, sw=1.5, sd=2.0)})
    corrected = apply_mc_loci(model, thr, amounts, scheme, T_X, dry_excess_from_tw=True)

    assert corrected.values[3] == pytest.approx(T_X + 2.0 * (4.0 - 2.0))


def test_apply_mc_qm_identical_gammas_shift_excess() -> None:
    model, thr, scheme = branch_example()
    gamma = GammaParams(0.9, 6.0)
    amounts = McAmountParams(
        {1: PeriodAmounts(**{name: gamma for name in PeriodAmounts.GAMMA_FIELDS})}
    )
    corrected = apply_mc_qm(model, thr, amounts, scheme, T_X)

    assert corrected.to_list() == pytest.approx([3.85, 2.85, 0.0, 3.85, None, 1.85], rel=1e-8)


def test_mc_params_json_restores(seasonal_pair: tuple[DailySeries, DailySeries]) -> None:
    obs, model = seasonal_pair
    scheme = PeriodScheme.default()
    params = calibrate_markov(obs, model, scheme, quantile=True)
    restored = McParams.from_dict(json.loads(json.dumps(params.to_dict())))

    assert restored.method is Method.MC_QM
    assert restored.to_dict() == params.to_dict()
    assert restored.apply(model, scheme) == params.apply(model, scheme)


def test_mc_correction_keeps_rain_days_above_threshold(
    seasonal_pair: tuple[DailySeries, DailySeries]
) -> None:
    obs, model = seasonal_pair
    scheme = PeriodScheme.default()

    for quantile in (False, True):
        corrected = calibrate_markov(obs, model, scheme, quantile=quantile).apply(model, scheme)
        values = corrected.values

        assert corrected.n_present == model.n_present
        assert ((values == 0) | (values >= T_X)).all()
