from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from RainfallBC.core import (
    CorrectionVars,
    DailySeries,
    IndicatorSeries,
    PeriodScheme,
    align,
    common_mask,
    initialisation_index,
    lagged_state,
    period_blocks,
    rain_indicator,
    subset_period,
)
from RainfallBC.enums import RainCategory, WetState
from RainfallBC.errors import ConfigError, SeriesError

from .conftest import series

W, D, M = WetState.WET, WetState.DRY, WetState.MISSING


def test_series_rejects_negative_and_infinite_values() -> None:
    with pytest.raises(SeriesError):
        series(date(2000, 1, 1), 1.0, -0.5)

    with pytest.raises(SeriesError):
        DailySeries(date(2000, 1, 1), np.array([1.0, np.inf]))


def test_series_is_read_only_copy() -> None:
    values = np.array([1.0, 2.0])
    s = DailySeries(date(2000, 1, 1), values)
    values[0] = 5.0

    assert s.values[0] == 1.0
    with pytest.raises(ValueError):
        s.values[1] = 3.0


def test_calendar_accessors() -> None:
    s = series(date(2000, 2, 28), 1.0, 2.0, None)

    assert s.end_date == date(2000, 3, 1)
    assert s.months.tolist() == [2, 2, 3]
    assert s.days.tolist() == [28, 29, 1]
    assert s.years.tolist() == [2000] * 3
    assert s.n_present == 2
    assert s.to_list() == [1.0, 2.0, None]


def test_between_clips_to_series() -> None:
    s = series(date(2000, 1, 1), 0.0, 1.0, 2.0, 3.0)
    part = s.between(date(1999, 12, 1), date(2000, 1, 2))

    assert part.start_date == date(2000, 1, 1)
    assert part.to_list() == [0.0, 1.0]


def test_rain_indicator_threshold_is_strict() -> None:
    s = series(date(2000, 1, 1), 0.0, 0.9, None, 0.85)
    assert rain_indicator(s, 0.85).to_list() == [D, W, M, D]


def test_rain_indicator_rejects_negative_threshold() -> None:
    with pytest.raises(ValueError):
        rain_indicator(series(date(2000, 1, 1), 1.0), -1.0)


def test_lagged_state_shifts_by_one_day() -> None:
    indicator = IndicatorSeries(date(2000, 1, 1), np.array([W, D, W]))
    assert lagged_state(indicator).tolist() == [M, W, D]


def test_indicator_rejects_unknown_states() -> None:
    with pytest.raises(SeriesError):
        IndicatorSeries(date(2000, 1, 1), np.array([0, 2]))


def test_default_scheme_pools_the_dry_season() -> None:
    scheme = PeriodScheme.default()

    assert scheme.n_periods == 8
    assert scheme.months_in(5) == (5, 6, 7, 8, 9)
    assert scheme.label(5) == "May-Sep"
    assert scheme.label(1) == "Jan"


@pytest.mark.parametrize(
    "month_to_period",
    [(1,) * 11, (1, 3) + (1,) * 10, (0,) + (1,) * 11],
)
def test_scheme_validation(month_to_period: tuple[int, ...]) -> None:
    with pytest.raises(ConfigError):
        PeriodScheme(month_to_period)


def test_scheme_from_dict_accepts_mapping_and_list() -> None:
    as_list = PeriodScheme.from_dict({"month_to_period": list(range(1, 13))})
    as_mapping = PeriodScheme.from_dict(PeriodScheme.monthly().to_dict())

    assert as_list == as_mapping == PeriodScheme.monthly()
    assert PeriodScheme.from_dict({}) == PeriodScheme.default()


def test_subset_period_keeps_blocks_apart() -> None:
    s = DailySeries(date(2000, 12, 30), np.arange(367, dtype=float))
    scheme = PeriodScheme.monthly()
    blocks = subset_period(s, scheme, 12)

    assert [len(block) for block in blocks] == [2, 31]
    assert blocks[1].start_date == date(2001, 12, 1)
    assert period_blocks(s, scheme, 1) == [(2, 33)]


def test_subset_period_unknown_period() -> None:
    s = series(date(2000, 1, 1), 1.0)

    with pytest.raises(KeyError):
        subset_period(s, PeriodScheme.default(), 9)


def test_align_and_common_mask() -> None:
    a = series(date(2000, 1, 1), 1.0, None, 3.0, 4.0)
    b = series(date(2000, 1, 2), 2.0, 3.0, None, 5.0)
    a, b = align(a, b)

    assert a.start_date == b.start_date == date(2000, 1, 2)
    assert common_mask(a, b).tolist() == [False, True, False]

    with pytest.raises(SeriesError):
        align(series(date(2000, 1, 1), 1.0), series(date(2001, 1, 1), 1.0))


def test_initialisation_index_finds_dry_season_start() -> None:
    s = DailySeries(date(2000, 3, 30), np.zeros(5))
    scheme = PeriodScheme.default()

    assert initialisation_index(s, scheme) == 2
    assert initialisation_index(series(date(2000, 1, 1), 0.0), scheme) == 0


def test_correction_vars_from_dict_defaults() -> None:
    vars = CorrectionVars.from_dict({"t_x": 1.0})

    assert vars.T_X == 1.0
    assert vars.MIN_FIT_N == 10
    assert CorrectionVars.from_dict(vars.to_dict()) == vars


def test_correction_vars_accept_alternate_switch_names() -> None:
    vars = CorrectionVars.from_dict({"qm_literal_eq4": True, "literal_eq17": True})

    assert vars.QM_MAP_RAW_VALUES
    assert vars.DRY_EXCESS_FROM_TW
    assert CorrectionVars.from_dict(vars.to_dict()) == vars
    both = CorrectionVars.from_dict({"literal_eq17": True, "dry_excess_from_tw": 1})
    assert both.DRY_EXCESS_FROM_TW

    with pytest.raises(ConfigError):
        CorrectionVars.from_dict({"qm_map_raw_values": True, "qm_literal_eq4": False})



@pytest.mark.parametrize(
    "value, category",
    [
        (0.0, RainCategory.DRY),
        (0.85, RainCategory.LIGHT),
        (4.9, RainCategory.LIGHT),
        (5.0, RainCategory.MODERATE),
        (20.0, RainCategory.HEAVY),
        (40.0, RainCategory.VIOLENT),
    ],
)
def test_rain_categories_are_half_open(value: float, category: RainCategory) -> None:
    assert RainCategory.of(value) is category
    assert RainCategory.categorize([value])[0] == category.index


def test_categorize_marks_missing() -> None:
    assert RainCategory.categorize([np.nan, 0.5]).tolist() == [-1, 0]
