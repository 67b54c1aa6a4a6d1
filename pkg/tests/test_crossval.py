from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from RainfallBC.core import DailySeries, PeriodScheme
from RainfallBC.crossval import BlockScheme, run_crossval
from RainfallBC.enums import Method
from RainfallBC.errors import ConfigError
from RainfallBC.methods import apply, calibrate, dump_params

BLOCKS = BlockScheme.equal_years(1974, 1985, 3)


@pytest.fixture(scope="module")
def pair(seasonal_pair: tuple[DailySeries, DailySeries]) -> tuple[DailySeries, DailySeries]:
    obs, model = seasonal_pair
    return obs.between(date(1974, 1, 1), date(1985, 12, 31)), model.between(
        date(1973, 1, 1), date(1986, 6, 30)
    )


def test_equal_years_blocks() -> None:
    assert BLOCKS.to_dict() == [
        ["1974-01-01", "1977-12-31"],
        ["1978-01-01", "1981-12-31"],
        ["1982-01-01", "1985-12-31"],
    ]
    last = BlockScheme.equal_years(2000, 2004, 2).blocks[-1]
    assert last == (date(2002, 1, 1), date(2004, 12, 31))

    with pytest.raises(ConfigError):
        BlockScheme.equal_years(2000, 2001, 3)


def test_blocks_must_be_ordered_and_disjoint() -> None:
    with pytest.raises(ConfigError):
        BlockScheme.from_dict([["2000-01-01", "2001-12-31"], ["2001-06-01", "2002-12-31"]])

    with pytest.raises(ConfigError):
        BlockScheme.from_dict([["2001-01-01", "2000-12-31"]])

    with pytest.raises(ConfigError):
        BlockScheme.from_dict([["2001-13-01", "2002-01-01"]])


@pytest.mark.parametrize("method", list(Method))
def test_held_out_block_never_reaches_its_parameters(
    pair: tuple[DailySeries, DailySeries], method: Method
) -> None:
    obs, model = pair
    scheme = PeriodScheme.default()
    result = run_crossval(obs, model, method, BLOCKS, scheme)

    # rewriting the held-out block of both series leaves the fold untouched
    held_out = BLOCKS.mask(obs, 1)
    noisy_obs = obs.with_values(np.where(held_out, obs.values * 3 + 1, obs.values))
    held_out = BLOCKS.mask(model, 1)
    noisy_model = model.with_values(np.where(held_out, model.values[::-1], model.values))
    perturbed = run_crossval(noisy_obs, noisy_model, method, BLOCKS, scheme)

    assert dump_params(result.fold_params[1]) == dump_params(perturbed.fold_params[1])
    assert dump_params(result.fold_params[0]) != dump_params(perturbed.fold_params[0])


def test_stitched_output_covers_blocks_only(pair: tuple[DailySeries, DailySeries]) -> None:
    obs, model = pair
    scheme = PeriodScheme.default()
    result = run_crossval(obs, model, Method.LOCI, BLOCKS, scheme)
    corrected = result.corrected
    inside = np.logical_or.reduce([BLOCKS.mask(model, b) for b in range(len(BLOCKS))])

    assert corrected.start_date == model.start_date
    assert len(corrected) == len(model)
    assert np.isnan(corrected.values[~inside]).all()
    assert not np.isnan(corrected.values[inside]).any()
    assert len(result.fold_params) == 3


def test_each_block_is_corrected_on_its_own(pair: tuple[DailySeries, DailySeries]) -> None:
    obs, model = pair
    scheme = PeriodScheme.default()
    result = run_crossval(obs, model, Method.MC_LOCI, BLOCKS, scheme)
    first, last = BLOCKS.blocks[2]
    segment = model.between(first, last)
    expected = apply(result.fold_params[2], segment, scheme)

    assert result.corrected.between(first, last) == expected


def test_fold_matches_manual_calibration(pair: tuple[DailySeries, DailySeries]) -> None:
    obs, model = pair
    scheme = PeriodScheme.default()
    result = run_crossval(obs, model, Method.QM, BLOCKS, scheme)

    train_obs = obs.masked(BLOCKS.mask(obs, 0))
    train_model = model.masked(~(BLOCKS.mask(model, 1) | BLOCKS.mask(model, 2)))
    params = calibrate(Method.QM, train_obs, train_model, scheme)

    assert dump_params(params) == dump_params(result.fold_params[0])


def test_block_without_days_is_skipped(pair: tuple[DailySeries, DailySeries]) -> None:
    obs, model = pair
    blocks = BlockScheme.from_dict(
        [["1974-01-01", "1979-12-31"], ["1980-01-01", "1985-12-31"], ["1990-01-01", "1991-12-31"]]
    )
    result = run_crossval(obs, model, Method.LOCI, blocks, PeriodScheme.default())

    assert result.fold_params[2] is None
    assert any("no model days" in w for w in result.warnings)
