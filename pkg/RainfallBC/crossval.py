from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field
from datetime import date

import numpy as np
from typing_extensions import Self

from .core import DEFAULT_VARS, CorrectionVars, DailySeries, PeriodScheme
from .enums import Method
from .errors import BiasCorrectionError, ConfigError
from .markov import CalibrationConfig
from .methods import AnyParams, apply, calibrate

logger = logging.getLogger(f"main.{__name__}")

Block = tuple[date, date]


@dataclass(frozen=True, slots=True)
class BlockScheme:
    """Ordered, disjoint date blocks, both ends inclusive."""

    blocks: tuple[Block, ...]

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ConfigError("Block scheme needs at least one block")

        for first, last in self.blocks:
            if first > last:
                raise ConfigError(f"Block {first}..{last} ends before it starts")

        for (_, prev_last), (next_first, _) in zip(self.blocks, self.blocks[1:]):
            if next_first <= prev_last:
                raise ConfigError(
                    f"Blocks must be ordered and disjoint, {next_first} <= {prev_last}"
                )

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> t.Iterator[Block]:
        return iter(self.blocks)

    def __str__(self) -> str:
        return ", ".join(f"{first.year}-{last.year}" for first, last in self.blocks)

    @classmethod
    def default(cls) -> Self:
        # fmt: off
        return cls((
            (date(1979, 1, 1), date(1988, 12, 31)),
            (date(1989, 1, 1), date(1998, 12, 31)),
            (date(1999, 1, 1), date(2008, 12, 31)),
            (date(2009, 1, 1), date(2023, 12, 31)),
        ))
        # fmt: on

    @classmethod
    def equal_years(cls, first_year: int, last_year: int, n_blocks: int) -> Self:
        """Splits whole calendar years into `n_blocks` blocks, the last taking the remainder."""
        n_years = last_year - first_year + 1

        if not 1 <= n_blocks <= n_years:
            raise ConfigError(f"Cannot split {n_years} years into {n_blocks} blocks")

        size = n_years // n_blocks
        starts = [first_year + i * size for i in range(n_blocks)] + [last_year + 1]
        return cls(
            tuple((date(a, 1, 1), date(b - 1, 12, 31)) for a, b in zip(starts, starts[1:]))
        )

    def mask(self, series: DailySeries, index: int, /) -> np.ndarray:
        """Days of a series falling inside one block."""
        first, last = self.blocks[index]
        dates = series.dates
        return (dates >= np.datetime64(first, "D")) & (dates <= np.datetime64(last, "D"))

    @classmethod
    def from_dict(cls, json: t.Sequence[t.Sequence[str]], /) -> Self:
        try:
            blocks = tuple((date.fromisoformat(a), date.fromisoformat(b)) for a, b in json)

        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid block list: {e}") from None

        return cls(blocks)

    def to_dict(self) -> list[list[str]]:
        return [[first.isoformat(), last.isoformat()] for first, last in self.blocks]


@dataclass(slots=True)
class CrossValResult:
    """Stitched held-out corrections with the parameters used for each block.

    A block whose calibration failed has None parameters and stays missing."""

    corrected: DailySeries
    fold_params: list[AnyParams | None]
    warnings: list[str] = field(default_factory=list)


def run_crossval(
    obs: DailySeries,
    model: DailySeries,
    method: Method,
    blocks: BlockScheme,
    scheme: PeriodScheme,
    *,
    vars: CorrectionVars = DEFAULT_VARS,
    cfg: CalibrationConfig | None = None,
) -> CrossValResult:
    """Block cross-validation.

    For every block, the method is calibrated on the other blocks (the held-out block
    and any day outside the scheme masked in both series) and applied to the held-out
    model segment alone, so the Markov recursion starts afresh at that block. The
    corrected segments are stitched over the model's date range; days outside every
    block stay missing.

    Parameters
    -----------
    obs:
        Gauge series.
    model:
        Model series; its date range is the output's.
    method:
        Correction method.
    blocks:
        The held-out blocks.
    scheme:
        Calibration periods.
    """
    out = np.full(len(model), np.nan)
    in_scheme = np.zeros(len(model), dtype=bool)
    masks = [blocks.mask(model, b) for b in range(len(blocks))]

    for mask in masks:
        in_scheme |= mask

    obs_masks = [blocks.mask(obs, b) for b in range(len(blocks))]
    obs_outside = ~np.logical_or.reduce(obs_masks)
    result = CrossValResult(model, [])

    for b, (first, last) in enumerate(blocks):
        held_out = masks[b]

        if not held_out.any():
            result.warnings.append(f"block {first}..{last}: no model days, skipped")
            result.fold_params.append(None)
            continue

        train_obs = obs.masked(obs_masks[b] | obs_outside)
        train_model = model.masked(held_out | ~in_scheme)
        start, stop = np.flatnonzero(held_out)[[0, -1]]
        segment = model.take(int(start), int(stop) + 1)

        try:
            params = calibrate(method, train_obs, train_model, scheme, vars=vars, cfg=cfg)
            out[start : stop + 1] = apply(params, segment, scheme).values

        except BiasCorrectionError as e:
            result.warnings.append(f"block {first}..{last}: {e}, left missing")
            result.fold_params.append(None)
            continue

        result.fold_params.append(params)
        logger.info("Cross-validated %s on block %s..%s", method.label, first, last)

    for warning in result.warnings:
        logger.warning(warning)

    result.corrected = model.with_values(out)
    return result
