from __future__ import annotations

import typing as t
from dataclasses import dataclass, field, replace
from datetime import date, timedelta

import numpy as np
import numpy.typing as npt
import pandas as pd
from typing_extensions import Self

from utils import true_runs

from .enums import WetState
from .errors import ConfigError, SeriesError

FloatArray = npt.NDArray[np.float64]
StateArray = npt.NDArray[np.int8]

MONTH_ABBREVS: t.Final = (
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"
)


QM_TOGGLE_ALIAS: t.Final = "qm_literal_eq4"
DRY_TOGGLE_ALIAS: t.Final = "literal_eq17"


def read_toggle(json: t.Mapping[str, t.Any], keys: tuple[str, str], default: bool) -> bool:
    """Reads a boolean switch stored under either of two equivalent keys.

    Raises
    -------
    ConfigError
        Both keys are present with different values."""
    present = {bool(json[key]) for key in keys if key in json}

    if len(present) > 1:
        raise ConfigError(f"Conflicting values for {keys[0]!r} and {keys[1]!r}")

    return present.pop() if present else default


class CorrectionVars(t.NamedTuple):
    T_X: float = 0.85
    MIN_FIT_N: int = 10
    QM_MAP_RAW_VALUES: bool = False
    DRY_EXCESS_FROM_TW: bool = False

    @staticmethod
    def default() -> CorrectionVars:
        return DEFAULT_VARS

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> CorrectionVars:
        defaults = DEFAULT_VARS
        return cls(
            T_X=float(json.get("t_x", defaults.T_X)),
            MIN_FIT_N=int(json.get("min_fit_n", defaults.MIN_FIT_N)),
            QM_MAP_RAW_VALUES=read_toggle(
                json, ("qm_map_raw_values", QM_TOGGLE_ALIAS), defaults.QM_MAP_RAW_VALUES
            ),
            DRY_EXCESS_FROM_TW=read_toggle(
                json, ("dry_excess_from_tw", DRY_TOGGLE_ALIAS), defaults.DRY_EXCESS_FROM_TW
            ),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "t_x": self.T_X,
            "min_fit_n": self.MIN_FIT_N,
            "qm_map_raw_values": self.QM_MAP_RAW_VALUES,
            "dry_excess_from_tw": self.DRY_EXCESS_FROM_TW,
        }


DEFAULT_VARS = CorrectionVars()


class _Calendar:
    """Calendar accessors shared by day-indexed series."""

    __slots__ = ()
    start_date: date

    def __len__(self) -> int:
        return len(self._data)

    @property
    def _data(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def end_date(self) -> date:
        """The last day covered by the series."""
        return self.start_date + timedelta(days=len(self) - 1)

    @property
    def dates(self) -> npt.NDArray[np.datetime64]:
        return np.datetime64(self.start_date, "D") + np.arange(len(self))

    @property
    def day_index(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(self.dates.astype("datetime64[ns]"), name="date")

    @property
    def months(self) -> npt.NDArray[np.int64]:
        return self.dates.astype("datetime64[M]").astype(np.int64) % 12 + 1

    @property
    def years(self) -> npt.NDArray[np.int64]:
        return self.dates.astype("datetime64[Y]").astype(np.int64) + 1970

    @property
    def days(self) -> npt.NDArray[np.int64]:
        """Day of month of every element."""
        dates = self.dates
        return (dates - dates.astype("datetime64[M]")).astype(np.int64) + 1

    def index_of(self, day: date, /) -> int:
        """Returns the position of a date, which may lie outside the series."""
        return (day - self.start_date).days


@dataclass(frozen=True, slots=True, eq=False)
class DailySeries(_Calendar):
    """Daily rainfall in mm starting at `start_date`, one value per consecutive day.

    Missing days are NaN; the array is copied and made read-only on construction."""

    start_date: date
    values: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)

        if values.ndim != 1:
            raise SeriesError("Daily series must be one dimensional")

        if np.isinf(values).any():
            raise SeriesError("Daily series cannot contain infinite values")

        if (values[~np.isnan(values)] < 0).any():
            raise SeriesError("Daily series cannot contain negative rainfall")

        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __repr__(self) -> str:
        name = type(self).__name__
        return f"<{name} {self.start_date}..{self.end_date} present={self.n_present}>"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DailySeries):
            return NotImplemented

        return self.start_date == other.start_date and np.array_equal(
            self.values, other.values, equal_nan=True
        )

    @property
    def _data(self) -> np.ndarray:
        return self.values

    @property
    def present(self) -> npt.NDArray[np.bool_]:
        return ~np.isnan(self.values)

    @property
    def n_present(self) -> int:
        return int(self.present.sum())

    @classmethod
    def from_values(cls, start_date: date, values: t.Iterable[float | None], /) -> Self:
        """Creates a series from plain values, `None` marking a missing day."""
        return cls(start_date, np.array([np.nan if v is None else v for v in values], dtype=float))

    @classmethod
    def empty(cls, start_date: date, end_date: date, /) -> Self:
        """Creates an all missing series spanning the date range, inclusive."""
        return cls(start_date, np.full((end_date - start_date).days + 1, np.nan))

    def with_values(self, values: npt.ArrayLike, /) -> Self:
        return replace(self, values=values)

    def take(self, start: int, stop: int, /) -> Self:
        """Returns the days between two positions, stop exclusive."""
        start = max(start, 0)
        return type(self)(self.start_date + timedelta(days=start), self.values[start:stop])

    def between(self, first: date, last: date, /) -> Self:
        """Returns the days between two dates, both inclusive, clipped to the series."""
        return self.take(self.index_of(first), self.index_of(last) + 1)

    def masked(self, mask: npt.ArrayLike, /) -> Self:
        """Returns a copy with the days where `mask` is True set missing."""
        values = self.values.copy()
        values[np.asarray(mask, dtype=bool)] = np.nan
        return self.with_values(values)

    def to_list(self) -> list[float | None]:
        return [None if np.isnan(v) else float(v) for v in self.values]


@dataclass(frozen=True, slots=True, eq=False)
class IndicatorSeries(_Calendar):
    """Daily rain day states encoded with `WetState` integer values."""

    start_date: date
    states: StateArray = field(repr=False)

    def __post_init__(self) -> None:
        states = np.array(self.states, dtype=np.int8)

        if states.ndim != 1:
            raise SeriesError("Indicator series must be one dimensional")

        if not np.isin(states, tuple(WetState)).all():
            raise SeriesError("Indicator series contains unknown states")

        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndicatorSeries):
            return NotImplemented

        return self.start_date == other.start_date and np.array_equal(self.states, other.states)

    @property
    def _data(self) -> np.ndarray:
        return self.states

    @property
    def wet(self) -> npt.NDArray[np.bool_]:
        return self.states == WetState.WET

    @property
    def dry(self) -> npt.NDArray[np.bool_]:
        return self.states == WetState.DRY

    @property
    def present(self) -> npt.NDArray[np.bool_]:
        return self.states != WetState.MISSING

    def take(self, start: int, stop: int, /) -> Self:
        start = max(start, 0)
        return type(self)(self.start_date + timedelta(days=start), self.states[start:stop])

    def to_list(self) -> list[WetState]:
        return [WetState(s) for s in self.states]


AnySeries = t.TypeVar("AnySeries", DailySeries, IndicatorSeries)


@dataclass(frozen=True, slots=True)
class PeriodScheme:
    """Assignment of calendar months to calibration periods.

    `month_to_period[0]` is the period of January."""

    month_to_period: tuple[int, ...]
    dry_season_start_month: int = 4
    annual_year_start_month: int = 8

    def __post_init__(self) -> None:
        if len(self.month_to_period) != 12:
            raise ConfigError("Period scheme must assign all twelve months")

        ids = set(self.month_to_period)

        if ids != set(range(1, len(ids) + 1)):
            raise ConfigError(f"Period ids must cover 1..M without gaps, got {sorted(ids)}")

        for name in ("dry_season_start_month", "annual_year_start_month"):
            if not 1 <= getattr(self, name) <= 12:
                raise ConfigError(f"{name} must be a month number 1..12")

    def __str__(self) -> str:
        return ", ".join(f"{m}: {self.label(m)}" for m in self.periods)

    @classmethod
    def default(cls) -> Self:
        """October to April calibrated monthly, May to September pooled as one dry season."""
        return cls((1, 2, 3, 4, 5, 5, 5, 5, 5, 6, 7, 8))

    @classmethod
    def monthly(cls) -> Self:
        return cls(tuple(range(1, 13)))

    @property
    def n_periods(self) -> int:
        return max(self.month_to_period)

    @property
    def periods(self) -> range:
        return range(1, self.n_periods + 1)

    def period_of_month(self, month: int, /) -> int:
        return self.month_to_period[month - 1]

    def months_in(self, period: int, /) -> tuple[int, ...]:
        return tuple(month for month in range(1, 13) if self.period_of_month(month) == period)

    def label(self, period: int, /) -> str:
        months = self.months_in(period)

        if not months:
            raise KeyError(f"Period {period} not in scheme")

        if len(months) == 1:
            return MONTH_ABBREVS[months[0] - 1]

        return f"{MONTH_ABBREVS[months[0] - 1]}-{MONTH_ABBREVS[months[-1] - 1]}"

    def periods_of(self, series: _Calendar, /) -> npt.NDArray[np.int64]:
        """Returns the period id of every day of a series."""
        lookup = np.array((0,) + self.month_to_period)
        return lookup[series.months]

    def check_period(self, period: int, /) -> None:
        if period not in self.periods:
            raise KeyError(f"Period {period} not in scheme with {self.n_periods} periods")

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        mapping = json.get("month_to_period")

        if mapping is None:
            month_to_period = cls.default().month_to_period

        elif isinstance(mapping, t.Mapping):
            month_to_period = tuple(int(mapping[str(month)]) for month in range(1, 13))

        else:
            month_to_period = tuple(int(p) for p in mapping)

        return cls(
            month_to_period,
            dry_season_start_month=int(json.get("dry_season_start_month", 4)),
            annual_year_start_month=int(json.get("annual_year_start_month", 8)),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "month_to_period": {str(month): p for month, p in enumerate(self.month_to_period, 1)},
            "dry_season_start_month": self.dry_season_start_month,
            "annual_year_start_month": self.annual_year_start_month,
        }


def rain_indicator(series: DailySeries, threshold: float) -> IndicatorSeries:
    """Returns Wet where the value exceeds the threshold, Dry where it does not and
    Missing where the value is missing.

    Parameters
    -----------
    series:
        The daily rainfall.
    threshold:
        Rain day threshold in mm; a value equal to it is Dry."""
    if threshold < 0:
        raise ValueError("Rain day threshold cannot be negative")

    values = series.values
    states = np.where(values > threshold, WetState.WET, WetState.DRY).astype(np.int8)
    states[np.isnan(values)] = WetState.MISSING
    return IndicatorSeries(series.start_date, states)


def lagged_state(indicator: IndicatorSeries) -> StateArray:
    """Returns the state of the previous day for every day; the first day has no predecessor.

    Must be computed on the whole series before any period subsetting."""
    lagged = np.full(len(indicator), WetState.MISSING, dtype=np.int8)
    lagged[1:] = indicator.states[:-1]
    return lagged


def period_blocks(series: _Calendar, scheme: PeriodScheme, period: int) -> list[tuple[int, int]]:
    """Returns (start, stop) positions of each maximal run of days belonging to a period."""
    scheme.check_period(period)
    return true_runs(scheme.periods_of(series) == period)


def subset_period(series: AnySeries, scheme: PeriodScheme, period: int) -> list[AnySeries]:
    """Splits out the contiguous blocks of a period, one per season occurrence.

    Blocks never cross a period boundary, so wet-dry dependence stays within each block."""
    return [series.take(start, stop) for start, stop in period_blocks(series, scheme, period)]


def align(*series: DailySeries) -> list[DailySeries]:
    """Clips every series to the date range they have in common."""
    if not series:
        return []

    first = max(s.start_date for s in series)
    last = min(s.end_date for s in series)

    if first > last:
        raise SeriesError("Series have no dates in common")

    return [s.between(first, last) for s in series]


def common_mask(*series: DailySeries) -> npt.NDArray[np.bool_]:
    """Days present in every one of a set of aligned series."""
    mask = np.ones(len(series[0]), dtype=bool)

    for s in series:
        if len(s) != len(mask) or s.start_date != series[0].start_date:
            raise SeriesError("Series must be aligned to the same dates")

        mask &= s.present

    return mask


def initialisation_index(series: _Calendar, scheme: PeriodScheme) -> int:
    """Position of the first day falling in the dry season start month, 0 if there is none."""
    hits = np.flatnonzero(series.months == scheme.dry_season_start_month)
    return int(hits[0]) if hits.size else 0
