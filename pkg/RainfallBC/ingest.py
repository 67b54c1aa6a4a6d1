from __future__ import annotations

import io
import logging
import re
import typing as t
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np
import pandas as pd
from typing_extensions import Self

from utils import true_runs, value_runs

from .core import DailySeries
from .enums import QcAction, QcTest
from .errors import ConfigError, ParseError

logger = logging.getLogger(f"main.{__name__}")

ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
PARSER_LINE = re.compile(r"line (\d+)")
MISSING_TOKENS: t.Final = frozenset({"", "NA"})
FLAG_HEADER: t.Final = ("date", "test", "action", "detail")


@dataclass(frozen=True, slots=True)
class QcFlag:
    """A single quality control finding."""

    date: date
    test: QcTest
    action: QcAction
    detail: str = ""

    def to_row(self) -> tuple[str, str, str, str]:
        return (self.date.isoformat(), str(self.test), str(self.action), self.detail)


@dataclass(frozen=True, slots=True)
class QcConfig:
    max_rain_mm: float = 400.0
    flatline_min_run: int = 5
    max_consecutive_rain_days: int = 30
    false_zero_months: frozenset[int] = field(default=frozenset({11, 12, 1, 2, 3}))
    false_zero_action: QcAction = QcAction.SET_MISSING

    def __post_init__(self) -> None:
        limits = (self.max_rain_mm, self.flatline_min_run, self.max_consecutive_rain_days)

        if any(limit <= 0 for limit in limits):
            raise ConfigError("Quality control limits must be positive")

        if not all(1 <= month <= 12 for month in self.false_zero_months):
            raise ConfigError("False zero months must be month numbers 1..12")

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        default = cls()
        return cls(
            max_rain_mm=float(json.get("max_rain_mm", default.max_rain_mm)),
            flatline_min_run=int(json.get("flatline_min_run", default.flatline_min_run)),
            max_consecutive_rain_days=int(
                json.get("max_consecutive_rain_days", default.max_consecutive_rain_days)
            ),
            false_zero_months=frozenset(
                int(m) for m in json.get("false_zero_months", default.false_zero_months)
            ),
            false_zero_action=QcAction(json.get("false_zero_action", default.false_zero_action)),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "max_rain_mm": self.max_rain_mm,
            "flatline_min_run": self.flatline_min_run,
            "max_consecutive_rain_days": self.max_consecutive_rain_days,
            "false_zero_months": sorted(self.false_zero_months),
            "false_zero_action": self.false_zero_action.value,
        }


def _read_frame(text: str) -> tuple[pd.DataFrame, pd.Series]:
    # every cell as stripped text indexed by its line in the file, blank lines dropped,
    # and which of those lines lack the date or rain field
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            dtype=str,
            index_col=False,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=False,
        )

    except pd.errors.EmptyDataError:
        raise ParseError("File is empty", 1) from None

    except pd.errors.ParserError as error:
        match = PARSER_LINE.search(str(error))
        raise ParseError(
            f"Unexpected number of columns: {error}", int(match[1]) if match else None
        ) from None

    frame.columns = [str(column).strip().lower() for column in frame.columns]

    if not {"date", "rain"} <= set(frame.columns):
        raise ParseError("Header must contain columns `date` and `rain`", 1)

    frame.index = frame.index + 2
    absent = frame[["date", "rain"]].isna().any(axis=1)
    frame = frame.fillna("").apply(lambda column: column.str.strip())
    blank = (frame == "").all(axis=1)
    return frame[~blank], absent[~blank]


def _raise_first(problems: t.Sequence[tuple[pd.Series, t.Callable[[int], str]]]) -> None:
    # raises for the earliest line with a problem, the first listed problem of that line
    lines = [mask.index[mask.to_numpy()][0] for mask, _ in problems if mask.any()]

    if not lines:
        return

    line = min(lines)

    for mask, message in problems:
        if mask.get(line, False):
            raise ParseError(message(line), int(line))


def parse_station_csv_flagged(text: str, /) -> tuple[DailySeries, list[QcFlag]]:
    """Parses a station CSV leniently: negative rainfall is recorded as missing
    together with a Range flag instead of failing.

    Returns
    --------
    The gap filled daily series and the flags raised while parsing."""
    frame, absent = _read_frame(text)

    if frame.empty:
        raise ParseError("File contains no data rows")

    tokens, cells = frame["date"], frame["rain"]
    malformed = ~tokens.str.fullmatch(ISO_DATE.pattern)
    days = pd.to_datetime(tokens.where(~malformed), format="%Y-%m-%d", errors="coerce")
    invalid = ~malformed & days.isna()
    missing = cells.isin(MISSING_TOKENS)
    rain = pd.to_numeric(cells.where(~missing), errors="coerce").astype(np.float64)
    bad_value = ~missing & rain.isna()

    _raise_first(
        [
            (absent, lambda _: "Expected at least the `date` and `rain` columns"),
            (malformed, lambda i: f"Malformed date {tokens[i]!r}, expected YYYY-MM-DD"),
            (invalid, lambda i: f"Invalid calendar date {tokens[i]!r}"),
            (days.notna() & days.duplicated(), lambda i: f"Duplicate date {tokens[i]}"),
            (bad_value, lambda i: f"Malformed rainfall value {cells[i]!r}"),
            (~np.isfinite(rain.fillna(0.0)), lambda i: f"Non-finite rainfall value {cells[i]!r}"),
        ]
    )

    negative = rain < 0
    flags = [
        QcFlag(day.date(), QcTest.RANGE, QcAction.SET_MISSING, f"negative value {value!r}")
        for day, value in zip(days[negative], rain[negative].tolist())
    ]
    flags.sort(key=lambda flag: flag.date)

    daily = pd.Series(rain.mask(negative).to_numpy(), index=pd.DatetimeIndex(days)).sort_index()
    daily = daily.reindex(pd.date_range(daily.index[0], daily.index[-1], freq="D"))
    return DailySeries(daily.index[0].date(), daily.to_numpy(np.float64)), flags


def parse_station_csv(text: str, /, *, lenient: bool = False) -> DailySeries:
    """Parses a `date,rain` station CSV into a daily series.

    Days absent from the file and empty or `NA` values become missing.

    Parameters
    -----------
    text:
        The CSV document.
    lenient:
        If true, negative rainfall is recorded as missing instead of raising.

    Raises
    -------
    ParseError
        Malformed date or value, duplicate date or, unless lenient, negative rainfall."""
    series, flags = parse_station_csv_flagged(text)

    if flags and not lenient:
        raise ParseError(
            f"Negative rainfall on {flags[0].date.isoformat()}; "
            "run quality control or parse leniently to record it as missing"
        )

    return series


def format_rain(value: float, /) -> str:
    return "" if np.isnan(value) else repr(float(value))


def write_station_csv(series: DailySeries, /) -> str:
    """Serializes a series to the `date,rain` format it was read from."""
    frame = pd.DataFrame(
        {
            "date": series.day_index.strftime("%Y-%m-%d"),
            "rain": [format_rain(value) for value in series.values],
        }
    )
    return frame.to_csv(index=False, lineterminator="\n")


def write_flags_csv(flags: t.Iterable[QcFlag], /) -> str:
    frame = pd.DataFrame.from_records([flag.to_row() for flag in flags], columns=list(FLAG_HEADER))
    return frame.to_csv(index=False, lineterminator="\n")


def _range_test(values: np.ndarray, cfg: QcConfig, start: date) -> list[QcFlag]:
    with np.errstate(invalid="ignore"):
        bad = (values > cfg.max_rain_mm) | (values < 0)

    flags = [
        QcFlag(
            start + timedelta(days=int(i)),
            QcTest.RANGE,
            QcAction.SET_MISSING,
            f"value {values[i]!r} outside [0, {cfg.max_rain_mm!r}]",
        )
        for i in np.flatnonzero(bad)
    ]
    values[bad] = np.nan
    return flags


def _false_zero_test(series: DailySeries, values: np.ndarray, cfg: QcConfig) -> list[QcFlag]:
    flags: list[QcFlag] = []
    rain = pd.Series(values, index=series.day_index, copy=True)
    in_scope = rain[rain.index.month.isin(sorted(cfg.false_zero_months))]

    for _, month in in_scope.groupby(in_scope.index.to_period("M")):
        present = month.dropna()

        if present.empty or (present != 0).any():
            continue

        flags.append(
            QcFlag(
                month.index[0].date(),
                QcTest.FALSE_ZEROS,
                cfg.false_zero_action,
                f"all {present.size} recorded values are zero",
            )
        )

        if cfg.false_zero_action is QcAction.SET_MISSING:
            rain[month.index] = np.nan

    values[:] = rain.to_numpy()
    return flags


def _flat_line_test(values: np.ndarray, cfg: QcConfig, start: date) -> list[QcFlag]:
    flags: list[QcFlag] = []

    for first, stop, value in value_runs(values):
        if np.isnan(value) or value <= 0 or stop - first < cfg.flatline_min_run:
            continue

        flags.append(
            QcFlag(
                start + timedelta(days=first),
                QcTest.FLAT_LINE,
                QcAction.FLAGGED_ONLY,
                f"{stop - first} consecutive days of {float(value)!r} mm",
            )
        )

    return flags


def _consecutive_rain_test(values: np.ndarray, cfg: QcConfig, start: date) -> list[QcFlag]:
    with np.errstate(invalid="ignore"):
        wet = values > 0

    return [
        QcFlag(
            start + timedelta(days=first),
            QcTest.MAX_CONSECUTIVE_RAIN,
            QcAction.FLAGGED_ONLY,
            f"{stop - first} consecutive rain days",
        )
        for first, stop in true_runs(wet)
        if stop - first > cfg.max_consecutive_rain_days
    ]


def run_qc(series: DailySeries, cfg: QcConfig | None = None) -> tuple[DailySeries, list[QcFlag]]:
    """Applies the range, false zeros, flat line and consecutive rain day tests.

    Values are only ever changed to missing. Flags are returned sorted by date.

    Parameters
    -----------
    series:
        The raw gauge series.
    cfg:
        Test limits; defaults apply when omitted."""
    cfg = cfg or QcConfig()
    values = series.values.copy()
    start = series.start_date

    flags = _range_test(values, cfg, start)
    flags += _false_zero_test(series, values, cfg)
    flags += _flat_line_test(values, cfg, start)
    flags += _consecutive_rain_test(values, cfg, start)
    flags.sort(key=lambda flag: (flag.date, list(QcTest).index(flag.test)))

    removed = series.n_present - int((~np.isnan(values)).sum())

    if removed:
        logger.warning("Quality control set %d values missing", removed)

    return series.with_values(values), flags
