from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np
import numpy.typing as npt
import pandas as pd
from typing_extensions import Self

from utils import optional_float, true_runs, value_runs

from .core import (
    DEFAULT_VARS,
    DailySeries,
    IndicatorSeries,
    PeriodScheme,
    align,
    common_mask,
    lagged_state,
    rain_indicator,
)
from .enums import RainCategory, Response, WetState
from .errors import BiasCorrectionError, ConfigError, EmptySampleError
from .seasonal import (
    FittedCurves,
    SeasonalModelSpec,
    fit_amount_model,
    fit_occurrence_model,
    rmse_curve,
    specs_from_config,
)
from .stats import ComparisonMetrics, KsResult, comparison_metrics, ks_two_sample

logger = logging.getLogger(f"main.{__name__}")

SPELL_MONTHS: t.Final = frozenset({10, 11, 12, 1, 2, 3})
SPELL_POLICIES: t.Final = ("break", "discard")
MONTH_STATS: t.Final = ("rain_days", "total", "mean_per_rain_day", "max_daily")
ANNUAL_STATS: t.Final = MONTH_STATS + ("longest_dry_spell",)
GAUGE: t.Final = "gauge"


@dataclass(frozen=True, slots=True)
class EvaluationConfig:
    """Completeness and spell settings of the evaluation.

    Attributes
    -----------
    monthly_completeness:
        Fraction of days a month-year needs present to enter the climatology.
    annual_completeness:
        Fraction of days an annual year needs present for its summaries.
    spell_completeness:
        Fraction of October to March days a season needs present for its spells.
    spell_policy:
        "break" splits runs at missing days, "discard" also drops the runs touching them.
    n_harmonics:
        Fourier harmonics of the seasonal models.
    """

    monthly_completeness: float = 0.8
    annual_completeness: float = 0.8
    spell_completeness: float = 0.9
    spell_policy: str = "break"
    n_harmonics: int = 3

    def __post_init__(self) -> None:
        for name in ("monthly_completeness", "annual_completeness", "spell_completeness"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")

        if self.spell_policy not in SPELL_POLICIES:
            raise ConfigError(
                f"Spell policy must be one of {SPELL_POLICIES}, got {self.spell_policy!r}"
            )

        if not 0 <= self.n_harmonics <= 6:
            raise ConfigError("Number of harmonics must lie in 0..6")

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        default = cls()
        kwargs = {}

        for name in cls.__dataclass_fields__:
            value = getattr(default, name)
            try:
                kwargs[name] = type(value)(json.get(name, value))

            except (TypeError, ValueError):
                raise ConfigError(f"Invalid value for {name}: {json.get(name)!r}") from None

        return cls(**kwargs)

    def to_dict(self) -> dict[str, t.Any]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


class MonthStats(t.NamedTuple):
    rain_days: float | None
    total: float | None
    mean_per_rain_day: float | None
    max_daily: float | None
    n_years: int


def _daily_frame(series: DailySeries, indicator: IndicatorSeries) -> pd.DataFrame:
    wet = indicator.wet
    return pd.DataFrame(
        {
            "rain": series.values,
            "wet": wet.astype(np.float64),
            "wet_rain": np.where(wet, series.values, 0.0),
        },
        index=series.day_index,
    )


def _binned_stats(frame: pd.DataFrame, rule: str | pd.offsets.BaseOffset) -> pd.DataFrame:
    # one row per calendar bin: present days and the amount statistics
    grouped = frame.resample(rule)
    stats = pd.DataFrame(
        {
            "n_present": grouped["rain"].count(),
            "rain_days": grouped["wet"].sum(),
            "total": grouped["rain"].sum(),
            "max_daily": grouped["rain"].max(),
        }
    )
    rain_days = stats["rain_days"].where(stats["rain_days"] > 0)
    stats["mean_per_rain_day"] = grouped["wet_rain"].sum() / rain_days
    return stats


def _complete(stats: pd.DataFrame, lengths: pd.Index, completeness: float) -> pd.Series:
    n_present = stats["n_present"]
    return (n_present > 0) & (n_present >= completeness * lengths.to_numpy())


def monthly_climatology(
    series: DailySeries, indicator: IndicatorSeries, completeness: float = 0.8
) -> dict[int, MonthStats]:
    """Climatology per calendar month.

    Each statistic is computed within every month-year with at least `completeness` of
    its days present, then averaged over those years. Months without a qualifying year
    have every statistic None; the mean per rain day is None when no year had rain.
    """
    stats = _binned_stats(_daily_frame(series, indicator), "MS")
    stats = stats[_complete(stats, stats.index.days_in_month, completeness)]
    by_month = stats.groupby(stats.index.month)
    calendar = range(1, 13)
    means = by_month[list(MONTH_STATS)].mean().reindex(calendar)
    n_years = by_month.size().reindex(calendar, fill_value=0)

    return {
        month: MonthStats(
            *(optional_float(means.at[month, name]) for name in MONTH_STATS),
            n_years=int(n_years[month]),
        )
        for month in calendar
    }


def _season_bounds(day: date) -> tuple[date, date]:
    # October to March season containing the given day
    year = day.year if day.month >= 10 else day.year - 1
    return date(year, 10, 1), date(year + 1, 4, 1)


def _window_segments(indicator: IndicatorSeries) -> list[tuple[int, int, int]]:
    # (start, stop, full season length) of each October to March window in the series
    in_window = np.isin(indicator.months, tuple(SPELL_MONTHS))
    segments = []

    for start, stop in true_runs(in_window):
        first, end = _season_bounds(indicator.start_date + timedelta(days=start))
        segments.append((start, stop, (end - first).days))

    return segments


def _segment_spells(
    states: npt.NDArray[np.int8], policy: str
) -> tuple[list[int], list[int]]:
    wet: list[int] = []
    dry: list[int] = []
    runs = list(value_runs(states))

    for i, (start, stop, state) in enumerate(runs):
        if state == WetState.MISSING:
            continue

        if policy == "discard":
            before = runs[i - 1][2] if i > 0 else None
            after = runs[i + 1][2] if i + 1 < len(runs) else None

            if WetState.MISSING in (before, after):
                continue

        (wet if state == WetState.WET else dry).append(stop - start)

    return wet, dry


def spell_lengths(
    indicator: IndicatorSeries, *, policy: str = "break", completeness: float = 0.0
) -> tuple[list[int], list[int]]:
    """Wet and dry spell lengths within every October to March window.

    Spells are maximal runs of one non-missing state; runs touching a window edge are
    kept at their truncated length and missing days end a run. Under the "discard"
    policy runs touching a missing day are dropped. Windows with less than
    `completeness` of their days present are skipped.
    """
    if policy not in SPELL_POLICIES:
        raise ConfigError(f"Unknown spell policy {policy!r}")

    wet: list[int] = []
    dry: list[int] = []

    for start, stop, season_length in _window_segments(indicator):
        states = indicator.states[start:stop]

        if (states != WetState.MISSING).sum() < completeness * season_length:
            continue

        segment_wet, segment_dry = _segment_spells(states, policy)
        wet += segment_wet
        dry += segment_dry

    return wet, dry


def spell_ks(gauge_spells: t.Sequence[int], other_spells: t.Sequence[int]) -> KsResult:
    return ks_two_sample(gauge_spells, other_spells)


class AnnualSummary(t.NamedTuple):
    year: int
    rain_days: float | None
    total: float | None
    mean_per_rain_day: float | None
    max_daily: float | None
    longest_dry_spell: int | None


def annual_summaries(
    series: DailySeries,
    indicator: IndicatorSeries,
    scheme: PeriodScheme,
    cfg: EvaluationConfig | None = None,
) -> list[AnnualSummary]:
    """Per annual year (starting on the scheme's annual year start month) rain days,
    total, mean per rain day, maximum and the longest October to March dry spell.

    Years below the annual completeness have None amounts; seasons below the spell
    completeness have no longest dry spell.
    """
    cfg = cfg or EvaluationConfig()
    start_month = scheme.annual_year_start_month
    year_start = pd.offsets.YearBegin(month=start_month)
    stats = _binned_stats(_daily_frame(series, indicator), year_start)
    starts = stats.index
    complete = _complete(stats, (starts + year_start - starts).days, cfg.annual_completeness)

    label = indicator.years - (indicator.months < start_month)
    longest: dict[int, int] = {}

    for start, stop, season_length in _window_segments(indicator):
        states = indicator.states[start:stop]

        if (states != WetState.MISSING).sum() >= cfg.spell_completeness * season_length:
            _, dry = _segment_spells(states, cfg.spell_policy)
            longest[int(label[start])] = max(dry, default=0)

    return [
        AnnualSummary(
            first.year,
            *(optional_float(stats.at[first, name]) if ok else None for name in MONTH_STATS),
            longest.get(first.year),
        )
        for first, ok in zip(starts, complete)
    ]


@dataclass(frozen=True, slots=True)
class Detection2x2:
    hits: int
    misses: int
    false_alarms: int
    correct_negatives: int

    @staticmethod
    def _ratio(num: float, den: float) -> float | None:
        return num / den if den else None

    @property
    def pod(self) -> float | None:
        return self._ratio(self.hits, self.hits + self.misses)

    @property
    def far(self) -> float | None:
        return self._ratio(self.false_alarms, self.hits + self.false_alarms)

    @property
    def hss(self) -> float | None:
        h, m, f, c = self.hits, self.misses, self.false_alarms, self.correct_negatives
        return self._ratio(2 * (h * c - f * m), (h + m) * (m + c) + (h + f) * (f + c))

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "H": self.hits,
            "M": self.misses,
            "F": self.false_alarms,
            "C": self.correct_negatives,
            "POD": self.pod,
            "FAR": self.far,
            "HSS": self.hss,
        }


def detection_2x2(
    gauge_indicator: IndicatorSeries, model_indicator: IndicatorSeries
) -> Detection2x2:
    """Contingency table of model against gauge rain days over days both are present."""
    if len(gauge_indicator) != len(model_indicator):
        raise ValueError("Indicators must be aligned")

    both = gauge_indicator.present & model_indicator.present
    g = gauge_indicator.wet[both]
    m = model_indicator.wet[both]
    return Detection2x2(
        int((g & m).sum()), int((g & ~m).sum()), int((~g & m).sum()), int((~g & ~m).sum())
    )


@dataclass(frozen=True, slots=True)
class CategoricalDetection:
    """K x K table, rows model category, columns gauge category."""

    table: npt.NDArray[np.int64]

    @property
    def n(self) -> int:
        return int(self.table.sum())

    @property
    def pod(self) -> dict[RainCategory, float | None]:
        gauge_totals = self.table.sum(axis=0)
        return {
            category: (float(self.table[i, i] / gauge_totals[i]) if gauge_totals[i] else None)
            for i, category in enumerate(RainCategory)
        }

    @property
    def hss(self) -> float | None:
        n = self.n

        if n == 0:
            return None

        accuracy = np.trace(self.table) / n
        chance = float(self.table.sum(axis=1) @ self.table.sum(axis=0)) / n**2

        if chance == 1:
            return None

        return float((accuracy - chance) / (1 - chance))

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "table": self.table.tolist(),
            "POD": {category.label: value for category, value in self.pod.items()},
            "HSS": self.hss,
        }


def detection_categorical(gauge: DailySeries, model: DailySeries) -> CategoricalDetection:
    """Categorical detection over days both series are present."""
    both = common_mask(gauge, model)
    g = RainCategory.categorize(gauge.values[both])
    m = RainCategory.categorize(model.values[both])
    k = len(RainCategory)
    table = np.bincount(m.astype(np.int64) * k + g, minlength=k * k).reshape(k, k)
    return CategoricalDetection(table)


@dataclass(slots=True)
class SourceReport:
    """Everything evaluated for one series of a station."""

    climatology: dict[int, MonthStats]
    annual: list[AnnualSummary]
    wet_spells: list[int]
    dry_spells: list[int]
    curves: dict[str, FittedCurves] = field(default_factory=dict)
    climatology_metrics: dict[str, ComparisonMetrics | None] = field(default_factory=dict)
    annual_metrics: dict[str, ComparisonMetrics | None] = field(default_factory=dict)
    spell_ks: dict[str, KsResult | None] = field(default_factory=dict)
    rmse_curves: dict[str, float | tuple[float, float] | None] = field(default_factory=dict)
    detection: Detection2x2 | None = None
    categorical: CategoricalDetection | None = None

    def to_dict(self) -> dict[str, t.Any]:
        def metrics(d: t.Mapping[str, t.Any]) -> dict[str, t.Any]:
            return {k: None if v is None else v.to_dict() for k, v in d.items()}

        return {
            "climatology": {str(m): s._asdict() for m, s in self.climatology.items()},
            "annual": [s._asdict() for s in self.annual],
            "wet_spells": self.wet_spells,
            "dry_spells": self.dry_spells,
            "climatology_metrics": metrics(self.climatology_metrics),
            "annual_metrics": metrics(self.annual_metrics),
            "spell_ks": metrics(self.spell_ks),
            "rmse_curves": {
                k: list(v) if isinstance(v, tuple) else v for k, v in self.rmse_curves.items()
            },
            "seasonal_fits": {k: v.to_dict() for k, v in self.curves.items()},
            "detection": None if self.detection is None else self.detection.to_dict(),
            "categorical": None if self.categorical is None else self.categorical.to_dict(),
        }


@dataclass(slots=True)
class EvalReport:
    """Evaluation of a station's sources against its gauge.

    `sources` includes the gauge itself under "gauge"; comparisons are only filled for
    the other sources."""

    station: str
    first_date: date
    last_date: date
    days_used: int
    sources: dict[str, SourceReport]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "station": self.station,
            "first_date": self.first_date.isoformat(),
            "last_date": self.last_date.isoformat(),
            "days_used": self.days_used,
            "sources": {name: source.to_dict() for name, source in self.sources.items()},
            "warnings": self.warnings,
        }

    def table_rows(self) -> t.Iterator[tuple[str, str, str, str, float | None]]:
        """Flat (station, source, table, metric, value) rows of every comparison."""
        for name, source in self.sources.items():
            if name == GAUGE:
                continue

            for table, group in (
                ("climatology", source.climatology_metrics),
                ("annual", source.annual_metrics),
                ("spells", source.spell_ks),
            ):
                for stat, result in group.items():
                    if result is None:
                        yield self.station, name, table, stat, None
                        continue

                    for metric, value in result.to_dict().items():
                        yield self.station, name, table, f"{stat}.{metric}", optional_float(value)

            for key, value in source.rmse_curves.items():
                if isinstance(value, tuple):
                    yield self.station, name, "rmse_curve", f"{key}.W", value[0]
                    yield self.station, name, "rmse_curve", f"{key}.D", value[1]

                else:
                    yield self.station, name, "rmse_curve", key, value

            if source.detection is not None:
                scores = source.detection.to_dict()

                for metric in ("POD", "FAR", "HSS"):
                    yield self.station, name, "detection", metric, scores[metric]

            if source.categorical is not None:
                for category, value in source.categorical.pod.items():
                    yield self.station, name, "categorical", f"POD.{category.label}", value

                yield self.station, name, "categorical", "HSS", source.categorical.hss


def curve_key(spec: SeasonalModelSpec) -> str:
    return f"{spec.response.value}_{spec.order}"


def _fit_curves(
    series: DailySeries,
    indicator: IndicatorSeries,
    cfg: EvaluationConfig,
    scheme: PeriodScheme,
    t_x: float,
    what: str,
    warnings: list[str],
) -> dict[str, FittedCurves]:
    lagged = lagged_state(indicator)
    curves: dict[str, FittedCurves] = {}

    for spec in specs_from_config(cfg.n_harmonics, scheme.annual_year_start_month):
        lag = None if spec.order == 0 else lagged

        try:
            if spec.response is Response.OCCURRENCE:
                curves[curve_key(spec)] = fit_occurrence_model(indicator, lag, spec)

            else:
                curves[curve_key(spec)] = fit_amount_model(series, indicator, lag, spec, t_x)

        except BiasCorrectionError as e:
            warnings.append(f"{what} {spec}: {e}")

    return curves


def _compare_rows(
    source: t.Sequence[t.Sequence[t.Any]],
    gauge: t.Sequence[t.Sequence[t.Any]],
    stats: t.Sequence[str],
    offset: int,
) -> dict[str, ComparisonMetrics | None]:
    result: dict[str, ComparisonMetrics | None] = {}

    for i, stat in enumerate(stats, offset):
        y = np.array([np.nan if row[i] is None else row[i] for row in source], dtype=float)
        x = np.array([np.nan if row[i] is None else row[i] for row in gauge], dtype=float)

        try:
            result[stat] = comparison_metrics(y, x)

        except EmptySampleError:
            result[stat] = None

    return result


def evaluate_all(
    gauge: DailySeries,
    sources: t.Mapping[str, DailySeries],
    scheme: PeriodScheme,
    cfg: EvaluationConfig | None = None,
    *,
    t_x: float = DEFAULT_VARS.T_X,
    station: str = "",
) -> EvalReport:
    """Compares every source with the gauge over the days all series are present.

    Statistics that cannot be computed are reported as None with a warning; nothing
    short of misaligned input fails the evaluation as a whole.

    Parameters
    -----------
    gauge:
        Reference series.
    sources:
        Named series to evaluate, e.g. raw model data and corrections of it.
    scheme:
        Supplies the annual year start month.
    cfg:
        Completeness and spell settings.
    """
    cfg = cfg or EvaluationConfig()
    names = list(sources)
    aligned = align(gauge, *sources.values())
    mask = common_mask(*aligned)
    masked = [series.masked(~mask) for series in aligned]
    report = EvalReport(station, aligned[0].start_date, aligned[0].end_date, int(mask.sum()), {})

    if not mask.any():
        report.warnings.append("No day is present in every source")

    indicators = [rain_indicator(series, t_x) for series in masked]

    for name, series, indicator in zip([GAUGE] + names, masked, indicators):
        wet, dry = spell_lengths(
            indicator, policy=cfg.spell_policy, completeness=cfg.spell_completeness
        )
        report.sources[name] = SourceReport(
            monthly_climatology(series, indicator, cfg.monthly_completeness),
            annual_summaries(series, indicator, scheme, cfg),
            wet,
            dry,
            _fit_curves(series, indicator, cfg, scheme, t_x, name, report.warnings),
        )

    reference = report.sources[GAUGE]

    for name, series, indicator in zip(names, masked[1:], indicators[1:]):
        source = report.sources[name]
        source.climatology_metrics = _compare_rows(
            [source.climatology[m] for m in range(1, 13)],
            [reference.climatology[m] for m in range(1, 13)],
            MONTH_STATS,
            0,
        )
        source.annual_metrics = _compare_rows(source.annual, reference.annual, ANNUAL_STATS, 1)

        for kind in ("wet", "dry"):
            try:
                source.spell_ks[kind] = spell_ks(
                    getattr(reference, f"{kind}_spells"), getattr(source, f"{kind}_spells")
                )

            except EmptySampleError as e:
                source.spell_ks[kind] = None
                report.warnings.append(f"{name} {kind} spells: {e}")

        for key, fitted in source.curves.items():
            if key in reference.curves:
                source.rmse_curves[key] = rmse_curve(reference.curves[key], fitted)

            else:
                source.rmse_curves[key] = None

        source.detection = detection_2x2(indicators[0], indicator)
        source.categorical = detection_categorical(masked[0], series)

    for warning in report.warnings:
        logger.warning(warning)

    return report
