"""SVG figures of an evaluation, each paired with a CSV of exactly the plotted numbers."""
from __future__ import annotations

import io
import logging
import typing as t
from dataclasses import dataclass

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from .core import MONTH_ABBREVS
from .evaluation import ANNUAL_STATS, MONTH_STATS, EvalReport
from .markov import McParams

logger = logging.getLogger(f"main.{__name__}")

matplotlib.rcParams["svg.hashsalt"] = "rainfall-bc"
matplotlib.rcParams["svg.fonttype"] = "none"

Row = tuple[t.Any, ...]


@dataclass(frozen=True, slots=True)
class PlotFile:
    """A rendered figure and the table behind it, written as `<name>.svg` and `<name>.csv`."""

    name: str
    svg: str
    csv: str


def _table(header: Row, rows: t.Iterable[Row]) -> str:
    frame = pd.DataFrame.from_records(list(rows), columns=list(header))
    return frame.to_csv(index=False, lineterminator="\n")


def _render(fig: Figure) -> str:
    sio = io.StringIO()
    fig.savefig(sio, format="svg", metadata={"Date": None})
    return sio.getvalue()


def _figure(title: str, xlabel: str, ylabel: str) -> tuple[Figure, t.Any]:
    fig = Figure(figsize=(8, 4.5), layout="constrained")
    ax = fig.add_subplot()
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _nan(value: float | None) -> float:
    return np.nan if value is None else value


def climatology_plot(report: EvalReport, stat: str) -> PlotFile:
    """Monthly climatology of one statistic, a line per source; gaps where it is absent."""
    fig, ax = _figure(f"{report.station} monthly {stat.replace('_', ' ')}", "Month", stat)
    rows: list[Row] = []

    for name, source in report.sources.items():
        values = [getattr(source.climatology[m], stat) for m in range(1, 13)]
        ax.plot(range(1, 13), [_nan(v) for v in values], marker="o", label=name)
        rows += [(m, name, v) for m, v in zip(range(1, 13), values)]

    ax.set_xticks(range(1, 13), MONTH_ABBREVS)
    ax.legend(loc="best", fontsize=8)
    return PlotFile(
        f"{report.station}.climatology.{stat}",
        _render(fig),
        _table(("month", "source", stat), rows),
    )


def annual_plot(report: EvalReport, stat: str) -> PlotFile:
    """Annual time series of one statistic, a line per source."""
    fig, ax = _figure(f"{report.station} annual {stat.replace('_', ' ')}", "Year", stat)
    rows: list[Row] = []

    for name, source in report.sources.items():
        years = [s.year for s in source.annual]
        values = [getattr(s, stat) for s in source.annual]
        ax.plot(years, [_nan(v) for v in values], marker=".", label=name)
        rows += [(year, name, v) for year, v in zip(years, values)]

    ax.legend(loc="best", fontsize=8)
    return PlotFile(
        f"{report.station}.annual.{stat}", _render(fig), _table(("year", "source", stat), rows)
    )


def spell_ecdf_plot(report: EvalReport, kind: t.Literal["wet", "dry"]) -> PlotFile:
    """Empirical CDFs of October to March spell lengths, a step line per source."""
    fig, ax = _figure(
        f"{report.station} {kind} spells, October to March", "Spell length (days)", "ECDF"
    )
    rows: list[Row] = []

    for name, source in report.sources.items():
        lengths = np.sort(np.asarray(getattr(source, f"{kind}_spells"), dtype=np.int64))

        if lengths.size == 0:
            continue

        support, counts = np.unique(lengths, return_counts=True)
        ecdf = np.cumsum(counts) / lengths.size
        ax.step(support, ecdf, where="post", label=name)
        rows += [(name, int(x), float(y)) for x, y in zip(support, ecdf)]

    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="lower right", fontsize=8)
    return PlotFile(
        f"{report.station}.spells.{kind}", _render(fig), _table(("source", "length", "ecdf"), rows)
    )


def seasonal_plot(report: EvalReport, key: str) -> PlotFile:
    """Fitted seasonal curves of one model, a line per source and lag state."""
    fig, ax = _figure(f"{report.station} seasonal {key.replace('_', ' order ')}", "Season day", key)
    rows: list[Row] = []

    for name, source in report.sources.items():
        if key not in source.curves:
            continue

        for state, values in source.curves[key].curves.items():
            label = name if state == "all" else f"{name} ({state})"
            ax.plot(np.arange(1, values.size + 1), values, label=label)
            rows += [(name, state, d, float(v)) for d, v in enumerate(values, 1)]

    ax.legend(loc="best", fontsize=8)
    return PlotFile(
        f"{report.station}.seasonal.{key}",
        _render(fig),
        _table(("source", "state", "d", "fitted"), rows),
    )


def detection_plot(report: EvalReport) -> PlotFile:
    """POD, FAR and HSS of rain day detection, grouped bars per source."""
    fig, ax = _figure(f"{report.station} rain day detection", "Metric", "Score")
    metrics = ("POD", "FAR", "HSS")
    sources = [(name, s) for name, s in report.sources.items() if s.detection is not None]
    width = 0.8 / max(len(sources), 1)
    rows: list[Row] = []

    for i, (name, source) in enumerate(sources):
        scores = source.detection.to_dict()  # type: ignore[union-attr]
        values = [scores[metric] for metric in metrics]
        ax.bar(np.arange(len(metrics)) + i * width, [_nan(v) for v in values], width, label=name)
        rows += [(name, metric, v) for metric, v in zip(metrics, values)]

    ax.set_xticks(np.arange(len(metrics)) + 0.4 - width / 2, metrics)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.legend(loc="best", fontsize=8)
    return PlotFile(
        f"{report.station}.detection", _render(fig), _table(("source", "metric", "value"), rows)
    )


def calibration_scatter_plot(station: str, params: t.Sequence[McParams | None]) -> PlotFile:
    """Calibrated against target probabilities of every period of every fold."""
    fig, ax = _figure(f"{station} calibrated vs target probabilities", "Target", "Calibrated")
    rows: list[Row] = []

    for quantity, marker in (("p0", "o"), ("pw", "^"), ("pd", "v")):
        xs, ys = [], []

        for fold, fold_params in enumerate(params):
            if fold_params is None:
                continue

            for m, thr in sorted(fold_params.thresholds.periods.items()):
                target = getattr(thr, quantity)
                achieved = getattr(thr, f"achieved_{quantity}")

                if target is None or achieved is None:
                    continue

                xs.append(target)
                ys.append(achieved)
                rows.append((fold, m, quantity, target, achieved))

        ax.scatter(xs, ys, marker=marker, label=quantity)

    ax.plot((0, 1), (0, 1), color="grey", linewidth=0.8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(loc="lower right", fontsize=8)
    return PlotFile(
        f"{station}.calibration",
        _render(fig),
        _table(("fold", "period", "quantity", "target", "calibrated"), rows),
    )


def report_plots(report: EvalReport) -> list[PlotFile]:
    """Every figure of an evaluation report."""
    plots = [climatology_plot(report, stat) for stat in MONTH_STATS]
    plots += [annual_plot(report, stat) for stat in ANNUAL_STATS]
    plots += [spell_ecdf_plot(report, "wet"), spell_ecdf_plot(report, "dry")]
    keys = sorted({key for source in report.sources.values() for key in source.curves})
    plots += [seasonal_plot(report, key) for key in keys]
    plots.append(detection_plot(report))
    logger.debug("Rendered %d figures for %s", len(plots), report.station)
    return plots
