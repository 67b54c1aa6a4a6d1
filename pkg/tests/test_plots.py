from __future__ import annotations

import csv
import io
from datetime import date

import pytest

from RainfallBC.core import DailySeries, PeriodScheme
from RainfallBC.evaluation import EvalReport, evaluate_all
from RainfallBC.markov import calibrate_markov
from RainfallBC.plots import calibration_scatter_plot, climatology_plot, report_plots


@pytest.fixture(scope="module")
def report(seasonal_pair: tuple[DailySeries, DailySeries]) -> EvalReport:
    obs, model = (s.between(date(1974, 1, 1), date(1979, 12, 31)) for s in seasonal_pair)
    return evaluate_all(obs, {"raw": model}, PeriodScheme.default(), station="s1")


def read_csv(text: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(text)))


def test_every_figure_has_svg_and_csv(report: EvalReport) -> None:
    plots = report_plots(report)
    names = [plot.name for plot in plots]

    assert len(names) == len(set(names))
    assert "s1.detection" in names
    assert "s1.seasonal.occurrence_1" in names

    for plot in plots:
        assert plot.svg.lstrip().startswith("<?xml")
        assert "</svg>" in plot.svg
        assert len(read_csv(plot.csv)) > 1


def test_climatology_csv_holds_plotted_values(report: EvalReport) -> None:
    plot = climatology_plot(report, "total")
    rows = read_csv(plot.csv)

    assert rows[0] == ["month", "source", "total"]
    assert len(rows) == 1 + 12 * 2
    january = next(row for row in rows[1:] if row[:2] == ["1", "raw"])
    assert float(january[2]) == pytest.approx(report.sources["raw"].climatology[1].total)


def test_rendering_is_deterministic(report: EvalReport) -> None:
    assert climatology_plot(report, "rain_days").svg == climatology_plot(report, "rain_days").svg


def test_calibration_scatter(seasonal_pair: tuple[DailySeries, DailySeries]) -> None:
    obs, model = (s.between(date(1974, 1, 1), date(1983, 12, 31)) for s in seasonal_pair)
    scheme = PeriodScheme.default()
    params = calibrate_markov(obs, model, scheme)
    plot = calibration_scatter_plot("s1", [params, None])
    rows = read_csv(plot.csv)

    assert rows[0] == ["fold", "period", "quantity", "target", "calibrated"]
    assert {row[0] for row in rows[1:]} == {"0"}
    assert len(rows) == 1 + 3 * scheme.n_periods
