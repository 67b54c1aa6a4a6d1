from __future__ import annotations

import argparse
import json
import logging
import typing as t

import pandas as pd


from config import (
    CORRECTED_SUFFIX,
    CROSSVAL_SUFFIX,
    PARAMS_SUFFIX,
    PLOTS_DIR,
    REPORT_SUFFIX,
    REPORT_TABLES,
)
from lib_helpers import read_input, write_output
from RainfallBC.enums import Method
from RainfallBC.evaluation import EvalReport, evaluate_all
from RainfallBC.markov import McParams
from RainfallBC.methods import load_params
from RainfallBC.plots import calibration_scatter_plot, report_plots

from .crossval import fold_suffix

if t.TYPE_CHECKING:
    from pathlib import Path

    from runner import BCRunner, Station

logger = logging.getLogger(f"main.{__name__}")

RAW_SOURCE: t.Final = "raw"
TABLE_HEADER: t.Final = ("station", "source", "table", "metric", "value")


class Evaluate:
    name = "evaluate"
    help = "evaluate raw and corrected model series against the gauge, with plots"

    def __init__(self, runner: BCRunner) -> None:
        self.runner = runner

    def add_arguments(self, parser: argparse.ArgumentParser, /) -> None:
        parser.add_argument(
            "--corrected",
            choices=("crossval", "full"),
            default="crossval",
            help="evaluate the cross-validated corrections or the full record ones",
        )
        parser.add_argument("--no-plots", action="store_true")

    def _scatter_params(
        self, station: Station, method: Method, corrected: str
    ) -> list[McParams | None]:
        if corrected == "full":
            paths = [self.runner.station_path(station.name, PARAMS_SUFFIX, method)]

        else:
            paths = [
                self.runner.station_path(station.name, fold_suffix(fold), method)
                for fold in range(1, len(self.runner.config.blocks) + 1)
            ]

        params: list[McParams | None] = []

        for path in paths:
            loaded = load_params(read_input(path)) if path.is_file() else None
            params.append(loaded if isinstance(loaded, McParams) else None)

        return params

    def process(self, station: Station, corrected: str, plots: bool) -> EvalReport:
        config = self.runner.config
        gauge = self.runner.read_gauge(station)
        sources = {RAW_SOURCE: self.runner.read_series(station.model)}
        suffix = CROSSVAL_SUFFIX if corrected == "crossval" else CORRECTED_SUFFIX
        found: list[Method] = []

        for method in Method:
            path = self.runner.station_path(station.name, suffix, method)

            if path.is_file():
                sources[method.cli_name] = self.runner.read_series(path)
                found.append(method)

        if not found:
            logger.warning("No corrected series found, evaluating the raw model only")

        report = evaluate_all(
            gauge,
            sources,
            config.scheme,
            config.evaluation,
            t_x=config.vars.T_X,
            station=station.name,
        )
        write_output(
            self.runner.station_path(station.name, REPORT_SUFFIX),
            json.dumps(report.to_dict(), indent=2) + "\n",
        )

        if plots:
            plot_dir = self.runner.output_dir / PLOTS_DIR
            figures = report_plots(report)

            for method in found:
                if method.markov:
                    scatter = calibration_scatter_plot(
                        f"{station.name}.{method.cli_name}",
                        self._scatter_params(station, method, corrected),
                    )
                    figures.append(scatter)

            for figure in figures:
                write_output(plot_dir / f"{figure.name}.svg", figure.svg)
                write_output(plot_dir / f"{figure.name}.csv", figure.csv)

        return report

    def write_tables(self, reports: t.Iterable[EvalReport | None], path: Path) -> None:
        rows = [row for report in reports if report is not None for row in report.table_rows()]
        frame = pd.DataFrame.from_records(rows, columns=list(TABLE_HEADER))
        write_output(path, frame.to_csv(index=False, lineterminator="\n"))

    async def run(self, args: argparse.Namespace, /) -> None:
        reports = await self.runner.map_stations(
            lambda station: self.process(station, args.corrected, not args.no_plots)
        )
        self.write_tables(reports, self.runner.output_dir / REPORT_TABLES)


def setup(runner: BCRunner) -> None:
    runner.add_command(Evaluate(runner))
