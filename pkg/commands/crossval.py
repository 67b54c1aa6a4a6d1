from __future__ import annotations

import argparse
import logging
import typing as t

from config import CROSSVAL_SUFFIX
from lib_helpers import write_output
from RainfallBC.crossval import run_crossval
from RainfallBC.ingest import write_station_csv
from RainfallBC.methods import dump_params
from runner import add_method_argument, chosen_methods

if t.TYPE_CHECKING:
    from RainfallBC.enums import Method
    from runner import BCRunner, Station

logger = logging.getLogger(f"main.{__name__}")


def fold_suffix(fold: int) -> str:
    return f".fold{fold}.params.json"


class CrossValidate:
    name = "crossval"
    help = "block cross-validate the correction methods, stitching the held-out corrections"

    def __init__(self, runner: BCRunner) -> None:
        self.runner = runner

    def add_arguments(self, parser: argparse.ArgumentParser, /) -> None:
        add_method_argument(parser)

    def process(self, station: Station, methods: t.Sequence[Method]) -> None:
        config = self.runner.config
        obs = self.runner.read_gauge(station)
        model = self.runner.read_series(station.model)

        for method in methods:
            result = run_crossval(
                obs,
                model,
                method,
                config.blocks,
                config.scheme,
                vars=config.vars,
                cfg=config.calibration,
            )
            path = self.runner.station_path(station.name, CROSSVAL_SUFFIX, method)
            write_output(path, write_station_csv(result.corrected))

            for fold, params in enumerate(result.fold_params, 1):
                if params is not None:
                    fold_path = self.runner.station_path(station.name, fold_suffix(fold), method)
                    write_output(fold_path, dump_params(params))

            logger.info("%s cross-validation written to %s", method.label, path)

    async def run(self, args: argparse.Namespace, /) -> None:
        methods = chosen_methods(args)
        await self.runner.map_stations(lambda station: self.process(station, methods))


def setup(runner: BCRunner) -> None:
    runner.add_command(CrossValidate(runner))
