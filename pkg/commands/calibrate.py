from __future__ import annotations

import argparse
import logging
import typing as t

from config import PARAMS_SUFFIX
from lib_helpers import write_output
from RainfallBC.methods import calibrate, dump_params
from runner import add_method_argument, chosen_methods

if t.TYPE_CHECKING:
    from RainfallBC.enums import Method
    from runner import BCRunner, Station

logger = logging.getLogger(f"main.{__name__}")


class Calibrate:
    name = "calibrate"
    help = "calibrate correction parameters over the full record of every station"

    def __init__(self, runner: BCRunner) -> None:
        self.runner = runner

    def add_arguments(self, parser: argparse.ArgumentParser, /) -> None:
        add_method_argument(parser)

    def process(self, station: Station, methods: t.Sequence[Method]) -> None:
        config = self.runner.config
        obs = self.runner.read_gauge(station)
        model = self.runner.read_series(station.model)

        for method in methods:
            params = calibrate(
                method, obs, model, config.scheme, vars=config.vars, cfg=config.calibration
            )
            path = self.runner.station_path(station.name, PARAMS_SUFFIX, method)
            write_output(path, dump_params(params))
            logger.info("%s parameters written to %s", method.label, path)

    async def run(self, args: argparse.Namespace, /) -> None:
        methods = chosen_methods(args)
        await self.runner.map_stations(lambda station: self.process(station, methods))


def setup(runner: BCRunner) -> None:
    runner.add_command(Calibrate(runner))
