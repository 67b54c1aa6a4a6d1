from __future__ import annotations

import argparse
import logging
import typing as t
from pathlib import Path

from config import CORRECTED_SUFFIX, PARAMS_SUFFIX
from lib_helpers import CommandError, read_input, write_output
from RainfallBC.ingest import write_station_csv
from RainfallBC.methods import apply, load_params
from runner import add_method_argument, chosen_methods

if t.TYPE_CHECKING:
    from RainfallBC.enums import Method
    from runner import BCRunner, Station

logger = logging.getLogger(f"main.{__name__}")


class Correct:
    name = "correct"
    help = "correct the model series with previously calibrated parameters"

    def __init__(self, runner: BCRunner) -> None:
        self.runner = runner

    def add_arguments(self, parser: argparse.ArgumentParser, /) -> None:
        add_method_argument(parser)
        parser.add_argument(
            "--params",
            type=Path,
            help="parameter JSON to use for every station; "
            "defaults to each station's calibrated parameters in the output directory",
        )

    def process(
        self, station: Station, methods: t.Sequence[Method], params_path: Path | None
    ) -> None:
        model = self.runner.read_series(station.model)

        for method in methods:
            path = params_path or self.runner.station_path(station.name, PARAMS_SUFFIX, method)
            params = load_params(read_input(path))

            if params.method is not method:
                raise CommandError(
                    f"{path} holds {params.method.label} parameters, not {method.label}"
                )

            corrected = apply(params, model, self.runner.config.scheme)
            out = self.runner.station_path(station.name, CORRECTED_SUFFIX, method)
            write_output(out, write_station_csv(corrected))
            logger.info("%s correction written to %s", method.label, out)

    async def run(self, args: argparse.Namespace, /) -> None:
        methods = chosen_methods(args)

        if args.params is not None and len(methods) != 1:
            raise CommandError("--params needs exactly one --method")

        await self.runner.map_stations(lambda station: self.process(station, methods, args.params))


def setup(runner: BCRunner) -> None:
    runner.add_command(Correct(runner))
