from __future__ import annotations

import argparse
import json
import logging
import typing as t

from config import (
    CONFIG_NAME,
    DEFAULT_SYNTH_STATIONS,
    GAUGE_SUFFIX,
    MODEL_SUFFIX,
    SYNTH_STATION_PREFIX,
)
from lib_helpers import CommandError, write_output
from RainfallBC.crossval import BlockScheme
from RainfallBC.ingest import write_station_csv
from RainfallBC.synthgen import SynthSpec, generate
from runner import RunConfig, Station

if t.TYPE_CHECKING:
    from runner import BCRunner

logger = logging.getLogger(f"main.{__name__}")


class Synthesize:
    name = "synth"
    help = "generate synthetic gauge and model stations with a ready to run config"

    def __init__(self, runner: BCRunner) -> None:
        self.runner = runner

    def add_arguments(self, parser: argparse.ArgumentParser, /) -> None:
        parser.add_argument("--stations", type=int, default=DEFAULT_SYNTH_STATIONS)
        parser.add_argument("--years", type=int, default=50)
        parser.add_argument("--start-year", type=int, default=1974)
        parser.add_argument("--missing-fraction", type=float, default=0.0)
        parser.add_argument(
            "--blocks", type=int, default=4, help="cross-validation blocks of the written config"
        )

    def process(self, spec: SynthSpec, index: int) -> Station:
        out = self.runner.output_dir
        name = f"{SYNTH_STATION_PREFIX}{index + 1:02d}"
        truth, model = generate(spec, station=index)
        station = Station(name, out / f"{name}{GAUGE_SUFFIX}", out / f"{name}{MODEL_SUFFIX}")
        write_output(station.gauge, write_station_csv(truth))
        write_output(station.model, write_station_csv(model))
        logger.info("Station %s written", name)
        return station

    async def run(self, args: argparse.Namespace, /) -> None:
        if args.stations < 1:
            raise CommandError("--stations must be at least 1")

        spec = SynthSpec.seasonal(
            years=args.years,
            start_year=args.start_year,
            seed=args.seed,
            missing_fraction=args.missing_fraction,
            t_x=self.runner.config.vars.T_X,
        )
        # stations are numbered in order, so the config lists them deterministically
        stations = [self.process(spec, index) for index in range(args.stations)]
        config = RunConfig(
            stations=stations,
            output_dir=self.runner.output_dir,
            vars=self.runner.config.vars,
            scheme=self.runner.config.scheme,
            blocks=BlockScheme.equal_years(
                spec.start_year, spec.start_year + spec.years - 1, args.blocks
            ),
            calibration=self.runner.config.calibration,
            qc=self.runner.config.qc,
            evaluation=self.runner.config.evaluation,
        )
        path = self.runner.output_dir / CONFIG_NAME
        write_output(path, json.dumps(config.to_dict(base=self.runner.output_dir), indent=2) + "\n")
        logger.info("Synthetic run config written to %s", path)


def setup(runner: BCRunner) -> None:
    runner.add_command(Synthesize(runner))
