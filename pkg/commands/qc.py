from __future__ import annotations

import argparse
import logging
import typing as t

from config import CLEAN_SUFFIX, FLAGS_SUFFIX
from lib_helpers import read_input, write_output
from RainfallBC.enums import QcTest
from RainfallBC.errors import ParseError
from RainfallBC.ingest import parse_station_csv_flagged, run_qc, write_flags_csv, write_station_csv
from utils import format_count

if t.TYPE_CHECKING:
    from runner import BCRunner, Station

logger = logging.getLogger(f"main.{__name__}")


class QualityControl:
    name = "qc"
    help = "quality control the gauge series, writing cleaned series and flag reports"

    def __init__(self, runner: BCRunner) -> None:
        self.runner = runner

    def add_arguments(self, parser: argparse.ArgumentParser, /) -> None:
        pass

    def process(self, station: Station) -> int:
        try:
            raw, parse_flags = parse_station_csv_flagged(read_input(station.gauge))

        except ParseError as e:
            raise ParseError(f"{station.gauge}: {e}") from e

        clean, flags = run_qc(raw, self.runner.config.qc)
        flags = sorted(parse_flags + flags, key=lambda f: (f.date, list(QcTest).index(f.test)))

        write_output(self.runner.station_path(station.name, CLEAN_SUFFIX), write_station_csv(clean))
        write_output(self.runner.station_path(station.name, FLAGS_SUFFIX), write_flags_csv(flags))

        if flags:
            logger.info("Flags raised: %s", ", ".join(format_count(str(f.test) for f in flags)))

        else:
            logger.info("No flags raised")

        return len(flags)

    async def run(self, args: argparse.Namespace, /) -> None:
        await self.runner.map_stations(self.process)


def setup(runner: BCRunner) -> None:
    runner.add_command(QualityControl(runner))
