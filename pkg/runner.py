from __future__ import annotations

import argparse
import asyncio
import importlib
import json
import logging
import pkgutil
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

from typing_extensions import Self

from config import CLEAN_SUFFIX, DEFAULT_JOBS, DEFAULT_OUTPUT_DIR
from lib_helpers import CommandError, InputFileError, current_station, read_input
from RainfallBC.core import CorrectionVars, DailySeries, PeriodScheme
from RainfallBC.crossval import BlockScheme
from RainfallBC.enums import Method
from RainfallBC.errors import (
    BiasCorrectionError,
    ConfigError,
    DegenerateSampleError,
    EmptySampleError,
    FitInsufficientData,
    ParseError,
    SeasonalFitError,
    SeriesError,
)
from RainfallBC.evaluation import EvaluationConfig
from RainfallBC.ingest import QcConfig, parse_station_csv
from RainfallBC.markov import CalibrationConfig
from RainfallBC.types import RunConfigDict, StationDict

logger = logging.getLogger(f"main.{__name__}")

T = t.TypeVar("T")


@dataclass(frozen=True, slots=True)
class Station:
    """A gauge and the model series at its location."""

    name: str
    gauge: Path
    model: Path

    @classmethod
    def from_dict(cls, json: StationDict, /, base: Path = Path()) -> Self:
        try:
            return cls(json["name"], base / json["gauge"], base / json["model"])

        except (KeyError, TypeError) as e:
            raise ConfigError(f"Invalid station entry {json!r}") from e

    def to_dict(self, base: Path | None = None) -> StationDict:
        def rel(path: Path) -> str:
            return (path.relative_to(base) if base is not None else path).as_posix()

        return {"name": self.name, "gauge": rel(self.gauge), "model": rel(self.model)}


@dataclass(slots=True)
class RunConfig:
    """Everything configurable about a run, read from a single JSON document."""

    stations: list[Station] = field(default_factory=list)
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    vars: CorrectionVars = field(default_factory=CorrectionVars.default)
    scheme: PeriodScheme = field(default_factory=PeriodScheme.default)
    blocks: BlockScheme = field(default_factory=BlockScheme.default)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    qc: QcConfig = field(default_factory=QcConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def __post_init__(self) -> None:
        names = [station.name for station in self.stations]

        if len(set(names)) != len(names):
            raise ConfigError("Station names must be unique")

    @classmethod
    def from_dict(cls, json: RunConfigDict, /, base: Path = Path()) -> Self:
        """Builds a run config; relative paths are taken relative to `base`."""
        return cls(
            stations=[Station.from_dict(s, base) for s in json.get("stations", [])],
            output_dir=base / json.get("output_dir", DEFAULT_OUTPUT_DIR),
            vars=CorrectionVars.from_dict(json.get("correction", {})),
            scheme=PeriodScheme.from_dict(json.get("periods", {})),
            blocks=(
                BlockScheme.from_dict(json["blocks"]) if "blocks" in json else BlockScheme.default()
            ),
            calibration=CalibrationConfig.from_dict(json.get("calibration", {})),
            qc=QcConfig.from_dict(json.get("qc", {})),
            evaluation=EvaluationConfig.from_dict(json.get("evaluation", {})),
        )

    @classmethod
    def load(cls, path: Path, /) -> Self:
        try:
            data = json.loads(read_input(path))

        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from e

        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")

        try:
            return cls.from_dict(t.cast(RunConfigDict, data), path.parent)

        except ConfigError:
            raise

        except (TypeError, ValueError) as e:
            raise ConfigError(f"{path}: {e}") from e

    def to_dict(self, base: Path | None = None) -> RunConfigDict:
        output_dir = self.output_dir if base is None else self.output_dir.relative_to(base)
        return {
            "stations": [station.to_dict(base) for station in self.stations],
            "output_dir": output_dir.as_posix(),
            "correction": self.vars.to_dict(),  # type: ignore[typeddict-item]
            "periods": self.scheme.to_dict(),  # type: ignore[typeddict-item]
            "blocks": self.blocks.to_dict(),
            "calibration": self.calibration.to_dict(),  # type: ignore[typeddict-item]
            "qc": self.qc.to_dict(),  # type: ignore[typeddict-item]
            "evaluation": self.evaluation.to_dict(),  # type: ignore[typeddict-item]
        }


class Command(t.Protocol):
    name: str
    help: str

    def add_arguments(self, parser: argparse.ArgumentParser, /) -> None:
        ...

    async def run(self, args: argparse.Namespace, /) -> None:
        ...


class BCRunner:
    """Runs commands over the stations of a config, at most `jobs` stations at a time."""

    def __init__(self, config: RunConfig | None = None, *, jobs: int = DEFAULT_JOBS) -> None:
        if jobs < 1:
            raise CommandError("--jobs must be at least 1")

        self.config = config or RunConfig()
        self.jobs = jobs
        self.commands: dict[str, Command] = {}
        self.hard_errors = 0
        self.station_failures: dict[str, str] = {}

    @property
    def output_dir(self) -> Path:
        return self.config.output_dir

    def station_path(self, station: str, suffix: str, method: Method | None = None) -> Path:
        """Output file of a station, e.g. `<station>.mc-loci.params.json`."""
        name = station if method is None else f"{station}.{method.cli_name}"
        return self.output_dir / f"{name}{suffix}"

    def add_command(self, command: Command, /) -> None:
        if command.name in self.commands:
            raise CommandError(f"Command {command.name!r} registered twice")

        self.commands[command.name] = command
        logger.debug('Command "%s" loaded', command.name)

    def load_extensions(self, package: str) -> None:
        """Imports every module of a package and calls its `setup(runner)`."""
        module = importlib.import_module(package)

        for info in sorted(pkgutil.iter_modules(module.__path__), key=lambda info: info.name):
            extension = importlib.import_module(f"{package}.{info.name}")
            setup = getattr(extension, "setup", None)

            if setup is not None:
                setup(self)

    def read_series(self, path: Path) -> DailySeries:
        try:
            return parse_station_csv(read_input(path))

        except ParseError as e:
            raise ParseError(f"{path}: {e}") from e

    def read_gauge(self, station: Station) -> DailySeries:
        """The quality controlled gauge series when `qc` has written one, else the raw one."""
        clean = self.station_path(station.name, CLEAN_SUFFIX)

        if clean.is_file():
            logger.debug("Using quality controlled gauge %s", clean)
            return self.read_series(clean)

        return self.read_series(station.gauge)

    def on_station_error(self, station: Station, error: Exception) -> None:
        match error:
            case ParseError() | InputFileError() | ConfigError() | CommandError():
                logger.error("%s", error)
                self.hard_errors += 1

            case FitInsufficientData() | DegenerateSampleError() | SeasonalFitError():
                logger.error("Fit failed: %s", error, exc_info=error)
                self.station_failures[station.name] = f"fit failed: {error}"

            case EmptySampleError() | SeriesError() | BiasCorrectionError():
                logger.error("Correction failed: %s", error, exc_info=error)
                self.station_failures[station.name] = str(error)

            case _:
                logger.exception("Unexpected error", exc_info=error)
                self.hard_errors += 1

    async def _run_station(
        self, semaphore: asyncio.Semaphore, func: t.Callable[[Station], T], station: Station
    ) -> T | None:
        async with semaphore:
            # to_thread copies this task's context into the worker
            current_station.set(station.name)

            try:
                return await asyncio.to_thread(func, station)

            except Exception as e:
                self.on_station_error(station, e)
                return None

    async def map_stations(
        self, func: t.Callable[[Station], T], stations: t.Sequence[Station] | None = None
    ) -> list[T | None]:
        """Calls `func` for every station in worker threads; results keep station order and
        are None where the station failed."""
        stations = self.config.stations if stations is None else stations
        semaphore = asyncio.Semaphore(self.jobs)
        return await asyncio.gather(
            *(self._run_station(semaphore, func, station) for station in stations)
        )

    def run(self, args: argparse.Namespace) -> int:
        """Runs the chosen command and returns the exit code."""
        command = self.commands[args.command]
        logger.info("Running %s over %d station(s)", command.name, len(self.config.stations))

        try:
            asyncio.run(command.run(args))

        except (CommandError, BiasCorrectionError) as e:
            logger.error("%s", e)
            self.hard_errors += 1

        for name, reason in self.station_failures.items():
            logger.warning("Station %s failed: %s", name, reason)

        return 1 if self.hard_errors else 0


def add_method_argument(parser: argparse.ArgumentParser, /) -> None:
    parser.add_argument(
        "--method",
        action="append",
        type=Method.from_cli,
        metavar="{" + ",".join(method.cli_name for method in Method) + "}",
        help="correction method, may be repeated; all four by default",
    )


def chosen_methods(args: argparse.Namespace, /) -> list[Method]:
    return args.method or list(Method)
