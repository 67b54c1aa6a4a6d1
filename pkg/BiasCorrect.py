from __future__ import annotations

import json
import logging
import os
import sys
import typing as t
from argparse import ArgumentParser
from pathlib import Path

from dotenv import load_dotenv

from config import DEFAULT_JOBS, DEFAULT_SEED, JOBS_ENV, LOG_LEVEL_ENV
from lib_helpers import CommandError, StationFormatter, StationRecord, WarningSummaryHandler
from runner import BCRunner, RunConfig
from RainfallBC.errors import ConfigError

logger = logging.getLogger("main")


def setup_logging(level: str, log_file: Path | None = None) -> WarningSummaryHandler:
    logging.setLogRecordFactory(StationRecord)
    logger.setLevel(level)
    formatter = StationFormatter("[{levelname}] - {name}: {message}", style="{")

    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    stream = logging.StreamHandler(sys.stderr)
    stream.setLevel(level)
    stream.formatter = formatter
    logger.addHandler(stream)

    if log_file is not None:
        file = logging.FileHandler(log_file, encoding="utf-8")
        file.formatter = StationFormatter(
            "{asctime} [{levelname}] - {name}: {message}", "%d.%m.%Y %H:%M:%S", style="{"
        )
        logger.addHandler(file)

    summary = WarningSummaryHandler()
    logger.addHandler(summary)
    return summary


def build_parser(runner: BCRunner) -> ArgumentParser:
    parser = ArgumentParser(
        prog="BiasCorrect", description="Daily rainfall bias correction against gauge data."
    )
    parser.add_argument("--config", type=Path, help="run configuration JSON")
    parser.add_argument("--out", type=Path, help="output directory, overrides the config")
    parser.add_argument(
        "--jobs",
        type=int,
        default=os.environ.get(JOBS_ENV, str(DEFAULT_JOBS)),
        help="stations processed at once",
    )
    parser.add_argument(
        "--seed", type=int, default=DEFAULT_SEED, help="unsigned 64 bit seed of synthetic data"
    )
    parser.add_argument("--log-file", type=Path)
    parser.add_argument(
        "--log-level",
        default=os.environ.get(LOG_LEVEL_ENV, "INFO").upper(),
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
    )
    parser.add_argument(
        "--print-default-config",
        action="store_true",
        help="print the fully defaulted configuration and exit",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    for command in runner.commands.values():
        command.add_arguments(subparsers.add_parser(command.name, help=command.help))

    return parser


def main(argv: t.Sequence[str] | None = None) -> int:
    load_dotenv()
    runner = BCRunner()
    runner.load_extensions("commands")
    parser = build_parser(runner)
    args = parser.parse_args(argv)

    if args.print_default_config:
        print(json.dumps(RunConfig().to_dict(), indent=2))
        return 0

    if args.command is None:
        parser.error("a command is required")

    summary = setup_logging(args.log_level, args.log_file)

    try:
        if args.jobs < 1:
            raise CommandError("--jobs must be at least 1")

        if args.config is not None:
            runner.config = RunConfig.load(args.config)

        elif args.command != "synth":
            raise CommandError("--config is required")

        if args.out is not None:
            runner.config.output_dir = args.out

        runner.jobs = args.jobs

    except (CommandError, ConfigError) as e:
        logger.error("%s", e)
        return 1

    code = runner.run(args)
    summary.print_summary()
    logger.info("Finished with exit code %d", code)
    return code


if __name__ == "__main__":
    exit_code = main()
    logging.shutdown()
    sys.exit(exit_code)
