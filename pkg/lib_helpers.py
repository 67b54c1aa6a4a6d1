from __future__ import annotations

import logging
import sys
import typing as t
from collections import Counter
from contextvars import ContextVar
from pathlib import Path

current_station: ContextVar[str | None] = ContextVar("current_station", default=None)


class CommandError(Exception):
    """Exception raised when a command cannot run at all; ends the program with exit code 1."""


class InputFileError(CommandError):
    """Exception raised when an input file is missing or unreadable."""

    def __init__(self, path: Path, reason: str | None = None) -> None:
        self.path = path
        super().__init__(f"{path}: {reason or 'cannot be read'}")


def write_output(path: Path, content: str | bytes) -> Path:
    """Writes text or bytes, creating parent directories as needed."""
    path.parent.mkdir(parents=True, exist_ok=True)

    match content:
        case str():
            path.write_text(content, encoding="utf-8", newline="\n")

        case bytes():
            path.write_bytes(content)

        case _:
            raise TypeError(f"Cannot write {type(content).__name__}")

    return path


def read_input(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")

    except OSError as e:
        raise InputFileError(path, e.strerror) from e


class StationRecord(logging.LogRecord):
    """LogRecord with extra station attribute, taken from the running station task."""

    def __init__(self, *args: t.Any, **kwargs: t.Any) -> None:
        super().__init__(*args, **kwargs)
        self.station = current_station.get()


class StationFormatter(logging.Formatter):
    """Prefixes messages logged within a station task with the station name."""

    def format(self, record: logging.LogRecord) -> str:
        msg = super().format(record)
        station = getattr(record, "station", None)

        if station is None:
            return msg

        return f"[{station}] {msg}"


class WarningSummaryHandler(logging.Handler):
    """Handler counting warnings and errors per station for the exit summary."""

    def __init__(self, level: int = logging.WARNING) -> None:
        super().__init__(level)
        self.counts: Counter[tuple[str, int]] = Counter()

    def emit(self, record: logging.LogRecord) -> None:
        station = getattr(record, "station", None) or "-"
        self.counts[station, record.levelno] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def summary(self) -> str:
        if not self.counts:
            return "No warnings"

        lines = ["Warnings by station:"]

        for station in sorted({station for station, _ in self.counts}):
            levels = ", ".join(
                f"{count} {logging.getLevelName(level).lower()}"
                for (name, level), count in sorted(self.counts.items())
                if name == station
            )
            lines.append(f"  {station}: {levels}")

        return "\n".join(lines)

    def print_summary(self, file: t.TextIO | None = None) -> None:
        print(self.summary(), file=file or sys.stderr)
