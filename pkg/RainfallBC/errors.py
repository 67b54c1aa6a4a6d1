from __future__ import annotations

import typing as t


class BiasCorrectionError(Exception):
    """Base class for bias correction related errors"""


class ConfigError(BiasCorrectionError, ValueError):
    """Exception raised when a configuration value is out of its documented range"""


class SeriesError(BiasCorrectionError, ValueError):
    """Exception raised when a daily series violates its invariants"""


class ParseError(BiasCorrectionError):
    """Exception raised when a station CSV cannot be parsed"""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line

        if line is not None:
            message = f"line {line}: {message}"

        super().__init__(message)


class EmptySampleError(BiasCorrectionError, ValueError):
    """Exception raised when a statistic is requested of an empty sample"""


class FitInsufficientData(BiasCorrectionError):
    """Exception raised when a sample is too small to fit a model to"""

    def __init__(self, size: int, required: int, what: str = "sample") -> None:
        self.size = size
        self.required = required
        super().__init__(f"{what} of size {size} is below the required {required}")


class DegenerateSampleError(BiasCorrectionError):
    """Exception raised when a sample or parameter set admits no unique solution"""


class UnboundedQuantileError(BiasCorrectionError, ValueError):
    """Exception raised when the inverse CDF is requested at probability 1"""


class SeasonalFitError(BiasCorrectionError):
    """Exception raised when a seasonal GLM fails to converge or separates"""

    def __init__(self, message: str, trace: t.Sequence[float] = ()) -> None:
        self.trace = tuple(trace)

        if self.trace:
            message += f" (gradient norms: {', '.join(f'{g:.3g}' for g in self.trace[-5:])})"

        super().__init__(message)
