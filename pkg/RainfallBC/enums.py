from __future__ import annotations

import typing as t
from enum import Enum, IntEnum

import numpy as np
import numpy.typing as npt


class WetState(IntEnum):
    """Enumeration of daily rain day states; the integer values are the array encoding."""

    MISSING = -1
    DRY = 0
    WET = 1

    def __str__(self) -> str:
        return self.name.capitalize()


class QcTest(str, Enum):
    """Enumeration of quality control tests"""

    RANGE = "Range"
    FLAT_LINE = "FlatLine"
    MAX_CONSECUTIVE_RAIN = "MaxConsecutiveRain"
    FALSE_ZEROS = "FalseZeros"

    def __str__(self) -> str:
        return self.value


class QcAction(str, Enum):
    """Enumeration of actions a quality control test can take"""

    FLAGGED_ONLY = "FlaggedOnly"
    SET_MISSING = "SetMissing"

    def __str__(self) -> str:
        return self.value


class MethodData(t.NamedTuple):
    cli_name: str
    label: str
    markov: bool
    quantile: bool

    def __str__(self) -> str:
        return self.label


class Method(MethodData, Enum):
    """Enumeration of bias correction methods"""

    # fmt: off
    LOCI    = MethodData("loci",    "LOCI",    False, False)
    QM      = MethodData("qm",      "QM",      False, True)
    MC_LOCI = MethodData("mc-loci", "MC LOCI", True,  False)
    MC_QM   = MethodData("mc-qm",   "MC QM",   True,  True)
    # fmt: on

    @classmethod
    def from_cli(cls, name: str, /) -> Method:
        for method in cls:
            if method.cli_name == name.lower():
                return method

        raise ValueError(f"Unknown method {name!r}")


class Response(str, Enum):
    """Enumeration of seasonal model responses"""

    OCCURRENCE = "occurrence"
    AMOUNT = "amount"


class CategoryData(t.NamedTuple):
    index: int
    lower: float
    upper: float
    label: str

    def __str__(self) -> str:
        return self.label

    def __contains__(self, value: float) -> bool:
        return self.lower <= value < self.upper


class RainCategory(CategoryData, Enum):
    """Enumeration of daily rainfall intensity categories, bounds in mm, half open"""

    # fmt: off
    DRY      = CategoryData(0,  0.0,  0.85,         "Dry")
    LIGHT    = CategoryData(1,  0.85, 5.0,          "Light")
    MODERATE = CategoryData(2,  5.0,  20.0,         "Moderate")
    HEAVY    = CategoryData(3,  20.0, 40.0,         "Heavy")
    VIOLENT  = CategoryData(4,  40.0, float("inf"), "Violent")
    # fmt: on

    @classmethod
    def of(cls, value: float, /) -> RainCategory:
        """Returns the category a single rainfall value falls in."""
        for category in cls:
            if value in category:
                return category

        raise ValueError(f"{value!r} is not a valid rainfall amount")

    @classmethod
    def categorize(cls, values: npt.ArrayLike, /) -> npt.NDArray[np.int8]:
        """Maps rainfall values to category indices; missing values map to -1."""
        array = np.asarray(values, dtype=float)
        edges = np.array([category.upper for category in cls][:-1])
        indices = np.searchsorted(edges, array, side="right").astype(np.int8)
        indices[np.isnan(array)] = -1
        return indices
