from __future__ import annotations

from datetime import date

import pytest

from RainfallBC.core import DailySeries, PeriodScheme
from RainfallBC.stats import GammaParams
from RainfallBC.synthgen import PeriodClimate, SynthSpec, generate

CONSTANT_CLIMATE = PeriodClimate(0.6, 0.2, GammaParams(0.8, 12.0), GammaParams(0.8, 6.0))


def series(start: date, *values: float | None) -> DailySeries:
    return DailySeries.from_values(start, values)


@pytest.fixture(scope="session")
def seasonal_pair() -> tuple[DailySeries, DailySeries]:
    """30 years of a seasonal truth and its model-like counterpart."""
    return generate(SynthSpec.seasonal(years=30, seed=7))


@pytest.fixture(scope="session")
def constant_pair() -> tuple[DailySeries, DailySeries]:
    """100 years of a climate with pw = 0.6 and pd = 0.2 all year round."""
    return generate(SynthSpec.constant(CONSTANT_CLIMATE, years=100, seed=11))


@pytest.fixture(scope="session")
def single_period() -> PeriodScheme:
    return PeriodScheme((1,) * 12)
