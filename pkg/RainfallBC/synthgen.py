from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field
from datetime import date

import numpy as np
from typing_extensions import Self

from .conventional import SATURATION_LIMIT
from .core import DEFAULT_VARS, DailySeries, FloatArray, PeriodScheme
from .errors import ConfigError
from .stats import GammaParams

logger = logging.getLogger(f"main.{__name__}")

MAX_SEED: t.Final = 2**64 - 1


@dataclass(frozen=True, slots=True)
class PeriodClimate:
    """Occurrence and intensity of the reference chain in one period.

    Attributes
    -----------
    pw:
        Probability of a rain day after a rain day.
    pd:
        Probability of a rain day after a dry day.
    gamma_wet_lag:
        Excess amount distribution of rain days following a rain day.
    gamma_dry_lag:
        Excess amount distribution of rain days following a dry day.
    """

    pw: float
    pd: float
    gamma_wet_lag: GammaParams
    gamma_dry_lag: GammaParams

    def __post_init__(self) -> None:
        if not (0 <= self.pw <= 1 and 0 <= self.pd <= 1):
            raise ConfigError(
                f"Transition probabilities must lie in [0, 1], got {self.pw}, {self.pd}"
            )

    @property
    def p0(self) -> float:
        """Stationary rain day probability; pd when the chain has no unique stationary state."""
        denominator = 1 - self.pw + self.pd
        return self.pd / denominator if denominator > 0 else self.pd

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        return cls(
            float(json["pw"]),
            float(json["pd"]),
            GammaParams.from_dict(json["gamma_wet_lag"]),
            GammaParams.from_dict(json["gamma_dry_lag"]),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "pw": self.pw,
            "pd": self.pd,
            "gamma_wet_lag": self.gamma_wet_lag.to_dict(),
            "gamma_dry_lag": self.gamma_dry_lag.to_dict(),
        }


@dataclass(frozen=True, slots=True)
class Inflation:
    """Turns the reference chain into a model-like one driven by the same uniforms.

    Attributes
    -----------
    wet_multiplier:
        Factor on the probability of rain after a dry day.
    persistence:
        Divisor of the probability of a dry day after a rain day.
    intensity_scale:
        Factor on model amounts.
    cap:
        Upper clamp of the inflated probabilities.
    """

    wet_multiplier: float = 1.8
    persistence: float = 1.0
    intensity_scale: float = 0.6
    cap: float = 0.98

    def __post_init__(self) -> None:
        if self.wet_multiplier <= 0 or self.persistence <= 0 or self.intensity_scale <= 0:
            raise ConfigError("Inflation factors must be positive")

        if not 0 < self.cap <= 1:
            raise ConfigError("Inflation cap must lie in (0, 1]")

    def pw(self, pw: float) -> float:
        return min(self.cap, 1 - (1 - pw) / self.persistence)

    def pd(self, pd: float) -> float:
        return min(self.cap, self.wet_multiplier * pd)

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        return cls(**{k: float(v) for k, v in json.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def _seasonal_climates(scheme: PeriodScheme) -> dict[int, PeriodClimate]:
    # wettest in January, rain after rain twice as intense as rain after a dry day
    climates = {}

    for m in scheme.periods:
        months = scheme.months_in(m)
        phase = sum(math.cos(2 * math.pi * (month - 1) / 12) for month in months) / len(months)
        climates[m] = PeriodClimate(
            0.5 + 0.2 * phase,
            0.2 + 0.1 * phase,
            GammaParams(0.8, 12.0),
            GammaParams(0.8, 6.0),
        )

    return climates


@dataclass(frozen=True, slots=True)
class SynthSpec:
    """Everything `generate` needs; equal specs always give identical series.

    Attributes
    -----------
    climates:
        Reference chain per period of `scheme`.
    scheme:
        Periods the climates are keyed by.
    years:
        Whole calendar years to simulate.
    start_year:
        First simulated year.
    seed:
        Philox key, an unsigned 64 bit integer.
    inflation:
        Derives the model series; None gives a model identical to the truth.
    missing_fraction:
        Fraction of truth days made missing at random.
    t_x:
        Rain day threshold amounts are generated above.
    """

    climates: t.Mapping[int, PeriodClimate]
    scheme: PeriodScheme = field(default_factory=PeriodScheme.monthly)
    years: int = 50
    start_year: int = 1974
    seed: int = 0
    inflation: Inflation | None = field(default_factory=Inflation)
    missing_fraction: float = 0.0
    t_x: float = DEFAULT_VARS.T_X

    def __post_init__(self) -> None:
        if self.years < 1:
            raise ConfigError("At least one year must be simulated")

        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError("Seed must be an unsigned 64 bit integer")

        if not 0 <= self.missing_fraction < 1:
            raise ConfigError("Missing fraction must lie in [0, 1)")

        if missing := set(self.scheme.periods) - set(self.climates):
            raise ConfigError(f"No climate for periods {sorted(missing)}")

    @classmethod
    def seasonal(cls, scheme: PeriodScheme | None = None, **kwargs: t.Any) -> Self:
        """A seasonal climate with pw between 0.3 and 0.7 and pd between 0.1 and 0.3."""
        scheme = scheme or PeriodScheme.monthly()
        return cls(_seasonal_climates(scheme), scheme, **kwargs)

    @classmethod
    def constant(cls, climate: PeriodClimate, **kwargs: t.Any) -> Self:
        """The same climate all year round."""
        scheme = kwargs.pop("scheme", None) or PeriodScheme.monthly()
        return cls({m: climate for m in scheme.periods}, scheme, **kwargs)

    @property
    def start_date(self) -> date:
        return date(self.start_year, 1, 1)

    @property
    def end_date(self) -> date:
        return date(self.start_year + self.years - 1, 12, 31)

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        scheme = PeriodScheme.monthly()

        if "scheme" in json:
            scheme = PeriodScheme.from_dict(json["scheme"])

        inflation = json.get("inflation", {})
        return cls(
            {int(m): PeriodClimate.from_dict(c) for m, c in json["climates"].items()}
            if "climates" in json
            else _seasonal_climates(scheme),
            scheme,
            years=int(json.get("years", 50)),
            start_year=int(json.get("start_year", 1974)),
            seed=int(json.get("seed", 0)),
            inflation=None if inflation is None else Inflation.from_dict(inflation),
            missing_fraction=float(json.get("missing_fraction", 0.0)),
            t_x=float(json.get("t_x", DEFAULT_VARS.T_X)),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "climates": {str(m): c.to_dict() for m, c in sorted(self.climates.items())},
            "scheme": self.scheme.to_dict(),
            "years": self.years,
            "start_year": self.start_year,
            "seed": self.seed,
            "inflation": None if self.inflation is None else self.inflation.to_dict(),
            "missing_fraction": self.missing_fraction,
            "t_x": self.t_x,
        }


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by `seed`, advanced by 2**128 draws per stream."""
    bit_generator = np.random.Philox(key=seed)

    if stream:
        bit_generator = bit_generator.jumped(stream)

    return np.random.Generator(bit_generator)


def _simulate(
    u: FloatArray,
    p: tuple[FloatArray, FloatArray],
    q: tuple[FloatArray, FloatArray] | None,
    p_first: float,
    q_first: float,
) -> tuple[FloatArray, FloatArray]:
    # rain probability actually used on every day by the truth and the model chain;
    # p and q hold (after wet, after dry) probabilities per day
    n = u.size
    p_used = np.empty(n)
    q_used = np.empty(n)
    truth_wet = model_wet = False

    for i in range(n):
        if i == 0:
            p_i, q_i = p_first, q_first

        else:
            p_i = p[0][i] if truth_wet else p[1][i]
            q_i = (q[0][i] if model_wet else q[1][i]) if q is not None else p_i

        q_i = max(p_i, q_i)
        p_used[i], q_used[i] = p_i, q_i
        truth_wet = u[i] < p_i
        model_wet = u[i] < q_i

    return p_used, q_used


def _excess(gamma_u: FloatArray, params: t.Sequence[GammaParams], which: np.ndarray) -> FloatArray:
    # inverse CDF draws, `which` selecting the distribution of every element
    out = np.zeros(gamma_u.size)
    u = np.minimum(gamma_u, SATURATION_LIMIT)

    for k, gamma in enumerate(params):
        sel = which == k

        if sel.any():
            out[sel] = gamma.ppf(u[sel])

    return out


def generate(spec: SynthSpec, *, station: int = 0) -> tuple[DailySeries, DailySeries]:
    """Simulates a truth series and a model-like series from one stream of uniforms.

    Each day draws a single uniform u. The truth is wet when u falls below the rain
    probability after its previous state, with amount T_X plus the Gamma quantile of that
    state at 1 - u / p. The model is wet when u falls below the larger of the truth's
    probability and its own inflated one, with the intensity scaled dry-lag Gamma quantile
    at 1 - u / p; its amounts carry no memory of the previous day.

    Parameters
    -----------
    spec:
        The climate, length and seed.
    station:
        Stream index, giving independent series per station from one seed.
    """
    rng = rng_for(spec.seed, station)
    n = (spec.end_date - spec.start_date).days + 1
    u = rng.random(n)
    missing = rng.random(n) < spec.missing_fraction if spec.missing_fraction else np.zeros(n, bool)

    periods = spec.scheme.periods_of(DailySeries.empty(spec.start_date, spec.end_date))
    lookup = {m: spec.climates[m] for m in spec.scheme.periods}
    pw = np.array([lookup[int(m)].pw for m in periods])
    pd = np.array([lookup[int(m)].pd for m in periods])

    first = lookup[int(periods[0])].p0
    inflation = spec.inflation

    if inflation is None:
        p_used, q_used = _simulate(u, (pw, pd), None, first, first)

    else:
        qw = np.array([inflation.pw(p) for p in pw])
        qd = np.array([inflation.pd(p) for p in pd])
        p_used, q_used = _simulate(u, (pw, pd), (qw, qd), first, inflation.pd(first))

    truth_wet = u < p_used
    truth_lag_wet = np.concatenate(([False], truth_wet[:-1]))
    n_periods = spec.scheme.n_periods
    wet_lag_params = [lookup[m].gamma_wet_lag for m in spec.scheme.periods]
    dry_lag_params = [lookup[m].gamma_dry_lag for m in spec.scheme.periods]
    # first day and dry-lag days draw from the dry-lag Gamma of their period
    which = periods[truth_wet] - 1 + n_periods * ~truth_lag_wet[truth_wet]

    truth = np.zeros(n)
    truth[truth_wet] = spec.t_x + _excess(
        1 - u[truth_wet] / p_used[truth_wet], wet_lag_params + dry_lag_params, which
    )

    if inflation is None:
        model = truth.copy()

    else:
        model_wet = u < q_used
        model = np.zeros(n)
        model[model_wet] = inflation.intensity_scale * (
            spec.t_x
            + _excess(1 - u[model_wet] / q_used[model_wet], dry_lag_params, periods[model_wet] - 1)
        )

    truth[missing] = np.nan
    logger.debug("Generated %d days for station %d", n, station)
    return DailySeries(spec.start_date, truth), DailySeries(spec.start_date, model)
