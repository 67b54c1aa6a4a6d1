from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy import linalg, special

from .core import DEFAULT_VARS, DailySeries, FloatArray, IndicatorSeries, _Calendar
from .enums import Response, WetState
from .errors import ConfigError, FitInsufficientData, SeasonalFitError

logger = logging.getLogger(f"main.{__name__}")

SEASON_DAYS: t.Final = 366
GRADIENT_TOL: t.Final = 1e-8
MAX_ITERATIONS: t.Final = 100
OBS_PER_PARAMETER: t.Final = 10
# month lengths of the reference leap year every season is laid onto
_LEAP_MONTH_DAYS: t.Final = (31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


@dataclass(frozen=True, slots=True)
class SeasonalModelSpec:
    """Structure of a seasonal GLM.

    Attributes
    -----------
    order:
        0 for a single seasonal curve, 1 for one curve per previous day state.
    response:
        Rain day occurrence (logistic) or rain day amount (Gamma, log link).
    n_harmonics:
        Number of Fourier harmonics, 0 fits a constant.
    day_origin:
        Month whose first day is season day 1.
    """

    order: int = 0
    response: Response = Response.OCCURRENCE
    n_harmonics: int = 3
    day_origin: int = 8

    def __post_init__(self) -> None:
        if self.order not in (0, 1):
            raise ConfigError(f"Seasonal model order must be 0 or 1, got {self.order!r}")

        if not 0 <= self.n_harmonics <= 6:
            raise ConfigError(f"Number of harmonics must lie in 0..6, got {self.n_harmonics!r}")

        if not 1 <= self.day_origin <= 12:
            raise ConfigError("Day origin must be a month number 1..12")

    def __str__(self) -> str:
        return f"order {self.order} {self.response.value} ({self.n_harmonics} harmonics)"

    @property
    def states(self) -> tuple[str, ...]:
        return ("W", "D") if self.order == 1 else ("all",)

    @property
    def n_parameters(self) -> int:
        return (1 + 2 * self.n_harmonics) * len(self.states)


def season_day(series: _Calendar, day_origin: int = 8) -> npt.NDArray[np.int64]:
    """Season day 1..366 of every day of a series, day 1 being the first of `day_origin`.

    Every season is laid onto a leap year, so in other years the 29 February slot is
    simply never occupied."""
    offsets = np.zeros(13, dtype=np.int64)
    month = day_origin
    total = 0

    for _ in range(12):
        offsets[month] = total
        total += _LEAP_MONTH_DAYS[month - 1]
        month = month % 12 + 1

    return offsets[series.months] + series.days


def fourier_design(day: npt.ArrayLike, n_harmonics: int) -> FloatArray:
    """Regressors [1, sin(2 pi k d / 366), cos(2 pi k d / 366) for k = 1..n_harmonics].

    A scalar day gives a vector, an array of days a matrix with one row per day."""
    d = np.asarray(day, dtype=np.float64)
    angles = 2 * np.pi * np.multiply.outer(d, np.arange(1, n_harmonics + 1)) / SEASON_DAYS
    columns = [np.ones_like(d)[..., None]]

    for k in range(n_harmonics):
        columns += [np.sin(angles[..., k : k + 1]), np.cos(angles[..., k : k + 1])]

    return np.concatenate(columns, axis=-1)


@dataclass(slots=True)
class GlmData:
    """Daily observations aggregated by (state, season day).

    For occurrence `total` counts rain days out of `count` trials; for amount it sums
    the rain day values of `count` rain days."""

    response: Response
    design: FloatArray
    total: FloatArray
    count: FloatArray

    def mean(self, beta: FloatArray) -> FloatArray:
        eta = self.design @ beta

        if self.response is Response.OCCURRENCE:
            return special.expit(eta)

        return np.exp(eta)

    def log_likelihood(self, beta: FloatArray) -> float:
        """Log likelihood up to terms free of beta; the Gamma one per unit shape."""
        eta = self.design @ beta

        if self.response is Response.OCCURRENCE:
            # log(expit(eta)) * y + log(1 - expit(eta)) * (n - y)
            return float(self.total @ eta - self.count @ np.logaddexp(0.0, eta))

        return float(-(self.total @ np.exp(-eta)) - self.count @ eta)

    def gradient(self, beta: FloatArray) -> FloatArray:
        mu = self.mean(beta)

        if self.response is Response.OCCURRENCE:
            return self.design.T @ (self.total - self.count * mu)

        return self.design.T @ (self.total / mu - self.count)

    def _working(self, beta: FloatArray) -> tuple[FloatArray, FloatArray]:
        # IRLS weights and working response
        eta = self.design @ beta
        mu = self.mean(beta)

        if self.response is Response.OCCURRENCE:
            weights = self.count * mu * (1 - mu)
            with np.errstate(divide="ignore", invalid="ignore"):
                z = eta + (self.total - self.count * mu) / weights

            return weights, z

        mean_value = self.total / self.count
        return self.count, eta + (mean_value - mu) / mu


def irls(
    data: GlmData, *, tol: float = GRADIENT_TOL, max_iter: int = MAX_ITERATIONS
) -> tuple[FloatArray, int, float]:
    """Fits the GLM by iteratively reweighted least squares from zero coefficients.

    Steps that lower the log likelihood are halved. Returns the coefficients, the
    number of iterations and the final gradient norm.

    Raises
    -------
    SeasonalFitError
        The iteration did not reach the gradient tolerance or the data separate."""
    beta = np.zeros(data.design.shape[1])
    loglik = data.log_likelihood(beta)
    trace: list[float] = []

    for iteration in range(1, max_iter + 1):
        grad_norm = float(np.linalg.norm(data.gradient(beta)))
        trace.append(grad_norm)

        if grad_norm < tol:
            return beta, iteration - 1, grad_norm

        weights, z = data._working(beta)

        if not np.isfinite(z).all() or (weights <= 0).any():
            raise SeasonalFitError("Fitted probabilities reached 0 or 1 (separation)", trace)

        wx = data.design * weights[:, None]

        try:
            target = linalg.solve(data.design.T @ wx, wx.T @ z, assume_a="pos")

        except linalg.LinAlgError as e:
            raise SeasonalFitError(f"Singular IRLS system: {e}", trace) from None

        step = target - beta

        for _ in range(30):
            candidate = beta + step
            new_loglik = data.log_likelihood(candidate)

            if np.isfinite(new_loglik) and new_loglik >= loglik - 1e-12 * abs(loglik):
                break

            step /= 2

        else:
            break

        if np.max(np.abs(step)) < 1e-13 * max(1.0, float(np.max(np.abs(beta)))):
            # numerical floor: no representable improvement left
            beta, loglik = candidate, new_loglik
            break

        beta, loglik = candidate, new_loglik

        if np.max(np.abs(data.design @ beta)) > 30 and data.response is Response.OCCURRENCE:
            raise SeasonalFitError("Linear predictor diverging (separation)", trace)

    grad_norm = float(np.linalg.norm(data.gradient(beta)))

    if grad_norm < 1e-6:
        logger.debug("IRLS stopped at gradient norm %.3g", grad_norm)
        return beta, len(trace), grad_norm

    trace.append(grad_norm)
    raise SeasonalFitError(f"IRLS did not converge in {max_iter} iterations", trace)


@dataclass(slots=True)
class FittedCurves:
    """Seasonal curves of a fitted model over season days 1..366.

    `curves` maps "all" (order 0) or "W" and "D" (order 1) to 366 fitted values."""

    spec: SeasonalModelSpec
    curves: dict[str, FloatArray]
    coefficients: FloatArray
    iterations: int
    gradient_norm: float
    n_obs: int
    dispersion: float | None = None
    data: GlmData | None = field(default=None, repr=False)

    def curve(self, state: str = "all", /) -> FloatArray:
        return self.curves[state]

    def to_rows(self) -> list[tuple[int, str, float]]:
        return [
            (d, state, float(values[d - 1]))
            for state, values in self.curves.items()
            for d in range(1, SEASON_DAYS + 1)
        ]

    def to_csv(self) -> str:
        frame = pd.DataFrame.from_records(self.to_rows(), columns=["d", "state", "fitted"])
        return frame.to_csv(index=False, lineterminator="\n")

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "order": self.spec.order,
            "response": self.spec.response.value,
            "n_harmonics": self.spec.n_harmonics,
            "coefficients": self.coefficients.tolist(),
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "n_obs": self.n_obs,
            "dispersion": self.dispersion,
        }


def _aggregate(
    spec: SeasonalModelSpec,
    days: npt.NDArray[np.int64],
    groups: npt.NDArray[np.int64],
    response: FloatArray,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    n_groups = len(spec.states)
    keys = groups * SEASON_DAYS + days - 1
    total = np.bincount(keys, weights=response, minlength=n_groups * SEASON_DAYS)
    count = np.bincount(keys, minlength=n_groups * SEASON_DAYS).astype(np.float64)
    used = np.flatnonzero(count)

    basis = fourier_design(used % SEASON_DAYS + 1, spec.n_harmonics)
    width = basis.shape[1]
    design = np.zeros((used.size, width * n_groups))

    for g in range(n_groups):
        rows = used // SEASON_DAYS == g
        design[rows, g * width : (g + 1) * width] = basis[rows]

    return design, total[used], count[used]


def _groups(spec: SeasonalModelSpec, lagged: npt.ArrayLike | None, n: int) -> npt.NDArray[np.int64]:
    # group 0 = Wet lag (or everything for order 0), 1 = Dry lag, -1 unusable
    if spec.order == 0:
        return np.zeros(n, dtype=np.int64)

    if lagged is None:
        raise ValueError("Order 1 models need the lagged states")

    lagged = np.asarray(lagged)
    groups = np.full(n, -1, dtype=np.int64)
    groups[lagged == WetState.WET] = 0
    groups[lagged == WetState.DRY] = 1
    return groups


def _fit(
    spec: SeasonalModelSpec,
    days: npt.NDArray[np.int64],
    groups: npt.NDArray[np.int64],
    response: FloatArray,
) -> FittedCurves:
    usable = groups >= 0
    needed = spec.n_parameters * OBS_PER_PARAMETER

    if usable.sum() < needed:
        raise FitInsufficientData(int(usable.sum()), needed, f"{spec} data")

    for g, state in enumerate(spec.states):
        if not (groups == g).any():
            raise FitInsufficientData(0, 1, f"{spec} days after state {state}")

    days, groups, response = days[usable], groups[usable], response[usable]
    design, total, count = _aggregate(spec, days, groups, response)
    data = GlmData(spec.response, design, total, count)
    beta, iterations, grad_norm = irls(data)

    basis = fourier_design(np.arange(1, SEASON_DAYS + 1), spec.n_harmonics)
    width = basis.shape[1]
    inverse_link = special.expit if spec.response is Response.OCCURRENCE else np.exp
    curves = {
        state: inverse_link(basis @ beta[g * width : (g + 1) * width])
        for g, state in enumerate(spec.states)
    }

    dispersion = None

    if spec.response is Response.AMOUNT:
        daily_beta = beta.reshape(-1, width)[groups]
        mu = inverse_link(
            np.einsum("ij,ij->i", fourier_design(days, spec.n_harmonics), daily_beta)
        )
        dof = max(response.size - beta.size, 1)
        dispersion = float(np.sum(((response - mu) / mu) ** 2) / dof)

    logger.debug("Fitted %s in %d iterations", spec, iterations)
    return FittedCurves(
        spec, curves, beta, iterations, grad_norm, int(response.size), dispersion, data
    )


def fit_occurrence_model(
    indicator: IndicatorSeries, lagged: npt.ArrayLike | None, spec: SeasonalModelSpec
) -> FittedCurves:
    """Fits a logistic seasonal model of rain day occurrence.

    Order 1 interacts the previous day state with every Fourier term, giving separate
    curves after Wet and after Dry days; days with a Missing lag are left out.

    Raises
    -------
    FitInsufficientData
        Fewer than ten usable days per parameter, or a lag class is empty.
    SeasonalFitError
        No convergence or separation."""
    if spec.response is not Response.OCCURRENCE:
        raise ConfigError("Occurrence models need an occurrence spec")

    present = indicator.present
    days = season_day(indicator, spec.day_origin)[present]
    groups = _groups(spec, lagged, len(indicator))[present]
    response = indicator.wet[present].astype(np.float64)
    return _fit(spec, days, groups, response)


def fit_amount_model(
    series: DailySeries,
    indicator: IndicatorSeries,
    lagged: npt.ArrayLike | None,
    spec: SeasonalModelSpec,
    t_x: float = DEFAULT_VARS.T_X,
) -> FittedCurves:
    """Fits a Gamma GLM with log link to rain day amounts, the days where the value
    exceeds `t_x` and the indicator is Wet.

    The curves are the fitted mean rainfall per rain day; the dispersion is estimated
    from Pearson residuals."""
    if spec.response is not Response.AMOUNT:
        raise ConfigError("Amount models need an amount spec")

    with np.errstate(invalid="ignore"):
        rain_day = indicator.wet & (series.values > t_x)

    days = season_day(series, spec.day_origin)[rain_day]
    groups = _groups(spec, lagged, len(series))[rain_day]
    return _fit(spec, days, groups, series.values[rain_day])


def rmse_curve(fit_a: FittedCurves, fit_b: FittedCurves) -> float | tuple[float, float]:
    """Root mean square difference of two fitted curve sets over the 366 season days.

    Returns one value for order 0 and a (W, D) pair for order 1."""
    if (fit_a.spec.order, fit_a.spec.response) != (fit_b.spec.order, fit_b.spec.response):
        raise ValueError(f"Cannot compare {fit_a.spec} with {fit_b.spec}")

    values = tuple(
        math.sqrt(float(np.mean((fit_a.curves[state] - fit_b.curves[state]) ** 2)))
        for state in fit_a.spec.states
    )
    return values[0] if len(values) == 1 else (values[0], values[1])


def specs_from_config(n_harmonics: int, day_origin: int) -> list[SeasonalModelSpec]:
    """The four models of the evaluation: both orders of occurrence and amount."""
    return [
        SeasonalModelSpec(order, response, n_harmonics, day_origin)
        for response in Response
        for order in (0, 1)
    ]

