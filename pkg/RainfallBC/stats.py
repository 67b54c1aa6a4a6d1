from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import special
from typing_extensions import Self

from .errors import (
    DegenerateSampleError,
    EmptySampleError,
    FitInsufficientData,
    UnboundedQuantileError,
)

if t.TYPE_CHECKING:
    from .types import GammaDict

logger = logging.getLogger(f"main.{__name__}")

GAMMA_FIT_RTOL: t.Final = 1e-10
GAMMA_FIT_MAX_ITER: t.Final = 100


def present_values(sample: npt.ArrayLike, /) -> npt.NDArray[np.float64]:
    """Returns the sample as a float array with missing (NaN) entries dropped."""
    array = np.asarray(sample, dtype=np.float64).ravel()
    return array[~np.isnan(array)]


def _nonempty(sample: npt.ArrayLike, what: str = "sample") -> npt.NDArray[np.float64]:
    values = present_values(sample)

    if values.size == 0:
        raise EmptySampleError(f"Cannot compute a statistic of an empty {what}")

    return values


def empirical_quantile(sample: npt.ArrayLike, p: float) -> float:
    """Inverse empirical CDF: the order statistic x_(k) with k = ceil(p*n) clamped to [1, n].

    Parameters
    -----------
    sample:
        Values, missing entries are ignored.
    p:
        Probability in [0, 1].

    Raises
    -------
    EmptySampleError
        No values remain after dropping missing ones."""
    if not 0 <= p <= 1:
        raise ValueError(f"Probability {p!r} outside [0, 1]")

    values = np.sort(_nonempty(sample))
    n = values.size
    # rounding keeps p*n that should be integral from stepping up a rank
    k = min(max(math.ceil(round(p * n, 9)), 1), n)
    return float(values[k - 1])


def exceedance_fraction(sample: npt.ArrayLike, threshold: float) -> float:
    """Fraction of present values strictly above the threshold."""
    values = _nonempty(sample)
    return float(np.count_nonzero(values > threshold)) / values.size


def threshold_for_frequency(values: npt.ArrayLike, target_p: float) -> float:
    """Returns the threshold whose exceedance frequency in `values` best matches `target_p`.

    The threshold is floored at 0; with heavy ties at zero the achieved frequency
    may then fall below the target, see `exceedance_fraction`."""
    if not 0 <= target_p <= 1:
        raise ValueError(f"Target frequency {target_p!r} outside [0, 1]")

    return max(empirical_quantile(values, 1.0 - target_p), 0.0)


@t.runtime_checkable
class IntensityDistribution(t.Protocol):
    """Distribution of rain day excess amounts the quantile mapping methods map through."""

    def cdf(self, x: npt.ArrayLike, /) -> t.Any:
        ...

    def ppf(self, u: npt.ArrayLike, /) -> t.Any:
        ...


@dataclass(frozen=True, slots=True)
class GammaParams:
    """Two parameter Gamma distribution, scale in mm."""

    shape: float
    scale: float

    def __post_init__(self) -> None:
        if not (self.shape > 0 and self.scale > 0 and math.isfinite(self.shape * self.scale)):
            raise ValueError(f"Invalid Gamma parameters shape={self.shape!r} scale={self.scale!r}")

    def __str__(self) -> str:
        return f"Gamma(shape={self.shape:.4g}, scale={self.scale:.4g})"

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    def cdf(self, x: npt.ArrayLike, /) -> t.Any:
        return gamma_cdf(self, x)

    def ppf(self, u: npt.ArrayLike, /) -> t.Any:
        return gamma_inv_cdf(self, u)

    @classmethod
    def from_dict(cls, json: t.Mapping[str, float], /) -> Self:
        return cls(float(json["shape"]), float(json["scale"]))

    def to_dict(self) -> GammaDict:
        return {"shape": self.shape, "scale": self.scale}


def gamma_cdf(params: GammaParams, x: npt.ArrayLike) -> t.Any:
    """Regularized lower incomplete gamma function at x / scale; negative x map to 0."""
    array = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    result = special.gammainc(params.shape, array / params.scale)
    return float(result) if result.ndim == 0 else result


def gamma_inv_cdf(params: GammaParams, u: npt.ArrayLike) -> t.Any:
    """Inverse of `gamma_cdf` for u in [0, 1).

    Raises
    -------
    UnboundedQuantileError
        Any u equals 1."""
    array = np.asarray(u, dtype=np.float64)

    if (array >= 1).any():
        raise UnboundedQuantileError("Gamma quantile at probability 1 is unbounded")

    if (array < 0).any():
        raise ValueError("Probabilities cannot be negative")

    result = params.scale * special.gammaincinv(params.shape, array)
    return float(result) if result.ndim == 0 else result


def gamma_fit(sample: npt.ArrayLike, min_fit_n: int = 10) -> GammaParams:
    """Maximum likelihood Gamma fit.

    The shape solves log k - digamma(k) = log(mean) - mean(log x) by Newton iteration,
    seeded with the method of moments estimate; the scale is then mean / k.

    Parameters
    -----------
    sample:
        Positive values; missing entries are ignored.
    min_fit_n:
        Smallest sample size accepted.

    Raises
    -------
    FitInsufficientData
        Fewer than `min_fit_n` values.
    DegenerateSampleError
        All values identical.
    """
    values = present_values(sample)

    if values.size < min_fit_n:
        raise FitInsufficientData(values.size, min_fit_n, "Gamma sample")

    if (values <= 0).any():
        raise ValueError("Gamma fit requires strictly positive values")

    mean = float(values.mean())
    s = math.log(mean) - float(np.log(values).mean())

    if np.ptp(values) == 0 or s <= 0:
        raise DegenerateSampleError("Cannot fit a Gamma distribution to identical values")

    variance = float(values.var())
    shape = mean * mean / variance if variance > 0 else 1.0

    for _ in range(GAMMA_FIT_MAX_ITER):
        f = math.log(shape) - float(special.digamma(shape)) - s
        df = 1.0 / shape - float(special.polygamma(1, shape))
        new_shape = shape - f / df

        if new_shape <= 0:
            new_shape = shape / 2

        if abs(new_shape - shape) <= GAMMA_FIT_RTOL * shape:
            shape = new_shape
            break

        shape = new_shape

    else:
        logger.debug("Gamma shape iteration hit the iteration cap at k=%g", shape)

    return GammaParams(shape, mean / shape)


class KsResult(t.NamedTuple):
    d_statistic: float
    p_value: float
    n1: int
    n2: int

    def to_dict(self) -> dict[str, float | int]:
        return self._asdict()


def ks_two_sample(a: npt.ArrayLike, b: npt.ArrayLike) -> KsResult:
    """Two sample Kolmogorov-Smirnov test.

    D is the largest vertical gap between the two empirical CDFs, evaluated at every
    point of the merged support. The p-value uses the asymptotic Kolmogorov distribution
    with effective size n1*n2/(n1+n2)."""
    x = np.sort(_nonempty(a, "first sample"))
    y = np.sort(_nonempty(b, "second sample"))
    n1, n2 = x.size, y.size

    support = np.concatenate((x, y))
    cdf_x = np.searchsorted(x, support, side="right") / n1
    cdf_y = np.searchsorted(y, support, side="right") / n2
    d = float(np.max(np.abs(cdf_x - cdf_y)))

    en = n1 * n2 / (n1 + n2)
    p = float(np.clip(special.kolmogorov(math.sqrt(en) * d), 0.0, 1.0))
    return KsResult(d, p, n1, n2)


class ComparisonMetrics(t.NamedTuple):
    mean_error: float
    rmse: float
    correlation: float | None
    sd_ratio: float | None
    n: int

    def to_dict(self) -> dict[str, float | int | None]:
        return self._asdict()


def comparison_metrics(model: npt.ArrayLike, obs: npt.ArrayLike) -> ComparisonMetrics:
    """Mean error, RMSE, correlation and ratio of standard deviations of model against obs.

    Pairs with either side missing are dropped. ME and RMSE divide by N, the standard
    deviations by N - 1. Correlation and ratio are None below two pairs or when either
    side has zero variance."""
    y = np.asarray(model, dtype=np.float64)
    x = np.asarray(obs, dtype=np.float64)

    if x.shape != y.shape:
        raise ValueError(f"Model and obs lengths differ: {y.size} != {x.size}")

    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    n = x.size

    if n == 0:
        raise EmptySampleError("No pairwise complete values to compare")

    diff = y - x
    mean_error = float(diff.mean())
    rmse = math.sqrt(float(np.mean(diff * diff)))

    if n < 2:
        return ComparisonMetrics(mean_error, rmse, None, None, n)

    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)

    if sxx == 0 or syy == 0:
        return ComparisonMetrics(mean_error, rmse, None, None, n)

    correlation = float(np.clip(float(dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))
    sd_ratio = math.sqrt(syy / (n - 1)) / math.sqrt(sxx / (n - 1))
    return ComparisonMetrics(mean_error, rmse, correlation, sd_ratio, n)
