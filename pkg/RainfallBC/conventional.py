from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from typing_extensions import Self

from .core import (
    DEFAULT_VARS,
    QM_TOGGLE_ALIAS,
    DailySeries,
    FloatArray,
    PeriodScheme,
    align,
    common_mask,
    read_toggle,
)
from .enums import Method
from .errors import ConfigError, DegenerateSampleError, FitInsufficientData
from .stats import (
    GammaParams,
    IntensityDistribution,
    exceedance_fraction,
    gamma_fit,
    threshold_for_frequency,
)

if t.TYPE_CHECKING:
    from .types import ConvPeriodDict

logger = logging.getLogger(f"main.{__name__}")

SATURATION_LIMIT: t.Final = 1.0 - 1e-12


def mean_excess(values: FloatArray, threshold: float) -> float | None:
    """Mean of `values - threshold` over the values above the threshold, None if there are none."""
    excess = values[values > threshold] - threshold
    return float(excess.mean()) if excess.size else None


def scale_factor(
    obs_excess: float | None, model_excess: float | None, what: str, warnings: list[str]
) -> float:
    """Ratio of mean excesses, falling back to 1 with a warning when either side is undefined."""
    if obs_excess is None or model_excess is None or model_excess <= 0 or obs_excess <= 0:
        warnings.append(f"{what}: no rain days to scale against, scale set to 1")
        return 1.0

    return obs_excess / model_excess


def fit_excess(
    values: FloatArray, threshold: float, min_fit_n: int, what: str, warnings: list[str]
) -> GammaParams | None:
    """Fits a Gamma to the excesses over a threshold, None with a warning if it cannot."""
    try:
        return gamma_fit(values[values > threshold] - threshold, min_fit_n)

    except (FitInsufficientData, DegenerateSampleError) as e:
        warnings.append(f"{what}: {e}")
        return None


def quantile_map(
    excess: FloatArray, source: IntensityDistribution, target: IntensityDistribution
) -> tuple[FloatArray, int]:
    """Maps excesses through `target.ppf(source.cdf(x))`.

    Returns the mapped values and the number of CDF values clamped below 1."""
    u = np.asarray(source.cdf(excess), dtype=np.float64)
    saturated = u > SATURATION_LIMIT
    u = np.where(saturated, SATURATION_LIMIT, u)
    return np.asarray(target.ppf(u), dtype=np.float64), int(saturated.sum())


def wet_amounts(mapped_excess: FloatArray, t_x: float) -> FloatArray:
    """Adds the rain day threshold back, keeping every result strictly above it."""
    return np.maximum(mapped_excess + t_x, np.nextafter(t_x, np.inf))


@dataclass(slots=True)
class ConvPeriod:
    """Calibrated LOCI or QM quantities for one period."""

    threshold_ty: float
    loci_scale: float
    obs_wet_fraction: float | None = None
    model_wet_fraction: float | None = None
    n_days: int = 0
    gamma_obs: GammaParams | None = None
    gamma_model: GammaParams | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def has_gammas(self) -> bool:
        return self.gamma_obs is not None and self.gamma_model is not None

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        return cls(
            threshold_ty=float(json["threshold_ty"]),
            loci_scale=float(json["loci_scale"]),
            obs_wet_fraction=json.get("obs_wet_fraction"),
            model_wet_fraction=json.get("model_wet_fraction"),
            n_days=int(json.get("n_days", 0)),
            gamma_obs=None
            if json.get("gamma_obs") is None
            else GammaParams.from_dict(json["gamma_obs"]),
            gamma_model=None
            if json.get("gamma_model") is None
            else GammaParams.from_dict(json["gamma_model"]),
            warnings=list(json.get("warnings", ())),
        )

    def to_dict(self) -> ConvPeriodDict:
        return {
            "threshold_ty": self.threshold_ty,
            "loci_scale": self.loci_scale,
            "obs_wet_fraction": self.obs_wet_fraction,
            "model_wet_fraction": self.model_wet_fraction,
            "n_days": self.n_days,
            "gamma_obs": None if self.gamma_obs is None else self.gamma_obs.to_dict(),
            "gamma_model": None if self.gamma_model is None else self.gamma_model.to_dict(),
            "warnings": self.warnings,
        }


@dataclass(slots=True)
class ConvParams:
    """Per period LOCI or QM parameters.

    Attributes
    -----------
    method:
        Either `Method.LOCI` or `Method.QM`.
    t_x:
        Observation rain day threshold in mm.
    periods:
        Calibrated quantities keyed by period id.
    map_raw_values:
        QM maps raw wet values instead of threshold excesses.
    """

    method: Method
    t_x: float
    periods: dict[int, ConvPeriod]
    map_raw_values: bool = False

    @property
    def warnings(self) -> list[str]:
        return [
            f"period {m}: {warning}"
            for m, period in sorted(self.periods.items())
            for warning in period.warnings
        ]

    def period(self, m: int, /) -> ConvPeriod:
        try:
            return self.periods[m]

        except KeyError:
            raise ConfigError(f"Parameters do not cover period {m}") from None

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        return cls(
            method=Method.from_cli(json["method"]),
            t_x=float(json["t_x"]),
            periods={int(m): ConvPeriod.from_dict(p) for m, p in json["periods"].items()},
            map_raw_values=read_toggle(json, ("map_raw_values", QM_TOGGLE_ALIAS), False),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "method": self.method.cli_name,
            "t_x": self.t_x,
            "map_raw_values": self.map_raw_values,
            "periods": {str(m): p.to_dict() for m, p in sorted(self.periods.items())},
            "warnings": self.warnings,
        }


def calibration_pairs(
    obs: DailySeries, model: DailySeries, scheme: PeriodScheme
) -> tuple[DailySeries, DailySeries, npt.NDArray[np.bool_], npt.NDArray[np.int64]]:
    """Aligns obs and model and returns them with their pairwise complete mask and period ids."""
    obs, model = align(obs, model)
    return obs, model, common_mask(obs, model), scheme.periods_of(model)


def _calibrate_period(
    x: FloatArray, y: FloatArray, t_x: float, what: str
) -> ConvPeriod:
    if x.size == 0:
        return ConvPeriod(
            t_x,
            1.0,
            warnings=[f"{what}: no pairwise complete days, threshold set to T_X and scale to 1"],
        )

    obs_p = exceedance_fraction(x, t_x)
    threshold = threshold_for_frequency(y, obs_p)
    period = ConvPeriod(threshold, 1.0, obs_p, exceedance_fraction(y, threshold), x.size)

    if abs(period.model_wet_fraction - obs_p) > 1.0 / x.size:
        period.warnings.append(
            f"{what}: achieved wet fraction {period.model_wet_fraction:.4f} "
            f"differs from observed {obs_p:.4f} (ties at the threshold)"
        )

    period.loci_scale = scale_factor(
        mean_excess(x, t_x), mean_excess(y, threshold), what, period.warnings
    )
    return period


def calibrate_loci(
    obs: DailySeries, model: DailySeries, scheme: PeriodScheme, t_x: float = DEFAULT_VARS.T_X
) -> ConvParams:
    """Calibrates local intensity scaling per period.

    The model threshold reproduces the observed rain day frequency over the days both
    series are present; the scale aligns the mean rain day excesses.

    Parameters
    -----------
    obs:
        Gauge series.
    model:
        Model series; only dates shared with `obs` are used.
    scheme:
        Calibration periods.
    t_x:
        Observation rain day threshold in mm.
    """
    obs, model, mask, periods = calibration_pairs(obs, model, scheme)
    params = ConvParams(Method.LOCI, t_x, {})

    for m in scheme.periods:
        keep = mask & (periods == m)
        params.periods[m] = _calibrate_period(
            obs.values[keep], model.values[keep], t_x, f"LOCI {scheme.label(m)}"
        )

    for warning in params.warnings:
        logger.warning(warning)

    return params


def calibrate_qm(
    obs: DailySeries,
    model: DailySeries,
    scheme: PeriodScheme,
    t_x: float = DEFAULT_VARS.T_X,
    *,
    min_fit_n: int = DEFAULT_VARS.MIN_FIT_N,
    map_raw_values: bool = DEFAULT_VARS.QM_MAP_RAW_VALUES,
) -> ConvParams:
    """Calibrates Gamma quantile mapping per period.

    Gammas are fitted to the excesses over the observation and model thresholds; with
    `map_raw_values` they are fitted to the raw rain day values instead. Periods where
    either fit fails keep only the LOCI scale and are corrected by scaling."""
    obs, model, mask, periods = calibration_pairs(obs, model, scheme)
    params = ConvParams(Method.QM, t_x, {}, map_raw_values)

    for m in scheme.periods:
        keep = mask & (periods == m)
        x, y = obs.values[keep], model.values[keep]
        what = f"QM {scheme.label(m)}"
        period = _calibrate_period(x, y, t_x, what)

        if x.size:
            if map_raw_values:
                x, y = x[x > t_x], y[y > period.threshold_ty]
                obs_at, model_at = 0.0, 0.0

            else:
                obs_at, model_at = t_x, period.threshold_ty

            gamma_obs = fit_excess(x, obs_at, min_fit_n, f"{what} obs", period.warnings)
            gamma_model = fit_excess(y, model_at, min_fit_n, f"{what} model", period.warnings)

            if gamma_obs is not None and gamma_model is not None:
                period.gamma_obs, period.gamma_model = gamma_obs, gamma_model

            else:
                period.warnings.append(f"{what}: falling back to intensity scaling")

        params.periods[m] = period

    for warning in params.warnings:
        logger.warning(warning)

    return params


def _check_covered(
    model: DailySeries, params: ConvParams, scheme: PeriodScheme
) -> npt.NDArray[np.int64]:
    periods = scheme.periods_of(model)

    for m in np.unique(periods[model.present]):
        params.period(int(m))

    return periods


def apply_loci(model: DailySeries, params: ConvParams, scheme: PeriodScheme) -> DailySeries:
    """Y' = 0 where Y < T_Y, else T_X + s * (Y - T_Y), per period; missing stays missing."""
    periods = _check_covered(model, params, scheme)
    y = model.values
    out = np.full_like(y, np.nan)

    for m, period in params.periods.items():
        sel = (periods == m) & model.present
        ym = y[sel]
        wet = ym > period.threshold_ty
        corrected = np.where(ym < period.threshold_ty, 0.0, params.t_x)
        excess = ym[wet] - period.threshold_ty
        corrected[wet] = wet_amounts(period.loci_scale * excess, params.t_x)
        out[sel] = corrected

    return model.with_values(out)


def apply_qm(model: DailySeries, params: ConvParams, scheme: PeriodScheme) -> DailySeries:
    """Y' = 0 where Y <= T_Y, else F_obs^-1(F_model(Y - T_Y)) + T_X, per period.

    Model CDF values numerically equal to 1 are mapped through 1 - 1e-12 and reported.
    Periods without fitted Gammas are corrected by intensity scaling."""
    periods = _check_covered(model, params, scheme)
    y = model.values
    out = np.full_like(y, np.nan)
    saturated = 0

    for m, period in params.periods.items():
        sel = (periods == m) & model.present
        ym = y[sel]
        wet = ym > period.threshold_ty
        excess = ym[wet] - period.threshold_ty
        corrected = np.zeros_like(ym)

        if period.gamma_obs is None or period.gamma_model is None:
            corrected[wet] = wet_amounts(period.loci_scale * excess, params.t_x)

        elif params.map_raw_values:
            mapped, n = quantile_map(ym[wet], period.gamma_model, period.gamma_obs)
            corrected[wet] = mapped
            saturated += n

        else:
            mapped, n = quantile_map(excess, period.gamma_model, period.gamma_obs)
            corrected[wet] = wet_amounts(mapped, params.t_x)
            saturated += n

        out[sel] = corrected

    if saturated:
        logger.warning("QM: %d extreme model values beyond the fitted CDF were clamped", saturated)

    return model.with_values(out)
