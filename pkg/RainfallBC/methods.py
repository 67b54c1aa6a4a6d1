from __future__ import annotations

import json
import logging
import typing as t

from .conventional import ConvParams, apply_loci, apply_qm, calibrate_loci, calibrate_qm
from .core import DEFAULT_VARS, CorrectionVars, DailySeries, PeriodScheme
from .enums import Method
from .errors import ConfigError
from .markov import CalibrationConfig, McParams, calibrate_markov

logger = logging.getLogger(f"main.{__name__}")

AnyParams = t.Union[ConvParams, McParams]


def calibrate(
    method: Method,
    obs: DailySeries,
    model: DailySeries,
    scheme: PeriodScheme,
    *,
    vars: CorrectionVars = DEFAULT_VARS,
    cfg: CalibrationConfig | None = None,
) -> AnyParams:
    """Calibrates any of the four correction methods on a gauge and model pair.

    Parameters
    -----------
    method:
        The correction method.
    obs:
        Gauge series.
    model:
        Model series.
    scheme:
        Calibration periods.
    vars:
        Rain day threshold, minimum fit size and method variants.
    cfg:
        Fixed point settings of the Markov chain methods.
    """
    logger.debug("Calibrating %s over %s", method.label, scheme)

    match method:
        case Method.LOCI:
            return calibrate_loci(obs, model, scheme, vars.T_X)

        case Method.QM:
            return calibrate_qm(
                obs,
                model,
                scheme,
                vars.T_X,
                min_fit_n=vars.MIN_FIT_N,
                map_raw_values=vars.QM_MAP_RAW_VALUES,
            )

        case Method.MC_LOCI | Method.MC_QM:
            return calibrate_markov(
                obs,
                model,
                scheme,
                quantile=method.quantile,
                cfg=cfg,
                t_x=vars.T_X,
                min_fit_n=vars.MIN_FIT_N,
                dry_excess_from_tw=vars.DRY_EXCESS_FROM_TW,
            )

    raise ValueError(f"Unknown method {method!r}")


def apply(params: AnyParams, model: DailySeries, scheme: PeriodScheme) -> DailySeries:
    """Corrects a model series with previously calibrated parameters."""
    match params:
        case McParams():
            return params.apply(model, scheme)

        case ConvParams(method=Method.LOCI):
            return apply_loci(model, params, scheme)

        case ConvParams(method=Method.QM):
            return apply_qm(model, params, scheme)

    raise TypeError(f"Cannot apply {type(params).__name__}")


def params_from_dict(data: t.Mapping[str, t.Any], /) -> AnyParams:
    """Restores parameters of any method from their JSON form."""
    try:
        method = Method.from_cli(data["method"])

        if method.markov:
            return McParams.from_dict(data)

        return ConvParams.from_dict(data)

    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed parameter document: {e!r}") from e


def dump_params(params: AnyParams, /) -> str:
    """Serializes parameters to JSON; equal parameters always give identical text."""
    return json.dumps(params.to_dict(), indent=2) + "\n"


def load_params(text: str, /) -> AnyParams:
    try:
        data = json.loads(text)

    except json.JSONDecodeError as e:
        raise ConfigError(f"Parameter file is not valid JSON: {e}") from e

    return params_from_dict(data)
