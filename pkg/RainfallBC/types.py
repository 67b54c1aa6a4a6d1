from __future__ import annotations

import typing as t

from typing_extensions import NotRequired

AnySpellPolicy = t.Literal["break", "discard"]


class GammaDict(t.TypedDict):
    shape: float
    scale: float


class StationDict(t.TypedDict):
    name: str
    gauge: str
    model: str


class PeriodSchemeDict(t.TypedDict):
    month_to_period: dict[str, int] | list[int]
    dry_season_start_month: NotRequired[int]
    annual_year_start_month: NotRequired[int]


class CorrectionVarsDict(t.TypedDict, total=False):
    t_x: float
    min_fit_n: int
    qm_map_raw_values: bool
    dry_excess_from_tw: bool
    # equivalent spellings of the two switches above
    qm_literal_eq4: bool
    literal_eq17: bool


# "lambda" is a keyword, "damping" is accepted in its place
CalibrationDict = t.TypedDict(
    "CalibrationDict",
    {
        "epsilon": float,
        "lambda": float,
        "max_iterations": int,
        "min_conditional_n": int,
        "stall_patience": int,
    },
    total=False,
)


class QcDict(t.TypedDict, total=False):
    max_rain_mm: float
    flatline_min_run: int
    max_consecutive_rain_days: int
    false_zero_months: list[int]
    false_zero_action: t.Literal["FlaggedOnly", "SetMissing"]


class EvaluationDict(t.TypedDict, total=False):
    monthly_completeness: float
    annual_completeness: float
    spell_completeness: float
    spell_policy: AnySpellPolicy
    n_harmonics: int


class RunConfigDict(t.TypedDict):
    stations: list[StationDict]
    output_dir: NotRequired[str]
    correction: NotRequired[CorrectionVarsDict]
    periods: NotRequired[PeriodSchemeDict]
    blocks: NotRequired[list[list[str]]]
    calibration: NotRequired[CalibrationDict]
    qc: NotRequired[QcDict]
    evaluation: NotRequired[EvaluationDict]


class ConvPeriodDict(t.TypedDict):
    threshold_ty: float
    loci_scale: float
    obs_wet_fraction: float | None
    model_wet_fraction: float | None
    n_days: int
    gamma_obs: GammaDict | None
    gamma_model: GammaDict | None
    warnings: list[str]

