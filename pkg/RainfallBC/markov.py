from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from typing_extensions import Self

from .conventional import (
    calibration_pairs,
    fit_excess,
    mean_excess,
    quantile_map,
    scale_factor,
    wet_amounts,
)
from .core import (
    DEFAULT_VARS,
    DRY_TOGGLE_ALIAS,
    DailySeries,
    FloatArray,
    IndicatorSeries,
    PeriodScheme,
    StateArray,
    initialisation_index,
    lagged_state,
    period_blocks,
    rain_indicator,
    read_toggle,
)
from .enums import Method, WetState
from .errors import ConfigError, DegenerateSampleError, EmptySampleError
from .stats import GammaParams, empirical_quantile, threshold_for_frequency

logger = logging.getLogger(f"main.{__name__}")

MISSING_STATE: t.Final = int(WetState.MISSING)
DRY_STATE: t.Final = int(WetState.DRY)
WET_STATE: t.Final = int(WetState.WET)


@dataclass(frozen=True, slots=True)
class CalibrationConfig:
    """Settings of the conditional threshold fixed point iteration.

    Attributes
    -----------
    epsilon:
        Tolerance on the conditional probabilities.
    damping:
        Weight of the new quantile in each threshold update, in (0, 1].
    max_iterations:
        Evaluations before giving up.
    min_conditional_n:
        Smallest conditioning set a threshold is calibrated on; below it the
        threshold stays at t0.
    stall_patience:
        Consecutive iterations with both probabilities moving less than epsilon / 2
        after which the iteration stops.
    """

    epsilon: float = 0.01
    damping: float = 0.4
    max_iterations: int = 50
    min_conditional_n: int = 10
    stall_patience: int = 3

    def __post_init__(self) -> None:
        if not 0 < self.damping <= 1:
            raise ConfigError(f"Damping must lie in (0, 1], got {self.damping!r}")

        if not self.epsilon > 0:
            raise ConfigError(f"Epsilon must be positive, got {self.epsilon!r}")

        if self.max_iterations < 1 or self.min_conditional_n < 1 or self.stall_patience < 1:
            raise ConfigError("Iteration limits must be positive")

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        default = cls()
        return cls(
            epsilon=float(json.get("epsilon", default.epsilon)),
            damping=float(json.get("lambda", json.get("damping", default.damping))),
            max_iterations=int(json.get("max_iterations", default.max_iterations)),
            min_conditional_n=int(json.get("min_conditional_n", default.min_conditional_n)),
            stall_patience=int(json.get("stall_patience", default.stall_patience)),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "epsilon": self.epsilon,
            "lambda": self.damping,
            "max_iterations": self.max_iterations,
            "min_conditional_n": self.min_conditional_n,
            "stall_patience": self.stall_patience,
        }


class Frequencies(t.NamedTuple):
    p0: float | None
    pw: float | None
    pd: float | None
    n0: int
    nw: int
    nd: int


def conditional_frequencies(states: npt.ArrayLike, lags: npt.ArrayLike) -> Frequencies:
    """Unconditional and lag conditional wet frequencies of a state sequence.

    p0 is taken over every present day; pw and pd over the present days whose
    lag is Wet or Dry. A frequency over an empty set is None."""
    states = np.asarray(states)
    lags = np.asarray(lags)
    present = states != MISSING_STATE
    wet = states == WET_STATE
    after_wet = present & (lags == WET_STATE)
    after_dry = present & (lags == DRY_STATE)

    def ratio(sel: npt.NDArray[np.bool_]) -> tuple[float | None, int]:
        n = int(sel.sum())
        return (int(wet[sel].sum()) / n if n else None), n

    p0, n0 = ratio(present)
    pw, nw = ratio(after_wet)
    pd, nd = ratio(after_dry)
    return Frequencies(p0, pw, pd, n0, nw, nd)


def total_probability_p0(frequencies: Frequencies) -> float | None:
    """p0 recombined from the conditional frequencies, weighted by the lag state shares."""
    n = frequencies.nw + frequencies.nd

    if n == 0:
        return None

    q = frequencies.nw / n
    return (frequencies.pw or 0.0) * q + (frequencies.pd or 0.0) * (1 - q)


def stationarity_p0(pw: float, pd: float) -> float:
    """Stationary wet probability of a two state chain, pd / (1 - pw + pd).

    Raises
    -------
    DegenerateSampleError
        The denominator is zero."""
    denominator = 1.0 - pw + pd

    if denominator == 0:
        raise DegenerateSampleError("Stationary probability undefined for pw = 1, pd = 0")

    return pd / denominator


@dataclass(frozen=True, slots=True)
class TransitionTargets:
    """Observed rain day probabilities of one period; absent conditionals are None."""

    period: int
    p0: float
    pw: float | None
    pd: float | None
    n0: int
    nw: int
    nd: int

    @property
    def stationary_p0(self) -> float | None:
        if self.pw is None or self.pd is None:
            return None

        try:
            return stationarity_p0(self.pw, self.pd)

        except DegenerateSampleError:
            return None


def estimate_transition_targets(
    obs_indicator: IndicatorSeries, obs_lagged: npt.ArrayLike, scheme: PeriodScheme, m: int
) -> TransitionTargets:
    """Estimates p0, pw and pd of a period from the observation indicator.

    `obs_lagged` must come from `lagged_state` of the whole series, so the first day of a
    period block is conditioned on the last day before it. Days whose lag is Missing
    count towards p0 only.

    Raises
    -------
    EmptySampleError
        No present day falls in the period."""
    scheme.check_period(m)
    sel = scheme.periods_of(obs_indicator) == m
    freq = conditional_frequencies(obs_indicator.states[sel], np.asarray(obs_lagged)[sel])

    if freq.p0 is None:
        raise EmptySampleError(f"No observations in period {scheme.label(m)}")

    return TransitionTargets(m, freq.p0, freq.pw, freq.pd, freq.n0, freq.nw, freq.nd)


def _recurse(
    y: t.Sequence[float],
    t0: t.Sequence[float],
    tw: t.Sequence[float],
    td: t.Sequence[float],
    carry_in: t.Mapping[int, int],
    conditional_from: int = 0,
) -> tuple[StateArray, StateArray]:
    # states and the lag each day was thresholded with; days before
    # conditional_from are forced onto t0
    n = len(y)
    states = np.empty(n, dtype=np.int8)
    lags = np.empty(n, dtype=np.int8)
    prev = MISSING_STATE

    for i in range(n):
        if i in carry_in:
            prev = carry_in[i]

        lag = prev if i >= conditional_from else MISSING_STATE
        value = y[i]

        if value != value:
            state = MISSING_STATE

        else:
            threshold = tw[i] if lag == WET_STATE else td[i] if lag == DRY_STATE else t0[i]
            state = WET_STATE if value > threshold else DRY_STATE

        states[i] = state
        lags[i] = lag
        prev = state

    return states, lags


@dataclass(slots=True)
class PeriodThresholds:
    """Calibrated conditional thresholds of one period with their diagnostics."""

    period: int
    t0: float
    tw: float
    td: float
    p0: float | None = None
    pw: float | None = None
    pd: float | None = None
    achieved_p0: float | None = None
    achieved_pw: float | None = None
    achieved_pd: float | None = None
    iterations: int = 0
    converged: bool = False
    frozen_w: bool = False
    frozen_d: bool = False
    n_w: int = 0
    n_d: int = 0
    warnings: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        return cls(**{k: v for k, v in json.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict[str, t.Any]:
        stationary = None

        if self.pw is not None and self.pd is not None:
            try:
                stationary = stationarity_p0(self.pw, self.pd)

            except DegenerateSampleError:
                pass

        return {
            "period": self.period,
            "t0": self.t0,
            "tw": self.tw,
            "td": self.td,
            "p0": self.p0,
            "pw": self.pw,
            "pd": self.pd,
            "stationary_p0": stationary,
            "achieved_p0": self.achieved_p0,
            "achieved_pw": self.achieved_pw,
            "achieved_pd": self.achieved_pd,
            "iterations": self.iterations,
            "converged": self.converged,
            "frozen_w": self.frozen_w,
            "frozen_d": self.frozen_d,
            "n_w": self.n_w,
            "n_d": self.n_d,
            "warnings": self.warnings,
        }


@dataclass(slots=True)
class McThresholds:
    periods: dict[int, PeriodThresholds]

    def period(self, m: int, /) -> PeriodThresholds:
        try:
            return self.periods[m]

        except KeyError:
            raise ConfigError(f"Thresholds do not cover period {m}") from None

    def daily(
        self, series: DailySeries, scheme: PeriodScheme
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Per day t0, tw and td arrays; days of uncovered periods get NaN."""
        periods = scheme.periods_of(series)

        for m in np.unique(periods[series.present]):
            self.period(int(m))

        lookup = np.full((3, scheme.n_periods + 1), np.nan)

        for m, thr in self.periods.items():
            if m <= scheme.n_periods:
                lookup[:, m] = thr.t0, thr.tw, thr.td

        t0, tw, td = lookup[:, periods]
        return t0, tw, td


@dataclass(slots=True)
class PeriodSample:
    """The days of one period laid end to end, with the state each block starts from.

    Attributes
    -----------
    positions:
        Index of every sample day in the full series.
    y:
        Model values.
    carry_in:
        State carried into each block, keyed by the block's first sample position.
    """

    positions: npt.NDArray[np.intp]
    y: FloatArray
    carry_in: dict[int, int]

    @classmethod
    def build(
        cls,
        model: DailySeries,
        scheme: PeriodScheme,
        m: int,
        *,
        carry_in: npt.ArrayLike | None = None,
    ) -> Self:
        """Collects the blocks of period `m`.

        `carry_in` is a whole series lag array; its value at each block's first day is
        the state the block starts from, Missing when omitted."""
        blocks = period_blocks(model, scheme, m)
        lags = None if carry_in is None else np.asarray(carry_in, dtype=np.int8)
        positions = (
            np.concatenate([np.arange(start, stop) for start, stop in blocks])
            if blocks
            else np.empty(0, dtype=np.intp)
        )
        starts: dict[int, int] = {}
        offset = 0

        for start, stop in blocks:
            starts[offset] = MISSING_STATE if lags is None else int(lags[start])
            offset += stop - start

        return cls(positions, model.values[positions], starts)

    def __len__(self) -> int:
        return self.positions.size

    def generate(self, t0: float, tw: float, td: float) -> tuple[StateArray, StateArray]:
        """Generates the rain day states of the sample, returning (states, lags)."""
        n = len(self)
        return _recurse(self.y.tolist(), [t0] * n, [tw] * n, [td] * n, self.carry_in)

    def evaluate(self, t0: float, tw: float, td: float) -> Frequencies:
        return conditional_frequencies(*self.generate(t0, tw, td))


def calibrate_mc_thresholds(
    model: DailySeries,
    targets: TransitionTargets,
    scheme: PeriodScheme,
    cfg: CalibrationConfig | None = None,
    *,
    carry_in: npt.ArrayLike | None = None,
    sample: PeriodSample | None = None,
) -> PeriodThresholds:
    """Solves for the conditional thresholds of one period by damped fixed point iteration.

    t0 reproduces p0; tw and td start at t0 and are repeatedly replaced by a damped step
    towards the model quantiles that would reproduce pw and pd on the current rain day
    sequence, until both achieved probabilities are within epsilon of their targets.

    Parameters
    -----------
    model:
        Model series, restricted to the days used for calibration.
    targets:
        Observed probabilities of the period.
    scheme:
        Calibration periods.
    cfg:
        Iteration settings.
    carry_in:
        Whole series lag array giving the state each period block starts from.
    sample:
        Prebuilt period sample, overriding `carry_in`.
    """
    cfg = cfg or CalibrationConfig()
    m = targets.period
    label = scheme.label(m)
    sample = sample or PeriodSample.build(model, scheme, m, carry_in=carry_in)
    values = sample.y[~np.isnan(sample.y)]

    if values.size == 0:
        raise EmptySampleError(f"No model values in period {label}")

    t0 = threshold_for_frequency(values, targets.p0)
    result = PeriodThresholds(m, t0, t0, t0, targets.p0, targets.pw, targets.pd)

    def freeze(which: str, reason: str) -> None:
        setattr(result, f"t{which}", t0)
        setattr(result, f"frozen_{which}", True)
        result.warnings.append(f"MC {label}: t{which} frozen at t0, {reason}")

    for which, target, n in (("w", targets.pw, targets.nw), ("d", targets.pd, targets.nd)):
        if target is None:
            freeze(which, f"no observed days after a {'wet' if which == 'w' else 'dry'} day")

        elif n < cfg.min_conditional_n:
            freeze(which, f"only {n} observed conditioning days")

    stalled = 0
    previous: Frequencies | None = None

    while True:
        states, lags = sample.generate(result.t0, result.tw, result.td)
        freq = conditional_frequencies(states, lags)
        result.iterations += 1
        result.achieved_pw, result.achieved_pd = freq.pw, freq.pd
        result.achieved_p0 = total_probability_p0(freq)
        result.n_w, result.n_d = freq.nw, freq.nd
        logger.debug(
            "MC %s iteration %d: tw=%.4f td=%.4f pw=%s pd=%s",
            label, result.iterations, result.tw, result.td, freq.pw, freq.pd,
        )

        refrozen = False

        for which, n in (("w", freq.nw), ("d", freq.nd)):
            if not getattr(result, f"frozen_{which}") and n < cfg.min_conditional_n:
                freeze(which, f"only {n} generated conditioning days")
                refrozen = True

        if refrozen:
            continue

        errors = [
            abs(achieved - target)
            for frozen, achieved, target in (
                (result.frozen_w, freq.pw, targets.pw),
                (result.frozen_d, freq.pd, targets.pd),
            )
            if not frozen
        ]

        if all(error < cfg.epsilon for error in errors):
            result.converged = not (result.frozen_w or result.frozen_d)
            break

        if result.iterations >= cfg.max_iterations:
            result.warnings.append(
                f"MC {label}: no convergence after {result.iterations} iterations"
            )
            break

        if previous is not None and all(
            abs(a - b) < cfg.epsilon / 2
            for a, b in ((freq.pw, previous.pw), (freq.pd, previous.pd))
            if a is not None and b is not None
        ):
            stalled += 1

        else:
            stalled = 0

        if stalled >= cfg.stall_patience:
            result.warnings.append(
                f"MC {label}: achieved probabilities stalled after {result.iterations} iterations"
            )
            break

        previous = freq

        if not result.frozen_w:
            target_w = empirical_quantile(
                sample.y[lags == WET_STATE], 1.0 - t.cast(float, targets.pw)
            )
            result.tw = max((1 - cfg.damping) * result.tw + cfg.damping * target_w, 0.0)

        if not result.frozen_d:
            target_d = empirical_quantile(
                sample.y[lags == DRY_STATE], 1.0 - t.cast(float, targets.pd)
            )
            result.td = max((1 - cfg.damping) * result.td + cfg.damping * target_d, 0.0)

    return result


def generate_indicator(
    model: DailySeries,
    thresholds: McThresholds,
    scheme: PeriodScheme,
    carry_in: WetState | t.Mapping[int, WetState] = WetState.MISSING,
) -> IndicatorSeries:
    """Generates the model rain day indicator of a continuous series.

    Each day uses tw after a Wet day, td after a Dry day and t0 after a Missing one, with
    the thresholds of the period the day falls in. State carries across period boundaries.

    `carry_in` is the state the first day is thresholded after, or a mapping from series
    positions to the state the chain restarts from there, one entry per block of a
    series stitched from separate blocks. Position 0 defaults to Missing."""
    if isinstance(carry_in, t.Mapping):
        starts = {int(i): int(state) for i, state in carry_in.items()}

    else:
        starts = {0: int(carry_in)}

    if any(not 0 <= i < len(model) for i in starts):
        raise ConfigError("Carry-in positions must lie within the series")

    t0, tw, td = thresholds.daily(model, scheme)
    states, _ = _recurse(model.values.tolist(), t0.tolist(), tw.tolist(), td.tolist(), starts)
    return IndicatorSeries(model.start_date, states)


def calibrated_model_lags(
    model: DailySeries,
    thresholds: McThresholds,
    scheme: PeriodScheme,
    carry_in: npt.ArrayLike | None = None,
) -> StateArray:
    """Lag of the calibrated, blockwise generated model indicator for every day.

    Days outside every period block sample (none, in practice) keep Missing."""
    lags = np.full(len(model), MISSING_STATE, dtype=np.int8)

    for m, thr in thresholds.periods.items():
        sample = PeriodSample.build(model, scheme, m, carry_in=carry_in)
        lags[sample.positions] = sample.generate(thr.t0, thr.tw, thr.td)[1]

    return lags


@dataclass(slots=True)
class PeriodAmounts:
    """Amount correction quantities of one period.

    The LOCI scales are always present; the Gamma sets only for MC QM."""

    s: float = 1.0
    sw: float = 1.0
    sd: float = 1.0
    gamma_obs_all: GammaParams | None = None
    gamma_obs_wet: GammaParams | None = None
    gamma_obs_dry: GammaParams | None = None
    gamma_model_all: GammaParams | None = None
    gamma_model_wet: GammaParams | None = None
    gamma_model_dry: GammaParams | None = None
    warnings: list[str] = field(default_factory=list)

    GAMMA_FIELDS: t.ClassVar = (
        "gamma_obs_all", "gamma_obs_wet", "gamma_obs_dry",
        "gamma_model_all", "gamma_model_wet", "gamma_model_dry",
    )

    def pair(self, branch: str, /) -> tuple[GammaParams, GammaParams] | None:
        """(model, obs) Gammas for the `all`, `wet` or `dry` branch, None if not fitted."""
        model = getattr(self, f"gamma_model_{branch}")
        obs = getattr(self, f"gamma_obs_{branch}")
        return None if model is None or obs is None else (model, obs)

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        gammas = {
            name: None if json.get(name) is None else GammaParams.from_dict(json[name])
            for name in cls.GAMMA_FIELDS
        }
        return cls(
            s=float(json["s"]),
            sw=float(json["sw"]),
            sd=float(json["sd"]),
            warnings=list(json.get("warnings", ())),
            **gammas,
        )

    def to_dict(self) -> dict[str, t.Any]:
        json: dict[str, t.Any] = {"s": self.s, "sw": self.sw, "sd": self.sd}

        for name in self.GAMMA_FIELDS:
            gamma = getattr(self, name)
            json[name] = None if gamma is None else gamma.to_dict()

        json["warnings"] = self.warnings
        return json


@dataclass(slots=True)
class McAmountParams:
    periods: dict[int, PeriodAmounts]

    def period(self, m: int, /) -> PeriodAmounts:
        try:
            return self.periods[m]

        except KeyError:
            raise ConfigError(f"Amount parameters do not cover period {m}") from None


def _conditional_sets(
    obs: DailySeries,
    model: DailySeries,
    obs_lagged: npt.ArrayLike,
    model_lagged: npt.ArrayLike,
    scheme: PeriodScheme,
    m: int,
) -> tuple[FloatArray, FloatArray, dict[str, tuple[FloatArray, FloatArray]]]:
    in_period = scheme.periods_of(model) == m
    x, y = obs.values, model.values
    obs_lagged = np.asarray(obs_lagged)
    model_lagged = np.asarray(model_lagged)
    sets = {
        name: (x[in_period & (obs_lagged == state)], y[in_period & (model_lagged == state)])
        for name, state in (("wet", WET_STATE), ("dry", DRY_STATE))
    }
    return x[in_period], y[in_period], sets


def compute_mc_loci_scales(
    obs: DailySeries,
    model: DailySeries,
    obs_lagged: npt.ArrayLike,
    model_lagged: npt.ArrayLike,
    thresholds: McThresholds,
    scheme: PeriodScheme,
    t_x: float = DEFAULT_VARS.T_X,
) -> McAmountParams:
    """Computes the unconditional and the lag conditional intensity scales.

    sw compares observed excesses over T_X on days after an observed Wet day with model
    excesses over tw on days after a generated Wet day; sd likewise with td and Dry lags;
    s is the plain LOCI scale against t0. An empty conditioning set falls back to s.

    Both series must be aligned and hold only the calibration days."""
    amounts = McAmountParams({})

    for m, thr in thresholds.periods.items():
        label = scheme.label(m)
        x, y, sets = _conditional_sets(obs, model, obs_lagged, model_lagged, scheme, m)
        period = PeriodAmounts()
        period.s = scale_factor(
            mean_excess(x, t_x), mean_excess(y, thr.t0), f"MC LOCI {label}", period.warnings
        )

        for branch, threshold in (("wet", thr.tw), ("dry", thr.td)):
            xs, ys = sets[branch]
            obs_excess, model_excess = mean_excess(xs, t_x), mean_excess(ys, threshold)

            if obs_excess is None or model_excess is None or model_excess <= 0 or obs_excess <= 0:
                period.warnings.append(
                    f"MC LOCI {label}: no {branch}-lag rain days, scale falls back to s"
                )
                scale = period.s

            else:
                scale = obs_excess / model_excess

            setattr(period, f"s{branch[0]}", scale)

        amounts.periods[m] = period

    return amounts


def fit_mc_qm_gammas(
    obs: DailySeries,
    model: DailySeries,
    obs_lagged: npt.ArrayLike,
    model_lagged: npt.ArrayLike,
    thresholds: McThresholds,
    scheme: PeriodScheme,
    t_x: float = DEFAULT_VARS.T_X,
    *,
    min_fit_n: int = DEFAULT_VARS.MIN_FIT_N,
) -> McAmountParams:
    """Fits Gammas to the threshold excesses of all, wet-lag and dry-lag rain days, for
    observations and model alike.

    A conditional pair that cannot be fitted leaves its branch on the unconditional pair;
    without an unconditional pair the period is corrected by the MC LOCI scales, which
    are computed as well."""
    amounts = compute_mc_loci_scales(obs, model, obs_lagged, model_lagged, thresholds, scheme, t_x)

    for m, thr in thresholds.periods.items():
        label = f"MC QM {scheme.label(m)}"
        x, y, sets = _conditional_sets(obs, model, obs_lagged, model_lagged, scheme, m)
        period = amounts.periods[m]
        branches = {
            "all": (x, y, thr.t0),
            "wet": (*sets["wet"], thr.tw),
            "dry": (*sets["dry"], thr.td),
        }

        for branch, (xs, ys, threshold) in branches.items():
            warnings = period.warnings
            gamma_obs = fit_excess(xs, t_x, min_fit_n, f"{label} obs {branch}", warnings)
            gamma_model = fit_excess(ys, threshold, min_fit_n, f"{label} model {branch}", warnings)

            if gamma_obs is None or gamma_model is None:
                fallback = (
                    "intensity scaling" if branch == "all" else "the unconditional distributions"
                )
                period.warnings.append(f"{label}: {branch} branch falls back to {fallback}")
                continue

            setattr(period, f"gamma_obs_{branch}", gamma_obs)
            setattr(period, f"gamma_model_{branch}", gamma_model)

    return amounts


BRANCHES: t.Final = (("all", MISSING_STATE), ("wet", WET_STATE), ("dry", DRY_STATE))


def _apply_markov(
    model: DailySeries,
    thresholds: McThresholds,
    amounts: McAmountParams,
    scheme: PeriodScheme,
    t_x: float,
    *,
    quantile: bool,
    dry_excess_from_tw: bool,
) -> DailySeries:
    t0, tw, td = thresholds.daily(model, scheme)

    # excess taken over tw: a dry-lag day only ends up wet above both thresholds
    td_state = np.fmax(td, tw) if dry_excess_from_tw and not quantile else td
    start = initialisation_index(model, scheme)
    _, lags = _recurse(
        model.values.tolist(),
        t0.tolist(),
        tw.tolist(),
        td_state.tolist(),
        {0: MISSING_STATE},
        start + 1,
    )

    y = model.values
    out = np.full_like(y, np.nan)
    periods = scheme.periods_of(model)
    saturated = 0

    for m, thr in thresholds.periods.items():
        amt = amounts.period(m)

        for branch, lag in BRANCHES:
            sel = (periods == m) & (lags == lag) & model.present

            if not sel.any():
                continue

            ys = y[sel]
            threshold = {"all": thr.t0, "wet": thr.tw, "dry": thr.td}[branch]
            corrected = np.zeros_like(ys)

            if branch == "all" and not quantile:
                # standard intensity scaling, where a value equal to t0 maps to T_X
                wet = ys > threshold
                corrected[ys == threshold] = t_x
                corrected[wet] = wet_amounts(amt.s * (ys[wet] - threshold), t_x)
                out[sel] = corrected
                continue

            wet = ys > threshold
            pair = (amt.pair(branch) or amt.pair("all")) if quantile else None

            if pair is not None:
                mapped, n = quantile_map(ys[wet] - threshold, *pair)
                corrected[wet] = wet_amounts(mapped, t_x)
                saturated += n

            elif branch == "dry" and dry_excess_from_tw and not quantile:
                corrected[wet] = np.maximum(t_x + amt.sd * (ys[wet] - thr.tw), 0.0)

            else:
                scale = {"all": amt.s, "wet": amt.sw, "dry": amt.sd}[branch]
                corrected[wet] = wet_amounts(scale * (ys[wet] - threshold), t_x)

            out[sel] = corrected

    if saturated:
        logger.warning(
            "MC QM: %d extreme model values beyond the fitted CDF were clamped", saturated
        )

    return model.with_values(out)


def apply_mc_loci(
    model: DailySeries,
    thresholds: McThresholds,
    amounts: McAmountParams,
    scheme: PeriodScheme,
    t_x: float = DEFAULT_VARS.T_X,
    *,
    dry_excess_from_tw: bool = DEFAULT_VARS.DRY_EXCESS_FROM_TW,
) -> DailySeries:
    """Applies MC LOCI.

    Up to and including the first day of the dry season start month, and after any
    missing corrected day, days are corrected by standard intensity scaling against t0.
    Otherwise a day following a corrected rain day is corrected with (tw, sw) and a day
    following a corrected dry day with (td, sd)."""
    return _apply_markov(
        model,
        thresholds,
        amounts,
        scheme,
        t_x,
        quantile=False,
        dry_excess_from_tw=dry_excess_from_tw,
    )


def apply_mc_qm(
    model: DailySeries,
    thresholds: McThresholds,
    amounts: McAmountParams,
    scheme: PeriodScheme,
    t_x: float = DEFAULT_VARS.T_X,
) -> DailySeries:
    """Applies MC QM, mapping excesses over the state threshold through the Gamma pair of
    the state branch; unconditional days use the all-days pair."""
    return _apply_markov(
        model, thresholds, amounts, scheme, t_x, quantile=True, dry_excess_from_tw=False
    )


@dataclass(slots=True)
class McParams:
    """Everything MC LOCI or MC QM needs to correct a series."""

    method: Method
    t_x: float
    thresholds: McThresholds
    amounts: McAmountParams
    dry_excess_from_tw: bool = False

    @property
    def warnings(self) -> list[str]:
        return [
            f"period {m}: {w}"
            for m in sorted(self.thresholds.periods)
            for w in self.thresholds.periods[m].warnings
            + (self.amounts.periods[m].warnings if m in self.amounts.periods else [])
        ]

    def apply(self, model: DailySeries, scheme: PeriodScheme) -> DailySeries:
        if self.method.quantile:
            return apply_mc_qm(model, self.thresholds, self.amounts, scheme, self.t_x)

        return apply_mc_loci(
            model,
            self.thresholds,
            self.amounts,
            scheme,
            self.t_x,
            dry_excess_from_tw=self.dry_excess_from_tw,
        )

    @classmethod
    def from_dict(cls, json: t.Mapping[str, t.Any], /) -> Self:
        periods = {int(m): p for m, p in json["periods"].items()}
        return cls(
            method=Method.from_cli(json["method"]),
            t_x=float(json["t_x"]),
            thresholds=McThresholds(
                {m: PeriodThresholds.from_dict(p["occurrence"]) for m, p in periods.items()}
            ),
            amounts=McAmountParams(
                {m: PeriodAmounts.from_dict(p["amounts"]) for m, p in periods.items()}
            ),
            dry_excess_from_tw=read_toggle(
                json, ("dry_excess_from_tw", DRY_TOGGLE_ALIAS), False
            ),
        )

    def to_dict(self) -> dict[str, t.Any]:
        return {
            "method": self.method.cli_name,
            "t_x": self.t_x,
            "dry_excess_from_tw": self.dry_excess_from_tw,
            "periods": {
                str(m): {
                    "occurrence": self.thresholds.periods[m].to_dict(),
                    "amounts": self.amounts.periods[m].to_dict(),
                }
                for m in sorted(self.thresholds.periods)
            },
            "warnings": self.warnings,
        }


def calibrate_markov(
    obs: DailySeries,
    model: DailySeries,
    scheme: PeriodScheme,
    *,
    quantile: bool = False,
    cfg: CalibrationConfig | None = None,
    t_x: float = DEFAULT_VARS.T_X,
    min_fit_n: int = DEFAULT_VARS.MIN_FIT_N,
    dry_excess_from_tw: bool = DEFAULT_VARS.DRY_EXCESS_FROM_TW,
) -> McParams:
    """Runs the full MC calibration: targets, conditional thresholds and amount parameters.

    Only days where both series are present are used. A period with no usable days keeps
    every threshold at T_X and unit scales.

    Every period block of the model is started from the gauge state of the day before the
    block. Application has no gauge and carries the corrected model state across block
    boundaries instead, so the two may condition the first day of a block differently.

    Parameters
    -----------
    obs:
        Gauge series.
    model:
        Model series.
    scheme:
        Calibration periods.
    quantile:
        Fit the MC QM Gammas in addition to the MC LOCI scales.
    cfg:
        Iteration settings.
    """
    cfg = cfg or CalibrationConfig()
    obs, model, mask, _ = calibration_pairs(obs, model, scheme)
    obs, model = obs.masked(~mask), model.masked(~mask)
    obs_indicator = rain_indicator(obs, t_x)
    obs_lagged = lagged_state(obs_indicator)
    thresholds = McThresholds({})

    for m in scheme.periods:
        label = scheme.label(m)

        try:
            targets = estimate_transition_targets(obs_indicator, obs_lagged, scheme, m)
            sample = PeriodSample.build(model, scheme, m, carry_in=obs_lagged)
            thresholds.periods[m] = calibrate_mc_thresholds(
                model, targets, scheme, cfg, sample=sample
            )

        except EmptySampleError as e:
            thresholds.periods[m] = PeriodThresholds(
                m, t_x, t_x, t_x, frozen_w=True, frozen_d=True,
                warnings=[f"MC {label}: {e}, thresholds set to T_X"],
            )

    model_lagged = calibrated_model_lags(model, thresholds, scheme, carry_in=obs_lagged)

    if quantile:
        amounts = fit_mc_qm_gammas(
            obs, model, obs_lagged, model_lagged, thresholds, scheme, t_x, min_fit_n=min_fit_n
        )

    else:
        amounts = compute_mc_loci_scales(
            obs, model, obs_lagged, model_lagged, thresholds, scheme, t_x
        )

    method = Method.MC_QM if quantile else Method.MC_LOCI
    params = McParams(method, t_x, thresholds, amounts, dry_excess_from_tw)

    for warning in params.warnings:
        logger.warning(warning)

    return params

