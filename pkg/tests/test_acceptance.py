"""End to end behaviour on synthetic data with a first order occurrence chain and
state dependent intensities."""

from __future__ import annotations

import pytest

from RainfallBC.core import DailySeries, PeriodScheme
from RainfallBC.crossval import BlockScheme, run_crossval
from RainfallBC.enums import Method
from RainfallBC.evaluation import EvalReport, evaluate_all

CONVENTIONAL = (Method.LOCI, Method.QM)
MARKOV = (Method.MC_LOCI, Method.MC_QM)


@pytest.fixture(scope="module")
def report(seasonal_pair: tuple[DailySeries, DailySeries]) -> EvalReport:
    obs, model = seasonal_pair
    scheme = PeriodScheme.default()
    blocks = BlockScheme.equal_years(obs.start_date.year, obs.end_date.year, 3)
    sources = {"raw": model}

    for method in Method:
        sources[method.cli_name] = run_crossval(obs, model, method, blocks, scheme).corrected

    return evaluate_all(obs, sources, scheme, station="synthetic")


def rmse(report: EvalReport, method: Method, key: str) -> tuple[float, float]:
    value = report.sources[method.cli_name].rmse_curves[key]
    assert isinstance(value, tuple)
    return value


def ks_d(report: EvalReport, source: str, kind: str) -> float:
    return report.sources[source].spell_ks[kind].d_statistic


@pytest.mark.parametrize("markov", MARKOV)
@pytest.mark.parametrize("conventional", CONVENTIONAL)
def test_markov_correction_follows_first_order_occurrence_curves(
    report: EvalReport, markov: Method, conventional: Method
) -> None:
    pairs = zip(rmse(report, markov, "occurrence_1"), rmse(report, conventional, "occurrence_1"))

    for mc, other in pairs:
        assert mc < other


@pytest.mark.parametrize("markov", MARKOV)
@pytest.mark.parametrize("conventional", CONVENTIONAL)
def test_markov_correction_follows_first_order_amount_curves(
    report: EvalReport, markov: Method, conventional: Method
) -> None:
    pairs = zip(rmse(report, markov, "amount_1"), rmse(report, conventional, "amount_1"))

    for mc, other in pairs:
        assert mc < other


@pytest.mark.parametrize("markov", MARKOV)
def test_markov_correction_matches_spell_lengths(report: EvalReport, markov: Method) -> None:
    name = markov.cli_name

    assert ks_d(report, name, "dry") < ks_d(report, "raw", "dry")

    for conventional in CONVENTIONAL:
        assert ks_d(report, name, "wet") < ks_d(report, conventional.cli_name, "wet")


def test_every_correction_fixes_the_zero_order_occurrence_curve(report: EvalReport) -> None:
    raw = report.sources["raw"].rmse_curves["occurrence_0"]
    assert isinstance(raw, float)

    for method in Method:
        value = report.sources[method.cli_name].rmse_curves["occurrence_0"]
        assert isinstance(value, float)
        assert value < raw
