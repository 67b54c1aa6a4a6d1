from __future__ import annotations

import math

import numpy as np
import pytest

from RainfallBC.errors import (
    DegenerateSampleError,
    EmptySampleError,
    FitInsufficientData,
    UnboundedQuantileError,
)
from RainfallBC.stats import (
    GammaParams,
    IntensityDistribution,
    comparison_metrics,
    empirical_quantile,
    exceedance_fraction,
    gamma_cdf,
    gamma_fit,
    gamma_inv_cdf,
    ks_two_sample,
    threshold_for_frequency,
)


def test_empirical_quantile_order_statistic() -> None:
    sample = [5.0, 1.0, np.nan, 3.0, 2.0, 4.0]

    assert empirical_quantile(sample, 0.0) == 1.0
    assert empirical_quantile(sample, 0.2) == 1.0
    assert empirical_quantile(sample, 0.21) == 2.0
    assert empirical_quantile(sample, 0.6) == 3.0
    assert empirical_quantile(sample, 1.0) == 5.0


def test_empirical_quantile_rejects_empty_and_bad_probability() -> None:
    with pytest.raises(EmptySampleError):
        empirical_quantile([np.nan], 0.5)

    with pytest.raises(ValueError):
        empirical_quantile([1.0], 1.5)


def test_threshold_reproduces_frequency() -> None:
    values = np.arange(1.0, 101.0)
    threshold = threshold_for_frequency(values, 0.3)

    assert threshold == 70.0
    assert exceedance_fraction(values, threshold) == pytest.approx(0.3)


def test_threshold_is_floored_at_zero() -> None:
    values = np.zeros(10)

    assert threshold_for_frequency(values, 0.5) == 0.0
    assert exceedance_fraction(values, 0.0) == 0.0


def test_exponential_cdf_is_exact() -> None:
    exponential = GammaParams(1.0, 2.0)

    assert gamma_cdf(exponential, 2.0) == pytest.approx(1 - math.exp(-1), abs=1e-10)
    assert gamma_cdf(exponential, -1.0) == 0.0
    assert gamma_inv_cdf(exponential, 1 - math.exp(-1)) == pytest.approx(2.0, rel=1e-10)


def test_inverse_cdf_inverts_cdf() -> None:
    gamma = GammaParams(0.7, 9.0)
    u = np.array([0.0, 0.01, 0.5, 0.99])

    assert gamma_cdf(gamma, gamma_inv_cdf(gamma, u)) == pytest.approx(u, abs=1e-10)


def test_inverse_cdf_at_one_is_unbounded() -> None:
    with pytest.raises(UnboundedQuantileError):
        gamma_inv_cdf(GammaParams(1.0, 1.0), 1.0)


def test_gamma_params_validation() -> None:
    with pytest.raises(ValueError):
        GammaParams(0.0, 1.0)

    assert isinstance(GammaParams(1.0, 1.0), IntensityDistribution)


@pytest.mark.parametrize("shape, scale", [(0.9, 8.0), (2.0, 3.0), (5.0, 0.5)])
def test_gamma_fit_recovers_parameters(shape: float, scale: float) -> None:
    rng = np.random.default_rng(1234)
    fitted = gamma_fit(rng.gamma(shape, scale, 10_000))

    assert fitted.shape == pytest.approx(shape, rel=0.05)
    assert fitted.scale == pytest.approx(scale, rel=0.05)


def test_gamma_fit_failures() -> None:
    with pytest.raises(FitInsufficientData) as info:
        gamma_fit([1.0, 2.0, 3.0], min_fit_n=10)

    assert (info.value.size, info.value.required) == (3, 10)

    with pytest.raises(DegenerateSampleError):
        gamma_fit([2.5] * 20)

    with pytest.raises(ValueError):
        gamma_fit([0.0] + [1.0, 2.0] * 10)


@pytest.mark.parametrize(
    "a, b, d",
    [
        ([1.0, 2.0], [3.0, 4.0], 1.0),
        ([1.0, 3.0], [2.0, 4.0], 0.5),
        ([1.0, 2.0, 2.0, 7.0], [1.0, 2.0, 2.0, 7.0], 0.0),
    ],
)
def test_ks_statistic(a: list[float], b: list[float], d: float) -> None:
    result = ks_two_sample(a, b)
    assert result.d_statistic == pytest.approx(d)


def test_ks_identical_samples_have_p_one() -> None:
    result = ks_two_sample([3, 1, 4, 1, 5], [1, 1, 3, 4, 5])

    assert result.d_statistic == 0.0
    assert result.p_value == 1.0
    assert (result.n1, result.n2) == (5, 5)


def test_ks_agrees_with_scipy() -> None:
    from scipy import stats

    rng = np.random.default_rng(5)
    a, b = rng.gamma(1.0, 2.0, 400), rng.gamma(1.3, 2.0, 300)

    assert ks_two_sample(a, b).d_statistic == pytest.approx(stats.ks_2samp(a, b).statistic)


def test_ks_is_symmetric_and_rank_based() -> None:
    rng = np.random.default_rng(17)
    a, b = rng.gamma(0.8, 6.0, 301), rng.gamma(1.1, 5.0, 217)
    result = ks_two_sample(a, b)
    swapped = ks_two_sample(b, a)

    assert swapped.d_statistic == pytest.approx(result.d_statistic, abs=1e-12)
    assert swapped.p_value == pytest.approx(result.p_value, abs=1e-12)
    assert ks_two_sample(np.log1p(a), np.log1p(b)).d_statistic == pytest.approx(
        result.d_statistic, abs=1e-12
    )


def test_ks_empty_sample() -> None:
    with pytest.raises(EmptySampleError):
        ks_two_sample([], [1.0])


def test_comparison_metrics_self_is_ideal() -> None:
    x = np.array([1.0, 4.0, np.nan, 2.0])
    metrics = comparison_metrics(x, x)

    assert metrics.mean_error == 0.0
    assert metrics.rmse == 0.0
    assert metrics.correlation == pytest.approx(1.0)
    assert metrics.sd_ratio == pytest.approx(1.0)
    assert metrics.n == 3


def test_comparison_metrics_values() -> None:
    metrics = comparison_metrics([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])

    assert metrics.mean_error == pytest.approx(2.0)
    assert metrics.rmse == pytest.approx(math.sqrt((1 + 4 + 9) / 3))
    assert metrics.correlation == pytest.approx(1.0)
    assert metrics.sd_ratio == pytest.approx(2.0)


def test_comparison_metrics_degenerate() -> None:
    metrics = comparison_metrics([1.0, 1.0], [1.0, 2.0])

    assert metrics.correlation is None
    assert metrics.sd_ratio is None

    with pytest.raises(EmptySampleError):
        comparison_metrics([np.nan], [1.0])
