"""KS distance, chi-square gates, and cell pooling."""

import math

import numpy as np
import pytest

from coalforge.stats import (
    MIN_EXPECTED,
    ChiSquareResult,
    chi_square,
    chi_square_two_sample,
    ks_statistic,
    pool_cells,
    rayleigh_cdf,
)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------


def test_ks_small_against_own_cdf():
    rng = np.random.default_rng(0)
    u = rng.random(10000)
    assert ks_statistic(u, lambda x: x) < 0.02


def test_ks_constant_sample_is_far_from_continuous():
    assert ks_statistic([0.5] * 100, lambda x: np.asarray(x)) >= 0.5


def test_ks_separates_rayleigh_from_exponential():
    rng = np.random.default_rng(1)
    r = np.sqrt(-2.0 * np.log(rng.random(10000)))  # standard Rayleigh
    assert ks_statistic(r, lambda x: 1.0 - np.exp(-x)) > 0.1


def test_ks_accepts_scalar_only_cdf():
    samples = [0.1, 0.4, 0.9]
    vector = ks_statistic(samples, lambda x: np.asarray(x))
    scalar = ks_statistic(samples, lambda x: float(x))
    assert vector == scalar


def test_ks_empty_raises():
    with pytest.raises(ValueError):
        ks_statistic([], lambda x: x)


def test_rayleigh_cdf_values():
    assert rayleigh_cdf(0.0) == 0.0
    assert float(rayleigh_cdf(1.0)) == pytest.approx(1.0 - math.exp(-0.5), rel=1e-14)
    assert float(rayleigh_cdf(-3.0)) == 0.0
    grid = np.array([0.5, 1.5, 3.0])
    assert np.all(np.diff(rayleigh_cdf(grid)) > 0.0)


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------


def test_pool_cells_merges_left_to_right():
    obs, exp = pool_cells(np.array([1.0, 2.0, 3.0, 10.0]),
                          np.array([6.0, 1.0, 1.0, 6.0]))
    np.testing.assert_allclose(obs, [1.0, 15.0])
    np.testing.assert_allclose(exp, [6.0, 8.0])


def test_pool_cells_trailing_bucket_joins_last():
    obs, exp = pool_cells(np.array([7.0, 1.0]), np.array([6.0, 2.0]))
    np.testing.assert_allclose(obs, [8.0])
    np.testing.assert_allclose(exp, [8.0])


def test_pool_cells_keeps_heavy_cells():
    observed = np.array([10.0, 20.0, 30.0])
    expected = np.array([12.0, 18.0, 30.0])
    obs, exp = pool_cells(observed, expected)
    np.testing.assert_allclose(obs, observed)
    np.testing.assert_allclose(exp, expected)
    assert MIN_EXPECTED == 5.0


# ---------------------------------------------------------------------------
# one-sample chi-square
# ---------------------------------------------------------------------------


def test_chi_square_exact_proportions_give_p_one():
    res = chi_square([300, 500, 200], [0.3, 0.5, 0.2])
    assert res.statistic == pytest.approx(0.0, abs=1e-12)
    assert res.pvalue == pytest.approx(1.0)
    assert res.dof == 2


def test_chi_square_uniform_null_is_calm():
    rng = np.random.default_rng(2)
    counts = rng.multinomial(120000, [1.0 / 12.0] * 12)
    res = chi_square(counts, [1.0 / 12.0] * 12)
    assert res.pvalue > 0.001
    assert res.n_cells == 12


def test_chi_square_detects_a_shifted_law():
    res = chi_square([900, 100], [0.5, 0.5])
    assert res.pvalue < 1e-10


def test_chi_square_overflow_cell_needs_total():
    probs = [0.5, 0.25, 0.125]  # geometric head, 1/8 spills over
    with pytest.raises(ValueError):
        chi_square([480, 260, 130], probs)
    res = chi_square([480, 260, 130], probs, total=1000)
    assert res.n_cells == 4
    assert res.pvalue > 0.001
    with pytest.raises(ValueError):
        chi_square([480, 260, 130], probs, total=800)  # fewer than listed


def test_chi_square_domain_errors():
    with pytest.raises(ValueError):
        chi_square([10, 5], [0.5, 0.5, 0.0])  # shape mismatch
    with pytest.raises(ValueError):
        chi_square([10, 5, 3], [0.5, 0.5, 0.2])  # probabilities above one
    with pytest.raises(ValueError):
        chi_square([10, 5], [0.5, -0.5])
    with pytest.raises(ValueError):
        chi_square([10, 5, 1], [0.5, 0.5, 0.0])  # mass on an impossible cell
    with pytest.raises(ValueError):
        chi_square([0, 0], [0.5, 0.5])
    with pytest.raises(ValueError):
        chi_square([3, 4], [0.5, 0.5])  # both cells pool into one


def test_chi_square_ddof():
    counts = [30, 40, 30, 50, 60, 40]
    res0 = chi_square(counts, [1.0 / 6.0] * 6)
    res1 = chi_square(counts, [1.0 / 6.0] * 6, ddof=1)
    assert res1.dof == res0.dof - 1
    assert res1.pvalue < res0.pvalue  # same statistic, tighter null
    with pytest.raises(ValueError):
        chi_square([50, 50], [0.5, 0.5], ddof=1)


def test_result_pass_threshold_is_inclusive():
    res = ChiSquareResult(statistic=1.0, dof=1, pvalue=0.001, n_cells=2)
    assert res.passed(0.001)
    assert not res.passed(0.0011)


# ---------------------------------------------------------------------------
# two-sample chi-square
# ---------------------------------------------------------------------------


def test_two_sample_same_law_is_calm():
    rng = np.random.default_rng(3)
    p = np.array([0.4, 0.3, 0.2, 0.1])
    a = rng.multinomial(5000, p)
    b = rng.multinomial(8000, p)
    res = chi_square_two_sample(a, b)
    assert res.pvalue > 0.001
    assert res.dof == 3


def test_two_sample_detects_different_laws():
    a = [800, 100, 100]
    b = [100, 100, 800]
    res = chi_square_two_sample(a, b)
    assert res.pvalue < 1e-10


def test_two_sample_pools_sparse_cells():
    # tail cells individually below MIN_EXPECTED must merge, not crash
    a = [500, 480, 3, 2, 1, 0, 1]
    b = [510, 470, 2, 3, 0, 1, 1]
    res = chi_square_two_sample(a, b)
    assert res.n_cells < 7
    assert res.pvalue > 0.001


def test_two_sample_guards():
    with pytest.raises(ValueError):
        chi_square_two_sample([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        chi_square_two_sample([0, 0], [1, 2])
