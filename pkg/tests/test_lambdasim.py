"""Measure-driven jump chain: rate rows, subset choice, chain invariants."""

import math

import numpy as np
import pytest

from coalforge import stats
from coalforge.lambdasim import RateTable, build_table, choose_k_subset, run_lambda_chain
from coalforge.specfun import LambdaMeasure, beta_fn, rate_nk, rate_total


def test_canonical_beta_rows_match_closed_forms():
    table = build_table(LambdaMeasure.beta(1.5, 0.5), 12)
    for b in range(2, 13):
        assert table.total(b) == pytest.approx(rate_total(b), rel=1e-12)
        for k in range(2, b + 1):
            assert table.rate(b, k) == pytest.approx(rate_nk(b, k), rel=1e-10)
        row = table.row(b)
        assert row[-1] == 1.0
        assert np.all(np.diff(row) >= 0.0)


def test_uniform_measure_rows_via_quadrature():
    table = build_table(LambdaMeasure.uniform(), 7)
    for b in (2, 5, 7):
        for k in range(2, b + 1):
            assert table.rate(b, k) == pytest.approx(
                beta_fn(k - 1.0, b - k + 1.0), abs=1e-8)


def test_kingman_rows_are_pairwise_only():
    table = build_table(LambdaMeasure.kingman(), 8)
    assert table.total(5) == pytest.approx(10.0)
    assert table.rate(5, 2) == pytest.approx(1.0)
    log = run_lambda_chain(6, table, np.random.default_rng(0))
    assert [e.merged_block_count for e in log.events] == [2, 2, 2, 2, 2]


def test_table_guards():
    with pytest.raises(ValueError):
        RateTable(LambdaMeasure.kingman(), 1)
    with pytest.raises(ValueError):
        build_table(LambdaMeasure.beta(2.0, 1.0), 500)  # quadrature-backed cap
    build_table(LambdaMeasure.beta(1.5, 0.5), 20000)  # canonical scales freely
    table = build_table(LambdaMeasure.uniform(), 5)
    with pytest.raises(ValueError):
        table.row(6)
    with pytest.raises(ValueError):
        table.rate(4, 1)


def test_choose_k_subset_edges_and_uniformity():
    rng = np.random.default_rng(17)
    assert sorted(choose_k_subset([3, 1, 2], 3, rng)) == [1, 2, 3]
    assert choose_k_subset([5, 6], 0, rng) == []
    with pytest.raises(ValueError):
        choose_k_subset([1, 2], 3, rng)
    # all 6 unordered pairs from 4 items should be equally likely
    counts = {}
    for _ in range(6000):
        pair = frozenset(choose_k_subset([0, 1, 2, 3], 2, rng))
        counts[pair] = counts.get(pair, 0) + 1
    assert len(counts) == 6
    res = stats.chi_square(sorted(counts.values()), [1.0 / 6.0] * 6)
    assert res.pvalue > 1e-4


def test_chain_telescopes_and_tracks_singletons():
    table = build_table(LambdaMeasure.beta(1.5, 0.5), 30)
    rng = np.random.default_rng(23)
    for n in (2, 9, 30):
        log = run_lambda_chain(n, table, rng, seed=5)
        assert log.n == n
        assert log.seed == 5
        assert sum(e.merged_block_count - 1 for e in log.events) == n - 1
        assert log.events[0].singleton_count == log.events[0].merged_block_count
    with pytest.raises(ValueError):
        run_lambda_chain(31, table, rng)
    with pytest.raises(ValueError):
        run_lambda_chain(0, table, rng)


def test_timed_chain_times_increase():
    table = build_table(LambdaMeasure.beta(1.5, 0.5), 16)
    log = run_lambda_chain(16, table, np.random.default_rng(2), timed=True)
    times = [e.time for e in log.events]
    assert times == sorted(times)
    assert times[0] > 0.0


def test_first_jump_law_matches_three_block_coin():
    # from 3 blocks the canonical measure picks k = 3 with probability 1/2
    table = build_table(LambdaMeasure.beta(1.5, 0.5), 3)
    rng = np.random.default_rng(31)
    draws = 20000
    triples = sum(
        run_lambda_chain(3, table, rng).events[0].merged_block_count == 3
        for _ in range(draws)
    )
    se = math.sqrt(0.25 / draws)
    assert abs(triples / draws - 0.5) < 5 * se
