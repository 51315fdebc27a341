"""Pruning chain: exact small-n laws, logs, and the mean-collision recursion."""

import json
import math

import numpy as np
import pytest

from coalforge import prunesim, treecore
from coalforge.prunesim import (
    ChainSummary,
    EventLog,
    PruneEvent,
    chain_summary,
    collision_count,
    expected_collisions,
    first_merger_snapshot,
    last_event_stats,
    run_chain,
)


def test_single_leaf_chain_is_empty():
    log = run_chain(1, np.random.default_rng(0))
    assert log.events == []
    assert collision_count(log) == 0
    summary = chain_summary(1, np.random.default_rng(0))
    assert summary.collisions == 0
    with pytest.raises(ValueError):
        last_event_stats(log)
    with pytest.raises(ValueError):
        run_chain(0, np.random.default_rng(0))


def test_two_leaves_always_one_pair_merger():
    rng = np.random.default_rng(1)
    for _ in range(20):
        log = run_chain(2, rng)
        assert [(e.merged_block_count, e.singleton_count) for e in log.events] == [(2, 2)]
        assert last_event_stats(log) == (2, 2)


def test_three_leaves_first_merger_is_a_fair_coin():
    # two internal vertices, one merging 2 leaves and one merging all 3
    rng = np.random.default_rng(7)
    draws = 20000
    triples = sum(run_chain(3, rng).events[0].merged_block_count == 3
                  for _ in range(draws))
    se = math.sqrt(0.25 / draws)
    assert abs(triples / draws - 0.5) < 5 * se


def test_merger_sizes_telescope():
    rng = np.random.default_rng(3)
    for n in (2, 5, 24):
        log = run_chain(n, rng)
        assert sum(e.merged_block_count - 1 for e in log.events) == n - 1
        assert all(e.merged_block_count >= 2 for e in log.events)
        assert all(0 <= e.singleton_count <= e.merged_block_count for e in log.events)


def test_timed_chain_has_increasing_times():
    log = run_chain(12, np.random.default_rng(9), timed=True)
    times = [e.time for e in log.events]
    assert all(b > a for a, b in zip(times, times[1:]))
    assert times[0] > 0.0
    untimed = run_chain(12, np.random.default_rng(9), timed=False)
    assert all(e.time == 0.0 for e in untimed.events)


def test_event_log_json_round_trip():
    log = run_chain(6, np.random.default_rng(4), timed=True, seed=77)
    line = log.to_json_line()
    back = EventLog.from_json_line(line)
    assert back.n == 6
    assert back.seed == 77
    assert back.timed
    assert [(e.time, e.merged_block_count, e.singleton_count) for e in back.events] == \
           [(e.time, e.merged_block_count, e.singleton_count) for e in log.events]
    payload = json.loads(line)
    assert set(payload) == {"n", "seed", "events"}
    assert set(payload["events"][0]) == {"t", "k", "singletons"}


def test_run_chain_is_reproducible():
    a = run_chain(40, np.random.default_rng(123), timed=True)
    b = run_chain(40, np.random.default_rng(123), timed=True)
    assert a.to_json_line() == b.to_json_line()


def test_recorded_codes_are_decodable():
    log = run_chain(5, np.random.default_rng(8), record_codes=True)
    for e in log.events:
        assert e.code is not None
        treecore.decode(e.code)
    final = treecore.decode(log.events[-1].code)
    assert final.leaf_blocks() == [(1, 2, 3, 4, 5)]
    with pytest.raises(ValueError):
        run_chain(5, np.random.default_rng(8), record_codes=True, track_blocks=False)


def test_summary_matches_full_log():
    summary = chain_summary(30, np.random.default_rng(55))
    log = run_chain(30, np.random.default_rng(55), track_blocks=False)
    assert summary.collisions == collision_count(log)
    assert (summary.last_merged, summary.last_singletons) == last_event_stats(log)
    assert isinstance(summary, ChainSummary)


def test_expected_collisions_small_cases():
    assert expected_collisions(1) == 0.0
    assert expected_collisions(2) == 1.0
    # from 3 blocks: pair and triple mergers are equally likely
    assert expected_collisions(3) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(ValueError):
        expected_collisions(0)


def test_expected_collisions_matches_simulation():
    n, reps = 30, 4000
    rng = np.random.default_rng(77)
    xs = np.array([chain_summary(n, rng).collisions for _ in range(reps)], dtype=float)
    se = xs.std(ddof=1) / math.sqrt(reps)
    assert abs(xs.mean() - expected_collisions(n)) < 5 * se


def test_expected_collisions_scaling_sits_below_sqrt_pi():
    # the exact recursion converges to sqrt(pi)/2 * sqrt(n) from above
    r400 = expected_collisions(400) / math.sqrt(400)
    r1600 = expected_collisions(1600) / math.sqrt(1600)
    half_sqrt_pi = 0.5 * math.sqrt(math.pi)
    assert half_sqrt_pi < r1600 < r400 < 1.1
    assert r1600 == pytest.approx(half_sqrt_pi, rel=0.08)


def test_first_merger_snapshot_contract():
    rng = np.random.default_rng(21)
    for _ in range(50):
        k, tree = first_merger_snapshot(4, rng)
        assert 2 <= k <= 4
        assert tree.n_leaves == 4 - k + 1
        assert tree.leaf_blocks() == [(i,) for i in range(1, tree.n_leaves + 1)]
    with pytest.raises(ValueError):
        first_merger_snapshot(1, rng)


def test_prune_event_defaults():
    e = PruneEvent(0.5, 3, 1)
    assert e.code is None
