"""The tree-pruning coalescent chain.

One run starts from a uniform ordered binary tree with n singleton-labelled
leaves.  While more than one leaf remains, an internal vertex is chosen
uniformly among those alive; the leaf blocks below it merge into one leaf
placed at the chosen vertex, and the subtree disappears.  In the timed
variant each pick is preceded by an exponential wait with the total merger
rate of the current leaf count, which makes the sequence of leaf partitions
a multiple-merger coalescent with rates rate_nk / rate_total.

Event logs serialize to JSON lines:

    {"n": 5, "seed": 42, "events": [{"t": 0.31, "k": 2, "singletons": 2}, ...]}

with t = 0.0 for untimed runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import treecore
from .specfun import rate_total

__all__ = [
    "PruneEvent",
    "EventLog",
    "ChainSummary",
    "run_chain",
    "chain_summary",
    "collision_count",
    "last_event_stats",
    "first_merger_snapshot",
    "expected_collisions",
]


@dataclass
class PruneEvent:
    time: float
    merged_block_count: int
    singleton_count: int
    code: str | None = None


@dataclass
class EventLog:
    n: int
    seed: int | None
    timed: bool
    events: list[PruneEvent] = field(default_factory=list)

    def to_json_line(self) -> str:
        return json.dumps({
            "n": self.n,
            "seed": self.seed,
            "events": [
                {"t": e.time, "k": e.merged_block_count, "singletons": e.singleton_count}
                for e in self.events
            ],
        })

    @classmethod
    def from_json_line(cls, line: str) -> "EventLog":
        obj = json.loads(line)
        events = [PruneEvent(e["t"], e["k"], e["singletons"]) for e in obj["events"]]
        timed = any(e.time > 0.0 for e in events)
        return cls(int(obj["n"]), obj["seed"], timed, events)


@dataclass
class ChainSummary:
    """Cheap per-run statistics for big Monte-Carlo sweeps."""
    n: int
    collisions: int
    last_merged: int
    last_singletons: int


_RATE_CACHE: dict[int, float] = {}


def _cached_rate(k: int) -> float:
    r = _RATE_CACHE.get(k)
    if r is None:
        r = rate_total(k)
        _RATE_CACHE[k] = r
    return r


def _run(n, rng, timed, record_events, record_codes, track_blocks, on_event):
    tree = treecore.sample_uniform(n, rng, with_blocks=track_blocks)
    left = tree.left
    right = tree.right
    bsize = tree.bsize
    bmin = tree.bmin
    blocks = tree.blocks
    # live internal vertices with positions, for O(1) removal
    internals = [v for v in range(2 * n - 1) if left[v] != -1]
    pos = [0] * (2 * n - 1)
    for i, v in enumerate(internals):
        pos[v] = i

    events = [] if record_events else None
    t = 0.0
    leaves = n
    count = 0
    last_k = 0
    last_s = 0
    while leaves > 1:
        if timed:
            t += rng.exponential(1.0 / _cached_rate(leaves))
        v = internals[int(rng.random() * len(internals))]
        # collapse subtree(v): walk it, freeing internal vertices as we go
        k = 0
        singles = 0
        msize = 0
        mmin = 1 << 60
        labels = [] if (track_blocks and blocks is not None) else None
        stack = [left[v], right[v]]
        while stack:
            x = stack.pop()
            l = left[x]
            if l == -1:
                k += 1
                s = bsize[x]
                msize += s
                if s == 1:
                    singles += 1
                if bmin[x] < mmin:
                    mmin = bmin[x]
                if labels is not None:
                    labels.extend(blocks[x])
            else:
                stack.append(l)
                stack.append(right[x])
                i = pos[x]
                last = internals[-1]
                internals[i] = last
                pos[last] = i
                internals.pop()
        i = pos[v]
        last = internals[-1]
        internals[i] = last
        pos[last] = i
        internals.pop()
        left[v] = -1
        right[v] = -1
        bsize[v] = msize
        bmin[v] = mmin
        if labels is not None:
            blocks[v] = tuple(sorted(labels))
        leaves -= k - 1
        tree.n_leaves = leaves
        count += 1
        last_k = k
        last_s = singles
        if record_events:
            code = treecore.encode(tree) if record_codes else None
            events.append(PruneEvent(t, k, singles, code))
        if on_event is not None:
            on_event(tree, PruneEvent(t, k, singles))
    return tree, events, count, last_k, last_s


def run_chain(
    n: int,
    rng: np.random.Generator,
    timed: bool = False,
    seed: int | None = None,
    record_codes: bool = False,
    track_blocks: bool | None = None,
    on_event=None,
) -> EventLog:
    """Run one pruning chain and return its event log.

    track_blocks defaults to n <= 512 (or whenever codes are recorded);
    beyond that only block sizes and minima are maintained, which the event
    log never needs.  `on_event(tree, event)` fires after each merger.
    """
    if n < 1:
        raise ValueError(f"run_chain requires n >= 1, got {n}")
    if track_blocks is None:
        track_blocks = record_codes or n <= 512
    if record_codes and not track_blocks:
        raise ValueError("record_codes requires track_blocks")
    _, events, _, _, _ = _run(n, rng, timed, True, record_codes, track_blocks, on_event)
    return EventLog(n, seed, timed, events)


def chain_summary(n: int, rng: np.random.Generator, timed: bool = False) -> ChainSummary:
    """One untracked run reduced to (collision count, final-merger stats)."""
    _, _, count, last_k, last_s = _run(n, rng, timed, False, False, False, None)
    return ChainSummary(n, count, last_k, last_s)


def collision_count(log: EventLog) -> int:
    """Number of merger events until one leaf remains."""
    return len(log.events)


def expected_collisions(n: int) -> float:
    """Exact mean collision count, by recursion over the jump-size law.

    From b blocks the chain merges k of them with probability proportional
    to C(b,k) * Beta(k - 1/2, b - k + 1/2), landing on b - k + 1 blocks, so
    the mean event count solves a triangular linear system.  Runs in O(n^2)
    flops; the result scales like sqrt(pi) / 2 * sqrt(n) for large n (the
    ratio to sqrt(n) is still ~0.909 at n = 10^4, converging from above).
    """
    if n < 1:
        raise ValueError(f"expected_collisions requires n >= 1, got {n}")
    # gammaln tables at integer and half-integer arguments
    j = np.arange(n + 2, dtype=float)
    g_int = gammaln(np.maximum(j, 1.0))
    g_half = gammaln(np.maximum(j - 0.5, 0.5))
    expect = np.zeros(n + 1)
    for b in range(2, n + 1):
        k = np.arange(2, b + 1)
        log_w = (g_int[b + 1] - g_int[k + 1] - g_int[b - k + 1]
                 + g_half[k] + g_half[b - k + 1] - g_int[b])
        w = np.exp(log_w - log_w.max())
        p = w / w.sum()
        expect[b] = 1.0 + float(np.dot(p, expect[b - k + 1]))
    return float(expect[n])


def last_event_stats(log: EventLog) -> tuple[int, int]:
    """(blocks merged, singletons among them) for the final event."""
    if not log.events:
        raise ValueError("log has no events (chain started at n = 1)")
    e = log.events[-1]
    return e.merged_block_count, e.singleton_count


def first_merger_snapshot(n: int, rng: np.random.Generator) -> tuple[int, treecore.Tree]:
    """Perform only the first merger and return (merger size, relabelled tree).

    The returned tree has its blocks replaced by rank singletons (blocks
    ordered by smallest label), so snapshots from different runs can be
    pooled by code.
    """
    if n < 2:
        raise ValueError(f"first_merger_snapshot requires n >= 2, got {n}")
    tree = treecore.sample_uniform(n, rng, with_blocks=True)
    internals = tree.internal_vertices()
    v = internals[int(rng.random() * len(internals))]
    k, _ = treecore._prune_inplace(tree, v)
    return k, treecore.relabel_canonical(tree)
