"""Deterministic random-number stream management.

Every Monte-Carlo replicate gets its own PCG64 generator derived from a master
seed and the replicate index through numpy's SeedSequence spawn mechanism, so
results are reproducible and independent of how replicates are distributed
over workers.
"""

from __future__ import annotations

import multiprocessing
import os
from typing import Callable, Iterable, Sequence

import numpy as np


def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for the stream identified by `key` under `master_seed`."""
    return np.random.SeedSequence(master_seed, spawn_key=tuple(key))


def derive_stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one replicate (or one named sub-stream)."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, *key)))


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit integer naming the stream `key`; usable as a nested master seed."""
    return int(seed_sequence(master_seed, *key).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# replicate mapping
# ---------------------------------------------------------------------------

_WORKER_FN = None


def _worker_init(fn):
    global _WORKER_FN
    _WORKER_FN = fn


def _worker_run(args):
    master_seed, indices = args
    return [_WORKER_FN(i, derive_stream(master_seed, i)) for i in indices]


def replicate_map(
    fn: Callable[[int, np.random.Generator], object],
    n_replicates: int,
    master_seed: int,
    workers: int = 1,
) -> list:
    """Run `fn(index, rng)` for index 0..n_replicates-1 and collect results.

    The result list is ordered by replicate index and is byte-identical for
    any worker count, because stream derivation depends only on the index.
    `fn` must be picklable (module level) when workers > 1.
    """
    if n_replicates < 0:
        raise ValueError("n_replicates must be nonnegative")
    if workers <= 1 or n_replicates < 2:
        return [fn(i, derive_stream(master_seed, i)) for i in range(n_replicates)]

    chunk = max(1, n_replicates // (workers * 8))
    batches = [
        (master_seed, range(lo, min(lo + chunk, n_replicates)))
        for lo in range(0, n_replicates, chunk)
    ]
    ctx = multiprocessing.get_context("fork" if os.name == "posix" else "spawn")
    with ctx.Pool(workers, initializer=_worker_init, initargs=(fn,)) as pool:
        out: list = []
        for part in pool.map(_worker_run, batches):
            out.extend(part)
    return out
