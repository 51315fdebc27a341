"""Rate-table driven multiple-merger jump chain.

This simulator never looks at trees: a state is just the multiset of block
sizes, and jumps are drawn from per-state merger-size tables built out of the
measure's rates.  From b blocks, k of them merge at total rate
binom(b, k) * lambda_{b,k}; the k blocks are an exchangeable uniform
k-subset.  Running it with the beta(1.5, 0.5) measure yields the same law as
the tree-pruning chain, which is what the equivalence experiments check,
so nothing here may depend on the tree code.

Rate rows are built lazily, one block count at a time, in log space; the
full triangle up to n = 10^4 would be wastefully large and overflow-prone.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp

from .prunesim import EventLog, PruneEvent
from .specfun import LambdaMeasure, rate_bk_general, rate_total

__all__ = ["RateTable", "build_table", "run_lambda_chain", "choose_k_subset"]

_BETA_CANONICAL = (1.5, 0.5)


class RateTable:
    """Lazy per-block-count merger tables for one measure.

    row(b) gives the cumulative distribution of the merger size k = 2..b;
    total(b) the jump rate out of a b-block state.  For the beta(1.5, 0.5)
    measure rows are built from log-gamma closed forms and the row sum is
    cross-checked against the independent closed-form total rate.
    """

    def __init__(self, measure: LambdaMeasure, n_max: int):
        if n_max < 2:
            raise ValueError(f"RateTable requires n_max >= 2, got {n_max}")
        if measure.kind != "beta" or (measure.a, measure.b) != _BETA_CANONICAL:
            if n_max > 200:
                raise ValueError("quadrature-backed tables support n_max <= 200")
        self.measure = measure
        self.n_max = n_max
        self._rows: dict[int, np.ndarray] = {}
        self._totals: dict[int, float] = {}

    def _build_row(self, b: int) -> None:
        k = np.arange(2, b + 1)
        if self.measure.kind == "beta" and (self.measure.a, self.measure.b) == _BETA_CANONICAL:
            logw = (
                gammaln(b + 1) - gammaln(k + 1) - gammaln(b - k + 1)
                + gammaln(k - 0.5) + gammaln(b - k + 0.5) - gammaln(float(b))
            )
            log_total = float(logsumexp(logw))
            closed = rate_total(b)
            if not math.isclose(math.exp(log_total), closed, rel_tol=1e-10):
                raise AssertionError(
                    f"row sum {math.exp(log_total)!r} disagrees with closed total {closed!r} at b={b}"
                )
            probs = np.exp(logw - log_total)
            total = closed
        elif self.measure.kind == "kingman":
            probs = np.zeros(b - 1)
            probs[0] = 1.0
            total = float(b * (b - 1) / 2)
        else:
            w = np.array([
                math.comb(b, int(kk)) * rate_bk_general(self.measure, b, int(kk))
                for kk in k
            ])
            total = float(w.sum())
            probs = w / total
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        self._rows[b] = cum
        self._totals[b] = total

    def _ensure(self, b: int) -> None:
        if not 2 <= b <= self.n_max:
            raise ValueError(f"block count {b} outside table range [2, {self.n_max}]")
        if b not in self._rows:
            self._build_row(b)

    def row(self, b: int) -> np.ndarray:
        """Cumulative probabilities of merger sizes 2..b from a b-block state."""
        self._ensure(b)
        return self._rows[b]

    def total(self, b: int) -> float:
        self._ensure(b)
        return self._totals[b]

    def rate(self, b: int, k: int) -> float:
        """lambda_{b,k} recovered from the row (for spot checks)."""
        if not 2 <= k <= b:
            raise ValueError(f"rate requires 2 <= k <= b, got b={b}, k={k}")
        cum = self.row(b)
        p = cum[k - 2] - (cum[k - 3] if k > 2 else 0.0)
        return float(p * self.total(b) / math.comb(b, k))


def build_table(measure: LambdaMeasure, n_max: int) -> RateTable:
    return RateTable(measure, n_max)


def choose_k_subset(items: list, k: int, rng: np.random.Generator) -> list:
    """Uniform k-subset by partial Fisher-Yates; reorders `items` in place."""
    m = len(items)
    if not 0 <= k <= m:
        raise ValueError(f"cannot choose {k} from {m}")
    for i in range(k):
        j = i + int(rng.random() * (m - i))
        items[i], items[j] = items[j], items[i]
    return items[:k]


def run_lambda_chain(
    n: int,
    table: RateTable,
    rng: np.random.Generator,
    timed: bool = False,
    seed: int | None = None,
) -> EventLog:
    """Run the jump chain from n singleton blocks down to one block."""
    if n < 1:
        raise ValueError(f"run_lambda_chain requires n >= 1, got {n}")
    if n > table.n_max:
        raise ValueError(f"n={n} exceeds table n_max={table.n_max}")
    sizes = [1] * n
    events: list[PruneEvent] = []
    t = 0.0
    while len(sizes) > 1:
        b = len(sizes)
        if timed:
            t += rng.exponential(1.0 / table.total(b))
        k = 2 + int(np.searchsorted(table.row(b), rng.random(), side="right"))
        k = min(k, b)
        chosen = choose_k_subset(sizes, k, rng)
        merged = sum(chosen)
        singles = sum(1 for s in chosen if s == 1)
        del sizes[:k]
        sizes.append(merged)
        events.append(PruneEvent(t, k, singles))
    return EventLog(n, seed, timed, events)
