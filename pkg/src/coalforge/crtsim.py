"""Reduced continuum trees, Poisson mark pruning, and the dust process.

A reduced tree with n sampled leaves has a uniform ordered binary shape and
edge lengths whose joint density is proportional to exp(-2 s^2) in the total
length s.  That density factorizes: s^2 is Gamma(n, rate 2) and, given s,
the 2n - 1 edge lengths split s like a flat Dirichlet.  Every vertex owns
the edge to its parent; the shape root owns the root edge, so internal edges
(those above internal vertices) number n - 1 and include the root edge.

Marks rain on the tree as a Poisson process with intensity
mark_rate * length * dtheta.  A mark on an edge merges all sampled leaves
below that edge into one class; leaves with no marked edge on their root
path are dust.  The process is observed at L-, where L is the first mark on
the root edge, giving the counts

    U = classes + dust,    V = dust + singleton classes,    W = singleton
    classes,

whose joint law matches the final-merger counts (B, E) of the discrete
pruning chain via (B, E) =d (U, V).

Only the first mark per edge can change the leaf partition, so the sampler
draws first-mark times exactly and tallies repeat marks without storing
them; the event list stays bounded by the edge count while total mark counts
remain exact.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import treecore
from .treecore import Tree

__all__ = [
    "CrtParams",
    "ReducedTree",
    "sample_reduced_tree",
    "coalescence_rate",
    "MarkEvent",
    "CrtPruneResult",
    "run_crt_pruning",
    "UvwSample",
    "sample_uvw",
    "sample_first_marked_edge",
    "sample_dust",
    "sample_dust_batch",
    "dust_cdf",
    "ThetaEstimate",
    "estimate_theta_integral",
]


@dataclass(frozen=True)
class CrtParams:
    """Scaling parameters; mark intensity per unit length is 2 * alpha."""

    alpha: float = 2.0

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def mark_rate(self) -> float:
        return 2.0 * self.alpha


@dataclass
class ReducedTree:
    """Shape plus edge lengths; lengths[v] is the edge above vertex v."""

    shape: Tree
    lengths: np.ndarray

    def __post_init__(self):
        nv = 2 * self.shape.n_leaves - 1
        if len(self.lengths) != nv:
            raise ValueError(f"need {nv} lengths, got {len(self.lengths)}")
        if np.any(self.lengths <= 0.0):
            raise ValueError("edge lengths must be positive")

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    @property
    def internal_length(self) -> float:
        """Length of edges above internal vertices (includes the root edge)."""
        s = 0.0
        for v in self.shape.live_vertices():
            if self.shape.left[v] != -1:
                s += self.lengths[v]
        return float(s)


def sample_reduced_tree(n: int, rng: np.random.Generator,
                        with_blocks: bool = True) -> ReducedTree:
    """Uniform shape with joint length density prop. to s^n-ish exp(-2 s^2).

    Drawn as s = sqrt(Gamma(n, rate 2)) split by a flat Dirichlet over the
    2n - 1 edges, which reproduces that density exactly.
    """
    if n < 1:
        raise ValueError(f"sample_reduced_tree requires n >= 1, got {n}")
    shape = treecore.sample_uniform(n, rng, with_blocks=with_blocks)
    s = math.sqrt(rng.gamma(n, 0.5))
    w = rng.standard_exponential(2 * n - 1)
    return ReducedTree(shape, s * (w / w.sum()))


def coalescence_rate(tree: ReducedTree, params: CrtParams) -> float:
    """Total rate at which partition-changing marks arrive: mark_rate times
    internal length."""
    return params.mark_rate * tree.internal_length


# ---------------------------------------------------------------------------
# leaf intervals and the (U, V, W) sweep
# ---------------------------------------------------------------------------


def _leaf_intervals(shape: Tree) -> tuple[np.ndarray, np.ndarray]:
    """Per vertex, the contiguous range [lo, hi] of left-to-right leaf
    positions below it (a leaf maps to its own position)."""
    nv = len(shape.left)
    lo = [0] * nv
    hi = [0] * nv
    left = shape.left
    right = shape.right
    # leaf positions by depth-first order
    stack = [shape.root]
    idx = 0
    dfs = []
    while stack:
        v = stack.pop()
        dfs.append(v)
        if left[v] == -1:
            lo[v] = hi[v] = idx
            idx += 1
        else:
            stack.append(right[v])
            stack.append(left[v])
    # children precede parents in reversed DFS emit order? no: parents come
    # first in dfs, so walk it backwards to fill internal ranges
    for v in reversed(dfs):
        if left[v] != -1:
            lo[v] = lo[left[v]]
            hi[v] = hi[right[v]]
    return np.array(lo), np.array(hi)


def _uvw_from_marks(lo: np.ndarray, hi: np.ndarray, marked: np.ndarray,
                    n: int) -> tuple[int, int, int]:
    """Counts (U, V, W) given which non-root edges carry a mark.

    Classes are the maximal marked intervals; the subtree intervals form a
    laminar family, so after sorting by (lo asc, hi desc) an interval starts
    a class iff it begins past everything already covered.
    """
    if not marked.any():
        return n, n, 0
    a = lo[marked]
    b = hi[marked]
    order = np.lexsort((-b, a))
    a = a[order]
    b = b[order]
    cummax = np.maximum.accumulate(b)
    keep = np.empty(len(a), dtype=bool)
    keep[0] = True
    keep[1:] = a[1:] > cummax[:-1]
    sizes = b[keep] - a[keep] + 1
    n_classes = len(sizes)
    dust = n - int(sizes.sum())
    w = int((sizes == 1).sum())
    return dust + n_classes, dust + w, w


# ---------------------------------------------------------------------------
# event-level pruning
# ---------------------------------------------------------------------------


@dataclass
class MarkEvent:
    theta: float
    edge: int            # vertex id owning the marked edge
    position: float      # distance from the child end of the edge


@dataclass
class CrtPruneResult:
    U: int
    V: int
    W: int
    L: float
    events: list[MarkEvent]
    n_marks: int              # all marks in [0, L], repeats included
    n_coalescent_events: int  # marks that changed the partition, incl. final
    partitions: list[list[tuple[int, ...]]] | None = None


def run_crt_pruning(tree: ReducedTree, params: CrtParams,
                    rng: np.random.Generator,
                    record_partitions: bool = False) -> CrtPruneResult:
    """Prune one reduced tree and report counts at the first root-edge mark.

    events holds the first mark of each non-root edge that fires before L,
    in time order; repeat marks never alter the partition and enter only
    n_marks.  With record_partitions the leaf partition after each event is
    kept (small n only).
    """
    shape = tree.shape
    n = shape.n_leaves
    root = shape.root
    c = params.mark_rate
    lengths = tree.lengths
    L = rng.exponential(1.0 / (c * lengths[root]))
    if n == 1:
        return CrtPruneResult(1, 1, 0, L, [], 1, 1, [[(1,)]] if record_partitions else None)

    first = rng.exponential(1.0, size=len(lengths)) / (c * lengths)
    first[root] = np.inf
    marked = first < L
    # repeats on a marked edge: Poisson on the remaining time window
    n_marks = 1 + int(marked.sum())
    if marked.any():
        n_marks += int(rng.poisson(c * lengths[marked] * (L - first[marked])).sum())

    lo, hi = _leaf_intervals(shape)
    U, V, W = _uvw_from_marks(lo, hi, marked, n)

    edges = np.flatnonzero(marked)
    order = np.argsort(first[edges])
    edges = edges[order]
    events = [
        MarkEvent(float(first[e]), int(e), float(rng.random() * lengths[e]))
        for e in edges
    ]

    # replay in time order over the interval partition to count real
    # coalescences; classes are disjoint leaf intervals at all times
    los: list[int] = []
    his: list[int] = []
    changes = 0
    partitions = [] if record_partitions else None
    leaf_pos = shape.leaf_vertices()
    for e in edges:
        a, b = int(lo[e]), int(hi[e])
        i = bisect.bisect_right(los, a) - 1
        if i >= 0 and los[i] <= a and his[i] >= b:
            covered = True      # nested below an existing class
        else:
            covered = False
            j = bisect.bisect_left(los, a)
            k = j
            while k < len(los) and los[k] <= b:
                if his[k] > b:
                    raise AssertionError("subtree intervals must be laminar")
                k += 1
            removed = k - j
            del los[j:k]
            del his[j:k]
            los.insert(j, a)
            his.insert(j, b)
            if b > a:
                changes += 1
            # a == b marks a single external edge: the class {leaf} existed
            # already, no partition change
        if partitions is not None:
            partitions.append(_intervals_to_blocks(shape, leaf_pos, los, his))
    changes += 1  # the root mark merges everything and always counts

    res_U = (n - sum(h - l + 1 for l, h in zip(los, his))) + len(los)
    res_W = sum(1 for l, h in zip(los, his) if l == h)
    res_V = (n - sum(h - l + 1 for l, h in zip(los, his))) + res_W
    if (res_U, res_V, res_W) != (U, V, W):
        raise AssertionError("interval replay disagrees with the mark sweep")
    return CrtPruneResult(U, V, W, float(L), events, n_marks, changes, partitions)


def _intervals_to_blocks(shape: Tree, leaf_pos: list[int],
                         los: list[int], his: list[int]) -> list[tuple[int, ...]]:
    if shape.blocks is None:
        raise ValueError("partition recording needs label blocks on the shape")
    blocks = []
    in_class = set()
    for l, h in zip(los, his):
        members = []
        for p in range(l, h + 1):
            in_class.add(p)
            members.extend(shape.blocks[leaf_pos[p]])
        blocks.append(tuple(sorted(members)))
    for p in range(shape.n_leaves):
        if p not in in_class:
            blocks.append(shape.blocks[leaf_pos[p]])
    return sorted(blocks, key=lambda b: b[0])


# ---------------------------------------------------------------------------
# fast path
# ---------------------------------------------------------------------------


@dataclass
class UvwSample:
    U: int
    V: int
    W: int
    L: float
    H: float   # coalescence rate of the sampled tree


def sample_uvw(n: int, params: CrtParams, rng: np.random.Generator) -> UvwSample:
    """Draw one (U, V, W) observation without materializing mark events.

    Given L, distinct edges are marked independently with probability
    1 - exp(-mark_rate * length * L); the partition only depends on which
    edges are marked, so this reproduces the law of run_crt_pruning exactly.
    """
    if n < 1:
        raise ValueError(f"sample_uvw requires n >= 1, got {n}")
    shape = treecore.sample_uniform(n, rng, with_blocks=False)
    s = math.sqrt(rng.gamma(n, 0.5))
    w = rng.standard_exponential(2 * n - 1)
    lengths = s * (w / w.sum())
    c = params.mark_rate
    root = shape.root
    internal = 0.0
    for v in range(2 * n - 1):
        if shape.left[v] != -1:
            internal += lengths[v]
    L = rng.exponential(1.0 / (c * lengths[root]))
    if n == 1:
        return UvwSample(1, 1, 0, float(L), c * internal)
    u = rng.random(2 * n - 1)
    marked = u < -np.expm1(-c * lengths * L)
    marked[root] = False
    lo, hi = _leaf_intervals(shape)
    U, V, W = _uvw_from_marks(lo, hi, marked, n)
    return UvwSample(U, V, W, float(L), c * internal)


def sample_first_marked_edge(n: int, rng: np.random.Generator) -> tuple[int, int]:
    """(edge index, edge count) for the first mark anywhere on a fresh tree.

    Given the lengths, the first mark lands on edge e with probability
    length_e / total, so a length-weighted draw is exact.
    """
    if n < 1:
        raise ValueError(f"sample_first_marked_edge requires n >= 1, got {n}")
    tree = sample_reduced_tree(n, rng, with_blocks=False)
    cum = np.cumsum(tree.lengths)
    e = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(e, len(cum) - 1), len(cum)


# ---------------------------------------------------------------------------
# dust
# ---------------------------------------------------------------------------


def sample_dust(theta: float, rng: np.random.Generator) -> float:
    """One draw of the dust fraction at depth theta: 1 / (1 + 4 tau) with
    tau = theta^2 / N^2, N standard normal."""
    return float(sample_dust_batch(theta, 1, rng)[0])


def sample_dust_batch(theta: float, size: int, rng: np.random.Generator) -> np.ndarray:
    if theta <= 0.0:
        raise ValueError(f"theta must be positive, got {theta}")
    nrm = rng.standard_normal(size)
    while True:
        zero = nrm == 0.0
        if not zero.any():
            break
        nrm[zero] = rng.standard_normal(int(zero.sum()))
    tau = (theta * theta) / (nrm * nrm)
    return 1.0 / (1.0 + 4.0 * tau)


def dust_cdf(theta: float, x) -> np.ndarray | float:
    """P(dust fraction <= x) = 2 PhiN(2 theta sqrt(x / (1 - x))) - 1."""
    if theta <= 0.0:
        raise ValueError(f"theta must be positive, got {theta}")
    xs = np.asarray(x, dtype=float)
    out = np.empty_like(xs)
    inside = (xs > 0.0) & (xs < 1.0)
    out[xs <= 0.0] = 0.0
    out[xs >= 1.0] = 1.0
    z = 2.0 * theta * np.sqrt(xs[inside] / (1.0 - xs[inside]))
    out[inside] = 2.0 * ndtr(z) - 1.0
    if np.isscalar(x):
        return float(out)
    return out


@dataclass
class ThetaEstimate:
    """Left-endpoint estimate of the dust integral on one path.

    The integrand past theta_max is dropped; its mean is at most
    tail_mean_bound = 1 / theta_max because the dust mean decays like
    1 / theta^2 in the path time scale used here.
    """

    value: float
    tail_mean_bound: float
    theta_max: float
    grid_step: float


def estimate_theta_integral(rng: np.random.Generator, grid_step: float = 0.01,
                            theta_max: float = 40.0) -> ThetaEstimate:
    """Integrate the dust fraction along one subordinator path.

    tau accumulates independent stable increments so consecutive dust values
    share one path, and the integral is a left Riemann sum on
    [0, theta_max].  Path time is scaled so the integral has the standard
    Rayleigh law (density x exp(-x^2/2), mean sqrt(pi/2)): increments are
    (dtheta)^2 / (4 N^2), i.e. the dust at path time theta has the marginal
    law of sample_dust(theta / 2).  Integrating in sample_dust's own time
    scale gives half this variable in distribution; that halved variable is
    the actual limit of the collision count X / sqrt(2n) of the discrete
    chain (see prunesim.expected_collisions for its exact finite-n mean).
    The factor two between the conventions is the ratio of the mark
    intensity per unit length (2 alpha = 4) to unit-rate pruning.
    """
    if grid_step > 0.01 + 1e-15 or grid_step <= 0.0:
        raise ValueError(f"grid_step must lie in (0, 0.01], got {grid_step}")
    if theta_max < 20.0:
        raise ValueError(f"theta_max must be >= 20, got {theta_max}")
    m = int(round(theta_max / grid_step))
    nrm = rng.standard_normal(m)
    while True:
        zero = nrm == 0.0
        if not zero.any():
            break
        nrm[zero] = rng.standard_normal(int(zero.sum()))
    inc = (grid_step * grid_step) / (4.0 * nrm * nrm)
    tau = np.cumsum(inc)
    sigma = 1.0 / (1.0 + 4.0 * tau)
    # left endpoints: sigma(0) = 1, then sigma at theta_1 .. theta_{m-1}
    value = grid_step * (1.0 + float(sigma[:-1].sum()))
    return ThetaEstimate(value, 1.0 / theta_max, theta_max, grid_step)
