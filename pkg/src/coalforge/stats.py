"""Statistical test helpers for the simulation experiments.

Small, self-contained implementations so the pass/fail policy is explicit:

* Kolmogorov-Smirnov sup-distance against a reference CDF.
* One-sample chi-square goodness of fit with deterministic pooling of
  low-expectation cells.
* Two-sample chi-square homogeneity test on a shared binning.

Only the chi-square tail probability is delegated (regularized upper
incomplete gamma); everything that decides a gate lives here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaincc

__all__ = [
    "ChiSquareResult",
    "ks_statistic",
    "chi_square",
    "chi_square_two_sample",
    "pool_cells",
    "rayleigh_cdf",
]

# Cells with expected count below this are pooled into their neighbour so the
# chi-square null distribution is trustworthy.
MIN_EXPECTED = 5.0


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------

def ks_statistic(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup-distance between the empirical CDF of ``samples`` and ``cdf``.

    ``cdf`` is called once on the sorted sample array; a scalar-only callable
    works too (the result is broadcast through ``np.asarray``).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    try:
        f = np.asarray(cdf(x), dtype=float)
        if f.shape != x.shape:
            raise TypeError
    except TypeError:
        f = np.array([float(cdf(v)) for v in x])
    grid = np.arange(1, n + 1, dtype=float) / n
    d_plus = np.max(grid - f)
    d_minus = np.max(f - (grid - 1.0 / n))
    return float(max(d_plus, d_minus))


def rayleigh_cdf(x: np.ndarray) -> np.ndarray:
    """CDF of the standard Rayleigh law, density x*exp(-x^2/2) on x >= 0."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0.0, -np.expm1(-0.5 * x * x), 0.0)


# ---------------------------------------------------------------------------
# Chi-square
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChiSquareResult:
    """Outcome of a chi-square test after pooling."""

    statistic: float
    dof: int
    pvalue: float
    n_cells: int

    def passed(self, significance: float) -> bool:
        return self.pvalue >= significance


def pool_cells(observed: np.ndarray, expected: np.ndarray,
               min_expected: float = MIN_EXPECTED) -> tuple[np.ndarray, np.ndarray]:
    """Merge adjacent cells until every expected count reaches ``min_expected``.

    Deterministic left-to-right sweep: each cell accumulates into the current
    bucket, which closes once its expected mass is large enough.  A trailing
    underweight bucket is merged into the last closed one, so the output is a
    coarsening of the input binning that does not depend on the observations.
    """
    obs_out: list[float] = []
    exp_out: list[float] = []
    acc_o = 0.0
    acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += float(o)
        acc_e += float(e)
        if acc_e >= min_expected:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
            acc_o = 0.0
            acc_e = 0.0
    if acc_e > 0.0:
        if exp_out:
            obs_out[-1] += acc_o
            exp_out[-1] += acc_e
        else:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
    return np.array(obs_out), np.array(exp_out)


def chi_square(observed: Sequence[float], probs: Sequence[float],
               total: float | None = None, ddof: int = 0) -> ChiSquareResult:
    """Goodness-of-fit test of observed counts against cell probabilities.

    ``probs`` may sum to less than one; the remainder becomes an explicit
    overflow cell whose observed count is ``total - sum(observed)`` (so
    ``total``, the full sample size, is required in that case).  Cells are
    pooled (see :func:`pool_cells`) before the statistic is formed.  ``ddof``
    subtracts estimated-parameter degrees of freedom.
    """
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(probs, dtype=float)
    if obs.shape != p.shape:
        raise ValueError("observed and probs must have matching shapes")
    if np.any(p < 0.0):
        raise ValueError("cell probabilities must be nonnegative")
    total_p = float(p.sum())
    if total_p > 1.0 + 1e-9:
        raise ValueError("cell probabilities sum above one")
    if total_p < 1.0 - 1e-12:
        if total is None:
            raise ValueError("probs do not cover all outcomes; pass total")
        spill = float(total) - float(obs.sum())
        if spill < -1e-9:
            raise ValueError("total is smaller than the listed counts")
        obs = np.append(obs, max(spill, 0.0))
        p = np.append(p, 1.0 - total_p)
    if np.any((p == 0.0) & (obs > 0.0)):
        raise ValueError("zero expected mass in a nonempty cell")
    n = float(obs.sum())
    if n <= 0:
        raise ValueError("chi_square needs a positive total count")
    expected = n * p
    obs2, exp2 = pool_cells(obs, expected)
    if obs2.size < 2:
        raise ValueError("fewer than two cells survive pooling")
    stat = float(np.sum((obs2 - exp2) ** 2 / exp2))
    dof = obs2.size - 1 - ddof
    if dof < 1:
        raise ValueError("no degrees of freedom left after pooling")
    pvalue = float(gammaincc(dof / 2.0, stat / 2.0))
    return ChiSquareResult(statistic=stat, dof=dof, pvalue=pvalue, n_cells=obs2.size)


def chi_square_two_sample(counts_a: Sequence[float], counts_b: Sequence[float]) -> ChiSquareResult:
    """Homogeneity test: were the two count vectors drawn from one law?

    Cells are pooled on the *combined* expected counts so the coarsening is
    symmetric in the two samples.  Statistic is the usual 2 x k contingency
    chi-square with k-1 degrees of freedom after pooling.
    """
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("count vectors must have matching shapes")
    na = float(a.sum())
    nb = float(b.sum())
    if na <= 0 or nb <= 0:
        raise ValueError("both samples need positive totals")
    pooled = (a + b) / (na + nb)

    # pool on expected counts under homogeneity, smallest sample governs
    exp_a = na * pooled
    exp_b = nb * pooled
    exp_min = np.minimum(exp_a, exp_b)
    obs_out_a: list[float] = []
    obs_out_b: list[float] = []
    acc_a = 0.0
    acc_b = 0.0
    acc_m = 0.0
    for oa, ob, m in zip(a, b, exp_min):
        acc_a += float(oa)
        acc_b += float(ob)
        acc_m += float(m)
        if acc_m >= MIN_EXPECTED:
            obs_out_a.append(acc_a)
            obs_out_b.append(acc_b)
            acc_a = acc_b = acc_m = 0.0
    if acc_a + acc_b > 0.0 or acc_m > 0.0:
        if obs_out_a:
            obs_out_a[-1] += acc_a
            obs_out_b[-1] += acc_b
        else:
            obs_out_a.append(acc_a)
            obs_out_b.append(acc_b)
    a2 = np.array(obs_out_a)
    b2 = np.array(obs_out_b)
    if a2.size < 2:
        raise ValueError("fewer than two cells survive pooling")
    tot = a2 + b2
    ea = na * tot / (na + nb)
    eb = nb * tot / (na + nb)
    stat = float(np.sum((a2 - ea) ** 2 / ea) + np.sum((b2 - eb) ** 2 / eb))
    dof = a2.size - 1
    pvalue = float(gammaincc(dof / 2.0, stat / 2.0))
    return ChiSquareResult(statistic=stat, dof=dof, pvalue=pvalue, n_cells=a2.size)
