"""Seeded Monte-Carlo experiments and the verification harness.

Every check the package makes about its own distributions lives here as a
named experiment: a preset configuration, a runner that produces estimates
and test statistics, and fixed thresholds that decide pass/fail.  Reports
are plain JSON and reproducible: the same (config, seed) yields the same
report byte for byte, independent of the worker count, because every
replicate draws from its own derived stream (see rng.replicate_map).

Chi-square gates run at significance 0.001 with up to three attempts on
fresh derived seeds; the gate fails only when at least two attempts fall
below the significance level, which keeps the false-alarm rate of the whole
suite negligible without masking a real distributional bug.  Tolerance
gates (means, sup-distances, exact identities) run once.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass
from functools import partial
from typing import Callable, Mapping

import numpy as np

from . import crtsim, lambdasim, prunesim, specfun, stats, treecore
from .rng import derive_seed, derive_stream, replicate_map
from .specfun import PrecisionError

__all__ = [
    "ExperimentConfig",
    "StatReport",
    "EXPERIMENTS",
    "SUITES",
    "preset_config",
    "run_experiment",
    "verify",
    "REPORT_VERSION",
    "DEFAULT_SEED",
    "SIGNIFICANCE",
]

REPORT_VERSION = "0.1.0"
DEFAULT_SEED = 42
SIGNIFICANCE = 0.001
MAX_ATTEMPTS = 3

_BETA_MEASURE = specfun.LambdaMeasure.beta(1.5, 0.5)
_CRT_PARAMS = crtsim.CrtParams()


# ---------------------------------------------------------------------------
# configuration and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment invocation: which check, at what size, under which seed.

    ``overrides`` replaces entries of the experiment's threshold/knob table;
    unknown keys are rejected so typos cannot silently weaken a gate.
    """

    experiment: str
    n: int
    replicates: int
    seed: int = DEFAULT_SEED
    overrides: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; "
                f"choose from {sorted(EXPERIMENTS)}"
            )
        lo, hi = _N_RANGE[self.experiment]
        if not (lo <= self.n <= hi):
            raise ValueError(
                f"{self.experiment} requires n in [{lo}, {hi}], got {self.n}"
            )

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "n": self.n,
            "replicates": self.replicates,
            "seed": self.seed,
            "overrides": dict(self.overrides) if self.overrides else {},
        }


def _plain(obj):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class StatReport:
    """Machine-readable outcome of one experiment.

    ``passed`` is a pure function of the recorded statistics and thresholds;
    the report can be re-judged offline.  ``canonical_json`` drops the only
    non-reproducible field (wall-clock runtime) and is what reproducibility
    tests compare.
    """

    experiment: str
    version: str
    config: dict
    estimates: dict
    statistics: dict
    thresholds: dict
    passed: bool
    cause: str | None
    runtime_s: float
    seed: int

    def _payload(self) -> dict:
        return {
            "experiment": self.experiment,
            "version": self.version,
            "config": _plain(self.config),
            "estimates": _plain(self.estimates),
            "statistics": _plain(self.statistics),
            "thresholds": _plain(self.thresholds),
            "pass": bool(self.passed),
            "cause": self.cause,
            "runtime_s": float(self.runtime_s),
            "seed": int(self.seed),
        }

    def to_json(self) -> str:
        return json.dumps(self._payload(), sort_keys=True)

    def canonical_json(self) -> str:
        payload = self._payload()
        del payload["runtime_s"]
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StatReport":
        d = json.loads(text)
        return cls(
            experiment=d["experiment"],
            version=d["version"],
            config=d["config"],
            estimates=d["estimates"],
            statistics=d["statistics"],
            thresholds=d["thresholds"],
            passed=d["pass"],
            cause=d.get("cause"),
            runtime_s=d.get("runtime_s", 0.0),
            seed=d["seed"],
        )


def _thresholds(config: ExperimentConfig, **defaults: float) -> dict:
    """Threshold/knob table for a runner, with validated overrides applied."""
    table = dict(defaults)
    for key, value in (config.overrides or {}).items():
        if key not in table:
            raise ValueError(
                f"unknown override {key!r} for {config.experiment}; "
                f"known keys: {sorted(table)}"
            )
        table[key] = float(value)
    return table


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _chi_gate(attempt: Callable[[int], stats.ChiSquareResult],
              significance: float) -> tuple[bool, list[stats.ChiSquareResult]]:
    """Majority-of-three retry policy for a chi-square gate.

    ``attempt(i)`` runs the i-th independently seeded attempt.  A clean first
    pass settles the gate; otherwise attempts continue until two failures
    (gate fails) or the third attempt resolves the tie.
    """
    results: list[stats.ChiSquareResult] = []
    failures = 0
    for i in range(MAX_ATTEMPTS):
        res = attempt(i)
        results.append(res)
        if res.pvalue < significance:
            failures += 1
        if failures == 0 or failures >= 2:
            break
    return failures < 2, results


def _gate_stats(results: list[stats.ChiSquareResult]) -> dict:
    return {
        "attempt_pvalues": [r.pvalue for r in results],
        "attempt_statistics": [r.statistic for r in results],
        "attempt_dof": [r.dof for r in results],
    }


# ---------------------------------------------------------------------------
# per-replicate workers (module level so worker pools can pickle them)
# ---------------------------------------------------------------------------

def _rep_tree_code(n: int, _i: int, rng: np.random.Generator) -> str:
    return treecore.encode(treecore.sample_uniform(n, rng))


def _rep_pair_snapshot(n: int, _i: int, rng: np.random.Generator) -> str | None:
    k, tree = prunesim.first_merger_snapshot(n, rng)
    return treecore.encode(tree) if k == 2 else None


def _rep_merger_pair_prune(n: int, _i: int, rng: np.random.Generator) -> tuple[int, int]:
    log = prunesim.run_chain(n, rng, track_blocks=False)
    k1 = log.events[0].merged_block_count
    k2 = log.events[1].merged_block_count if len(log.events) > 1 else 0
    return k1, k2


def _rep_merger_pair_lambda(n: int, table: lambdasim.RateTable,
                            _i: int, rng: np.random.Generator) -> tuple[int, int]:
    log = lambdasim.run_lambda_chain(n, table, rng)
    k1 = log.events[0].merged_block_count
    k2 = log.events[1].merged_block_count if len(log.events) > 1 else 0
    return k1, k2


def _rep_collisions(n: int, _i: int, rng: np.random.Generator) -> int:
    return prunesim.chain_summary(n, rng).collisions


def _rep_last_event(n: int, _i: int, rng: np.random.Generator) -> tuple[int, int]:
    s = prunesim.chain_summary(n, rng)
    return s.last_merged, s.last_singletons


def _rep_crt_rate(n: int, _i: int, rng: np.random.Generator) -> float:
    tree = crtsim.sample_reduced_tree(n, rng, with_blocks=False)
    return crtsim.coalescence_rate(tree, _CRT_PARAMS)


def _rep_root_edge(n: int, _i: int, rng: np.random.Generator) -> float:
    tree = crtsim.sample_reduced_tree(n, rng, with_blocks=False)
    return float(tree.lengths[tree.shape.root])


def _rep_first_edge(n: int, _i: int, rng: np.random.Generator) -> int:
    return crtsim.sample_first_marked_edge(n, rng)[0]


def _rep_uv(n: int, _i: int, rng: np.random.Generator) -> tuple[int, int]:
    s = crtsim.sample_uvw(n, _CRT_PARAMS, rng)
    return s.U, s.V


def _rep_w(n: int, _i: int, rng: np.random.Generator) -> int:
    return crtsim.sample_uvw(n, _CRT_PARAMS, rng).W


def _rep_theta(grid_step: float, theta_max: float,
               _i: int, rng: np.random.Generator) -> float:
    return crtsim.estimate_theta_integral(rng, grid_step=grid_step,
                                          theta_max=theta_max).value


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------
#
# A runner returns (estimates, statistics, thresholds, passed, cause).
# run_experiment adds timing, error trapping, and the report envelope.

_EXP_RUNNERS: dict[str, Callable] = {}


def _experiment(name: str):
    def register(fn):
        _EXP_RUNNERS[name] = fn
        return fn
    return register


@_experiment("rates")
def _run_rates(config: ExperimentConfig, workers: int):
    """Merger-rate identities for the sqrt(u/(1-u)) measure, exact arithmetic.

    For every 2 <= k <= n the quadrature rate must match the closed beta-
    function form, and the binomially weighted row sum must match the closed
    total rate.
    """
    thr = _thresholds(config, quad_abs=1e-8, total_rel=1e-10)
    max_quad = 0.0
    max_total = 0.0
    for n in range(2, config.n + 1):
        total = 0.0
        for k in range(2, n + 1):
            closed = specfun.rate_nk(n, k)
            quad = specfun.rate_bk_general(_BETA_MEASURE, n, k)
            max_quad = max(max_quad, abs(quad - closed))
            total += math.comb(n, k) * closed
        ref = specfun.rate_total(n)
        max_total = max(max_total, abs(total - ref) / ref)
    estimates = {
        "max_quadrature_abs_error": max_quad,
        "max_total_rel_error": max_total,
    }
    passed = max_quad <= thr["quad_abs"] and max_total <= thr["total_rel"]
    return estimates, dict(estimates), thr, passed, None


@_experiment("tree-counts")
def _run_tree_counts(config: ExperimentConfig, workers: int):
    """Exhaustive tree enumeration sizes against the closed product formula."""
    thr = _thresholds(config)
    counts = [len(treecore.enumerate_all(m)) for m in range(1, config.n + 1)]
    expected = [specfun.catalan_trees(m) for m in range(1, config.n + 1)]
    statistics = {"counts": counts, "expected": expected}
    passed = counts == expected
    return {"max_n": float(config.n)}, statistics, thr, passed, None


@_experiment("tree-uniformity")
def _run_tree_uniformity(config: ExperimentConfig, workers: int):
    """Chi-square of the tree sampler against uniformity over all shapes."""
    thr = _thresholds(config, significance=SIGNIFICANCE)
    codes = sorted(treecore.encode(t) for t in treecore.enumerate_all(config.n))
    probs = [1.0 / len(codes)] * len(codes)

    def attempt(i: int) -> stats.ChiSquareResult:
        drawn = replicate_map(partial(_rep_tree_code, config.n),
                              config.replicates,
                              derive_seed(config.seed, 0, i), workers)
        tally = Counter(drawn)
        return stats.chi_square([tally.get(c, 0) for c in codes], probs)

    passed, results = _chi_gate(attempt, thr["significance"])
    statistics = _gate_stats(results)
    statistics["n_codes"] = len(codes)
    return {"n_codes": float(len(codes))}, statistics, thr, passed, None


@_experiment("equivalence")
def _run_equivalence(config: ExperimentConfig, workers: int):
    """Joint (first, second) merger sizes: pruning chain vs rate-table chain.

    The two constructions never share code beyond the event-log record, so a
    homogeneity pass here is evidence that the pruning chain really is the
    coalescent with the closed-form rates.
    """
    thr = _thresholds(config, significance=SIGNIFICANCE)
    table = lambdasim.build_table(_BETA_MEASURE, config.n)

    def attempt(i: int) -> stats.ChiSquareResult:
        a = replicate_map(partial(_rep_merger_pair_prune, config.n),
                          config.replicates,
                          derive_seed(config.seed, 1, i), workers)
        b = replicate_map(partial(_rep_merger_pair_lambda, config.n, table),
                          config.replicates,
                          derive_seed(config.seed, 2, i), workers)
        cells = sorted(set(a) | set(b))
        ca = Counter(a)
        cb = Counter(b)
        return stats.chi_square_two_sample([ca.get(c, 0) for c in cells],
                                           [cb.get(c, 0) for c in cells])

    passed, results = _chi_gate(attempt, thr["significance"])
    return {}, _gate_stats(results), thr, passed, None


@_experiment("first-merger")
def _run_first_merger(config: ExperimentConfig, workers: int):
    """Conditioned on a pair merging first, the merged tree is uniform.

    Draws first-merger snapshots, keeps the pair-merger ones, and tests the
    canonical codes against the uniform law on all shapes with n-1 leaves.
    """
    thr = _thresholds(config, significance=SIGNIFICANCE, min_conditioned=60_000)
    codes = sorted(treecore.encode(t)
                   for t in treecore.enumerate_all(config.n - 1))
    probs = [1.0 / len(codes)] * len(codes)
    conditioned: list[int] = []

    def attempt(i: int) -> stats.ChiSquareResult:
        drawn = replicate_map(partial(_rep_pair_snapshot, config.n),
                              config.replicates,
                              derive_seed(config.seed, 3, i), workers)
        kept = [c for c in drawn if c is not None]
        conditioned.append(len(kept))
        tally = Counter(kept)
        return stats.chi_square([tally.get(c, 0) for c in codes], probs)

    passed, results = _chi_gate(attempt, thr["significance"])
    statistics = _gate_stats(results)
    statistics["conditioned"] = conditioned
    passed = passed and min(conditioned) >= thr["min_conditioned"]
    estimates = {"conditioned_fraction": conditioned[0] / config.replicates}
    return estimates, statistics, thr, passed, None


@_experiment("rayleigh")
def _run_rayleigh(config: ExperimentConfig, workers: int):
    """Collision-count scaling limit, gated against the documented targets.

    The documented gates ask X/sqrt(2n) to be standard Rayleigh and
    mean(X/sqrt(n)) to approach sqrt(pi).  The exact recursion over the
    merger rates (prunesim.expected_collisions) proves the true constant is
    sqrt(pi)/2, half the documented one, so those gates cannot pass for a
    correct simulator; the report therefore carries three diagnostics to
    separate "wrong target" from "wrong chain": the Monte-Carlo mean against
    the exact recursion (z-score), and the mean/KS checks at the corrected
    scale X/sqrt(n/2), which do pass.
    """
    thr = _thresholds(config, ks=0.05, mean_rel=0.05)
    xs = np.array(replicate_map(partial(_rep_collisions, config.n),
                                config.replicates,
                                derive_seed(config.seed, 4, 0), workers),
                  dtype=float)
    ks = stats.ks_statistic(xs / math.sqrt(2.0 * config.n), stats.rayleigh_cdf)
    mean, se = _mean_se(xs / math.sqrt(config.n))
    target = math.sqrt(math.pi)
    mean_rel = abs(mean - target) / target

    exact = prunesim.expected_collisions(config.n) / math.sqrt(config.n)
    z_exact = abs(mean - exact) / se
    half_target = 0.5 * math.sqrt(math.pi)
    mean_rel_half = abs(mean - half_target) / half_target
    ks_half = stats.ks_statistic(xs / math.sqrt(0.5 * config.n),
                                 stats.rayleigh_cdf)

    estimates = {
        "mean_scaled": mean,
        "mean_scaled_se": se,
        "mean_scaled_target": target,
        "mean_scaled_exact": exact,
        "ks_distance": ks,
    }
    statistics = {
        "ks": ks,
        "mean_rel_error": mean_rel,
        "z_vs_exact_recursion": z_exact,
        "mean_rel_error_half_target": mean_rel_half,
        "ks_corrected_scale": ks_half,
    }
    passed = ks < thr["ks"] and mean_rel < thr["mean_rel"]
    cause = None
    if not passed:
        cause = (
            f"documented scaling constant sqrt(pi) is 2x the exact one: the "
            f"rate recursion gives mean {exact:.4f}*sqrt(n), the simulation "
            f"matches it to {z_exact:.1f} sigma, and the corrected-scale "
            f"checks pass (mean rel {mean_rel_half:.3f}, KS {ks_half:.3f})"
        )
    return estimates, statistics, thr, passed, cause


# limit values for the final-merger statistics
_P_E0 = 1.0 - 2.0 * math.log(1.5)
_P_E1 = 1.0 / 3.0
_P_B2 = 5.0 / 12.0
_P_D1 = math.log(4.0) - 1.0
_P_W0 = 2.0 * math.log(2.0) - 1.0


@_experiment("last-event")
def _run_last_event(config: ExperimentConfig, workers: int):
    """Final-merger statistics against their exact limit probabilities."""
    thr = _thresholds(config, prob_abs=0.02)
    pairs = replicate_map(partial(_rep_last_event, config.n),
                          config.replicates,
                          derive_seed(config.seed, 5, 0), workers)
    b = np.array([p[0] for p in pairs])
    e = np.array([p[1] for p in pairs])
    checks = {
        "p_e0": (float(np.mean(e == 0)), _P_E0),
        "p_e1": (float(np.mean(e == 1)), _P_E1),
        "p_b2": (float(np.mean(b == 2)), _P_B2),
        "p_diff1": (float(np.mean(b - e == 1)), _P_D1),
    }
    estimates = {}
    statistics = {}
    passed = True
    for name, (est, target) in checks.items():
        se = math.sqrt(max(est * (1.0 - est), 1e-12) / config.replicates)
        estimates[name] = est
        estimates[name + "_se"] = se
        estimates[name + "_target"] = target
        statistics[name + "_abs_error"] = abs(est - target)
        passed = passed and abs(est - target) < thr["prob_abs"]
    return estimates, statistics, thr, passed, None


# frozen low-order coefficients of the final-merger marginals
_COEFF_TARGETS = [
    ("E", 0, _P_E0),
    ("E", 1, 1.0 / 3.0),
    ("E", 2, 1.0 / 9.0),
    ("B-E", 1, _P_D1),
    ("B-E", 2, 1.0 / 3.0),
    ("B", 2, _P_B2),
]


@_experiment("gf-coefficients")
def _run_gf_coefficients(config: ExperimentConfig, workers: int):
    """Contour extraction of the final-merger marginals vs exact values.

    Also settles which marginal owns the order-3 coefficient 23/160: the
    E-marginal value is 19/324, the B-marginal value is exactly 23/160, so
    a label that attaches 23/160 to E is a typo for B.  Both coefficients
    are reported.
    """
    thr = _thresholds(config, coeff_tol=1e-8, corner_tol=1e-12,
                      grid_tol=1e-12, radius=0.5)
    kmax = config.n
    coeffs = {
        which: specfun.pgf_extract(specfun.marginal_pgf(which), kmax,
                                   radius=thr["radius"], tol=thr["coeff_tol"])[0]
        for which in ("E", "B-E", "B")
    }
    estimates = {}
    statistics = {}
    passed = True
    worst = 0.0
    for which, k, target in _COEFF_TARGETS:
        got = float(coeffs[which][k])
        err = abs(got - target)
        worst = max(worst, err)
        estimates[f"p_{which}_{k}"] = got
        passed = passed and err <= thr["coeff_tol"]
    statistics["max_coeff_error"] = worst

    corner_phi = abs(specfun.gf_phi(1.0, 1.0) - 1.0)
    corner_psi = abs(specfun.gf_psi(1.0, 1.0, 1.0) - 1.0)
    statistics["corner_phi_error"] = corner_phi
    statistics["corner_psi_error"] = corner_psi
    passed = passed and corner_phi <= thr["corner_tol"]
    passed = passed and corner_psi <= thr["corner_tol"]

    grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    grid_dev = max(
        abs(specfun.gf_phi(r, s) - specfun.gf_psi(r, s, s))
        for r in grid for s in grid
    )
    statistics["grid_identity_max_dev"] = grid_dev
    passed = passed and grid_dev <= thr["grid_tol"]

    # resolve the 23/160 label: exactly one order-3 coefficient matches it
    p_e3 = float(coeffs["E"][3])
    p_b3 = float(coeffs["B"][3])
    estimates["p_E_3"] = p_e3
    estimates["p_B_3"] = p_b3
    e3_matches = abs(p_e3 - 23.0 / 160.0) <= thr["coeff_tol"]
    b3_matches = abs(p_b3 - 23.0 / 160.0) <= thr["coeff_tol"]
    owner = "B" if (b3_matches and not e3_matches) else (
        "E" if (e3_matches and not b3_matches) else "ambiguous")
    statistics["owner_of_23_160"] = owner
    statistics["p_E_3_vs_19_324"] = abs(p_e3 - 19.0 / 324.0)
    passed = passed and owner == "B"
    return estimates, statistics, thr, passed, None


_IDENTITY_GRID = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0]


@_experiment("gf-identities")
def _run_gf_identities(config: ExperimentConfig, workers: int):
    """Closed forms vs their defining integrals, across parameter grids."""
    thr = _thresholds(config, integral_tol=1e-7, pow32_tol=1e-8,
                      laplace_tol=1e-6, reduction_tol=1e-10)
    pairs = [(a, b) for a in _IDENTITY_GRID for b in _IDENTITY_GRID
             if (a, b) != (0.0, 0.0)]
    dev_j = max(abs(specfun.quad_J(a, b) - specfun.I_func(a, b))
                for a, b in pairs)
    dev_d = max(abs(specfun.quad_delta(a, b) - specfun.delta0(a, b))
                for a, b in pairs)
    dev_pow_theta = max(
        abs(specfun.quad_pow32_theta(a, b) - specfun.pow32_theta_closed(a, b))
        for a, b in pairs
    )
    dev_pow_unit = max(
        abs(specfun.quad_pow32_unit(a, b) - specfun.pow32_unit_closed(a, b))
        for a, b in pairs if b > 0.0
    )
    dev_laplace = max(
        abs(specfun.laplace_exponent_quadrature(lam) - specfun.laplace_exponent(lam))
        for lam in (0.5, 1.0, 2.0, 5.0)
    )
    # all-ones reduction of the pruning contraction, randomized parameters
    rng = derive_stream(config.seed, 9)
    dev_reduction = 0.0
    for _ in range(5):
        theta = 0.1 + 3.0 * rng.random()
        lam = 0.1 + 4.0 * rng.random()
        alpha = 0.5 + 2.0 * rng.random()
        coeffs = specfun.delta_coeffs(theta, lam, alpha, 1.0, 1.0, 1.0)
        dev_reduction = max(
            dev_reduction,
            abs(specfun.f_theta(1.0, coeffs) - math.sqrt(lam / alpha)),
        )
    statistics = {
        "max_J_vs_I": dev_j,
        "max_delta_quad_vs_closed": dev_d,
        "max_pow32_theta_dev": dev_pow_theta,
        "max_pow32_unit_dev": dev_pow_unit,
        "max_laplace_dev": dev_laplace,
        "max_all_ones_dev": dev_reduction,
    }
    passed = (
        dev_j <= thr["integral_tol"]
        and dev_d <= thr["integral_tol"]
        and dev_pow_theta <= thr["pow32_tol"]
        and dev_pow_unit <= thr["pow32_tol"]
        and dev_laplace <= thr["laplace_tol"]
        and dev_reduction <= thr["reduction_tol"]
    )
    return dict(statistics), statistics, thr, passed, None


@_experiment("crt-hn")
def _run_crt_hn(config: ExperimentConfig, workers: int):
    """Reduced-tree length laws: total merger rate, root edge, first mark."""
    thr = _thresholds(config, rate_rel=0.02, root_rel=0.01,
                      significance=SIGNIFICANCE)
    estimates = {}
    statistics = {}
    passed = True

    panel = [m for m in (3, 10, 50) if m <= config.n] or [config.n]
    for j, m in enumerate(panel):
        vals = np.array(replicate_map(partial(_rep_crt_rate, m),
                                      config.replicates,
                                      derive_seed(config.seed, 10, j), workers))
        mean, se = _mean_se(vals)
        target = math.sqrt(2.0 / math.pi) * specfun.rate_total(m)
        rel = abs(mean - target) / target
        estimates[f"mean_rate_n{m}"] = mean
        estimates[f"mean_rate_n{m}_se"] = se
        estimates[f"mean_rate_n{m}_target"] = target
        statistics[f"rate_rel_error_n{m}"] = rel
        passed = passed and rel < thr["rate_rel"]

    for j, m in enumerate([m for m in (1, 5) if m <= config.n] or [1]):
        vals = np.array(replicate_map(partial(_rep_root_edge, m),
                                      4 * config.replicates,
                                      derive_seed(config.seed, 11, j), workers))
        mean, se = _mean_se(vals)
        target = math.exp(specfun.log_gamma(m - 0.5)
                          - specfun.log_gamma(m)) / (2.0 * math.sqrt(2.0))
        rel = abs(mean - target) / target
        estimates[f"mean_root_edge_n{m}"] = mean
        estimates[f"mean_root_edge_n{m}_se"] = se
        estimates[f"mean_root_edge_n{m}_target"] = target
        statistics[f"root_edge_rel_error_n{m}"] = rel
        passed = passed and rel < thr["root_rel"]

    edge_n = min(5, config.n)
    n_edges = 2 * edge_n - 1
    probs = [1.0 / n_edges] * n_edges

    def attempt(i: int) -> stats.ChiSquareResult:
        drawn = replicate_map(partial(_rep_first_edge, edge_n),
                              config.replicates,
                              derive_seed(config.seed, 12, i), workers)
        tally = Counter(drawn)
        return stats.chi_square([tally.get(v, 0) for v in range(n_edges)], probs)

    edge_ok, results = _chi_gate(attempt, thr["significance"])
    statistics.update({"first_edge_" + k: v
                       for k, v in _gate_stats(results).items()})
    passed = passed and edge_ok
    return estimates, statistics, thr, passed, None


# joint (U, V) and (B, E) comparison cells: {2..8} x {0..8} plus overflow
_UV_CELLS = [(u, v) for u in range(2, 9) for v in range(0, 9)]
_UV_INDEX = {c: i for i, c in enumerate(_UV_CELLS)}


def _uv_tally(pairs) -> np.ndarray:
    counts = np.zeros(len(_UV_CELLS) + 1)
    for pair in pairs:
        counts[_UV_INDEX.get(pair, len(_UV_CELLS))] += 1.0
    return counts


@_experiment("crt-uvw")
def _run_crt_uvw(config: ExperimentConfig, workers: int):
    """Continuum pruning vs discrete chain: joint block counts must agree.

    The joint (U, V) law from the marked reduced tree is compared with the
    final-merger (B, E) law from the discrete chain at the same n; the
    singleton-free probability P(W=0) is checked at 4n against its limit.
    """
    thr = _thresholds(config, significance=SIGNIFICANCE, w0_abs=0.02)

    def attempt(i: int) -> stats.ChiSquareResult:
        uv = replicate_map(partial(_rep_uv, config.n), config.replicates,
                           derive_seed(config.seed, 20, i), workers)
        be = replicate_map(partial(_rep_last_event, config.n),
                           config.replicates,
                           derive_seed(config.seed, 21, i), workers)
        return stats.chi_square_two_sample(
            _uv_tally((u, v) for u, v in uv),
            _uv_tally((b, e) for b, e in be),
        )

    joint_ok, results = _chi_gate(attempt, thr["significance"])
    statistics = _gate_stats(results)

    w_n = 4 * config.n
    w = np.array(replicate_map(partial(_rep_w, w_n), config.replicates,
                               derive_seed(config.seed, 22, 0), workers))
    p_w0 = float(np.mean(w == 0))
    se = math.sqrt(p_w0 * (1.0 - p_w0) / config.replicates)
    estimates = {
        "p_w0": p_w0,
        "p_w0_se": se,
        "p_w0_target": _P_W0,
        "p_w0_n": float(w_n),
    }
    statistics["p_w0_abs_error"] = abs(p_w0 - _P_W0)
    passed = joint_ok and abs(p_w0 - _P_W0) < thr["w0_abs"]
    return estimates, statistics, thr, passed, None


@_experiment("dust")
def _run_dust(config: ExperimentConfig, workers: int):
    """Single-depth dust fraction against its closed-form CDF."""
    thr = _thresholds(config, ks=0.01, theta=0.5)
    theta = thr["theta"]
    draws = crtsim.sample_dust_batch(theta, config.replicates,
                                     derive_stream(config.seed, 30))
    ks = stats.ks_statistic(draws, lambda x: crtsim.dust_cdf(theta, x))
    estimates = {"ks_distance": ks, "theta": theta}
    passed = ks < thr["ks"]
    return estimates, {"ks": ks}, thr, passed, None


@_experiment("theta-integral")
def _run_theta_integral(config: ExperimentConfig, workers: int):
    """Integrated dust paths against the Rayleigh collision limit."""
    thr = _thresholds(config, mean_rel=0.05, ks=0.05,
                      grid_step=0.01, theta_max=20.0)
    vals = np.array(replicate_map(
        partial(_rep_theta, thr["grid_step"], thr["theta_max"]),
        config.replicates, derive_seed(config.seed, 31, 0), workers))
    mean, se = _mean_se(vals)
    target = math.sqrt(math.pi / 2.0)
    mean_rel = abs(mean - target) / target
    ks = stats.ks_statistic(vals, stats.rayleigh_cdf)
    estimates = {
        "mean": mean,
        "mean_se": se,
        "mean_target": target,
        "ks_distance": ks,
        "tail_mean_bound": 1.0 / thr["theta_max"],
    }
    statistics = {"mean_rel_error": mean_rel, "ks": ks}
    passed = mean_rel < thr["mean_rel"] and ks < thr["ks"]
    return estimates, statistics, thr, passed, None


@_experiment("stochastic-order")
def _run_stochastic_order(config: ExperimentConfig, workers: int):
    """Coefficient-level domination between the final-merger marginals.

    Checks that the partial sums of P(B-E-1 = j) dominate those of
    P(E = j) up to order n, i.e. B-E-1 is stochastically below E.  Two
    extraction radii cross-validate every coefficient first.
    """
    thr = _thresholds(config, order_tol=1e-8, cross_tol=1e-9,
                      radius_lo=0.8, radius_hi=0.9)
    m = config.n
    p_e = {}
    p_d = {}
    for radius in (thr["radius_lo"], thr["radius_hi"]):
        p_e[radius], _ = specfun.pgf_extract(specfun.marginal_pgf("E"),
                                             m, radius=radius, tol=None)
        p_d[radius], _ = specfun.pgf_extract(specfun.marginal_pgf("B-E"),
                                             m + 1, radius=radius, tol=None)
    cross = max(
        float(np.max(np.abs(p_e[thr["radius_lo"]] - p_e[thr["radius_hi"]]))),
        float(np.max(np.abs(p_d[thr["radius_lo"]] - p_d[thr["radius_hi"]]))),
    )
    cum_e = np.cumsum(p_e[thr["radius_lo"]][: m + 1])
    cum_d = np.cumsum(p_d[thr["radius_lo"]][1: m + 2])
    margins = cum_d - cum_e
    min_margin = float(margins.min())
    statistics = {
        "cross_radius_dev": cross,
        "min_margin": min_margin,
        "argmin_margin": int(margins.argmin()),
    }
    estimates = {"min_margin": min_margin, "cross_radius_dev": cross}
    passed = cross <= thr["cross_tol"] and min_margin >= -thr["order_tol"]
    return estimates, statistics, thr, passed, None


# ---------------------------------------------------------------------------
# registry, presets, and the verification suite
# ---------------------------------------------------------------------------

# documented n ranges (ExperimentConfig invariant)
_N_RANGE: dict[str, tuple[int, int]] = {
    "rates": (2, 60),
    "tree-counts": (1, 6),
    "tree-uniformity": (3, 5),
    "equivalence": (3, 64),
    "first-merger": (3, 7),
    "rayleigh": (50, 1_000_000),
    "last-event": (50, 1_000_000),
    "gf-coefficients": (4, 16),
    "gf-identities": (1, 1),
    "crt-hn": (2, 200),
    "crt-uvw": (2, 2000),
    "dust": (1, 1),
    "theta-integral": (1, 1),
    "stochastic-order": (1, 60),
}

# preset sizes: one per verification check, in suite order
_PRESETS: dict[str, dict] = {
    "rates": dict(n=12, replicates=1),
    "tree-counts": dict(n=6, replicates=1),
    "tree-uniformity": dict(n=4, replicates=120_000),
    "equivalence": dict(n=10, replicates=100_000),
    "first-merger": dict(n=4, replicates=165_000),
    "rayleigh": dict(n=10_000, replicates=20_000),
    "last-event": dict(n=2000, replicates=100_000),
    "gf-coefficients": dict(n=8, replicates=1),
    "gf-identities": dict(n=1, replicates=1),
    "crt-hn": dict(n=50, replicates=100_000),
    "crt-uvw": dict(n=500, replicates=100_000),
    "dust": dict(n=1, replicates=1_000_000),
    "theta-integral": dict(n=1, replicates=100_000),
    "stochastic-order": dict(n=50, replicates=1),
}

EXPERIMENTS = _PRESETS  # public name -> preset sizes; runners are internal

SUITES: dict[str, list[str]] = {
    "all": list(_PRESETS),
    "fast": [
        "rates", "tree-counts", "tree-uniformity", "first-merger",
        "gf-coefficients", "gf-identities", "dust", "theta-integral",
        "stochastic-order",
    ],
    "slow": ["equivalence", "rayleigh", "last-event", "crt-hn", "crt-uvw"],
}


def preset_config(name: str, seed: int = DEFAULT_SEED,
                  overrides: Mapping[str, float] | None = None) -> ExperimentConfig:
    """The shipped configuration for one named experiment."""
    if name not in _PRESETS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(_PRESETS)}")
    sizes = _PRESETS[name]
    return ExperimentConfig(experiment=name, n=sizes["n"],
                            replicates=sizes["replicates"], seed=seed,
                            overrides=overrides)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> StatReport:
    """Run one experiment and wrap the outcome in a StatReport.

    Precision failures inside the numerics surface as a failed report with
    the cause recorded, not as an exception.
    """
    runner = _EXP_RUNNERS[config.experiment]
    start = time.perf_counter()
    cause = None
    try:
        estimates, statistics, thresholds, passed, cause = runner(config, workers)
    except PrecisionError as exc:
        estimates, statistics, thresholds = {}, {}, {}
        passed = False
        cause = f"precision failure: {exc}"
    runtime = time.perf_counter() - start
    return StatReport(
        experiment=config.experiment,
        version=REPORT_VERSION,
        config=config.as_dict(),
        estimates=estimates,
        statistics=statistics,
        thresholds=thresholds,
        passed=passed,
        cause=cause,
        runtime_s=runtime,
        seed=config.seed,
    )


def verify(suite: str = "all", seed: int = DEFAULT_SEED, workers: int = 1,
           echo: Callable[[str], None] | None = print) -> list[StatReport]:
    """Run a named suite (or comma-separated experiment list) in sequence."""
    if suite in SUITES:
        names = SUITES[suite]
    else:
        names = [s.strip() for s in suite.split(",") if s.strip()]
        unknown = [s for s in names if s not in _PRESETS]
        if unknown:
            raise ValueError(f"unknown suite or experiments: {unknown}")
    reports = []
    for name in names:
        report = run_experiment(preset_config(name, seed=seed), workers=workers)
        reports.append(report)
        if echo is not None:
            status = "PASS" if report.passed else "FAIL"
            line = f"[{status}] {name:<16} {report.runtime_s:8.1f}s"
            if report.cause:
                line += f"  ({report.cause})"
            echo(line)
    if echo is not None:
        n_pass = sum(r.passed for r in reports)
        echo(f"{n_pass}/{len(reports)} experiments passed")
    return reports
