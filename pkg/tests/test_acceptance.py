"""End-to-end verification gates, one test per shipped criterion.

Each test runs the corresponding experiment preset (cached, so shared
sub-results are computed once), asserts its gate at the pinned tolerance,
and registers a single PASS/FAIL summary line.  Runtimes are reported
against the documented desk-scale caps but not asserted, since they depend
on the host.

Criterion 6 is special: its documented scaling constant sqrt(pi) is twice
the value implied by the merger rates that criteria 1 and 4 pin down (the
exact recursion in prunesim.expected_collisions gives sqrt(pi)/2).  The
experiment gates against the documented targets and honestly fails; this
test asserts that the failure is reported, that the simulation agrees with
the exact recursion, and that the corrected-scale diagnostics pass.  The
registered line for criterion 6 therefore reads FAIL while the test itself
stays green.
"""

import math

from coalforge import experiments

import conftest

_CACHE: dict[str, experiments.StatReport] = {}

# documented desk-scale runtime caps in seconds, per criterion
_CAPS = {1: 10, 2: 30, 3: 10, 4: 120, 5: 60, 6: 900, 7: 900, 8: 5,
         9: 30, 10: 300, 11: 1200, 12: 600, 13: 5}


def _report(name: str) -> experiments.StatReport:
    if name not in _CACHE:
        _CACHE[name] = experiments.run_experiment(experiments.preset_config(name))
    return _CACHE[name]


def _register(number: int, title: str, ok: bool, detail: str, runtime: float) -> None:
    flag = "PASS" if ok else "FAIL"
    line = (f"[{flag}] criterion {number:02d} {title}: {detail} "
            f"({runtime:.1f}s, cap {_CAPS[number]}s)")
    conftest.record_criterion(number, line)
    print(line)


def test_criterion_01_rates_exact():
    r = _report("rates")
    quad = r.estimates["max_quadrature_abs_error"]
    tot = r.estimates["max_total_rel_error"]
    _register(1, "merger-rate identities", r.passed,
              f"max quadrature abs err {quad:.2e} <= 1e-8, "
              f"max total rel err {tot:.2e} <= 1e-10, 2<=k<=n<=12", r.runtime_s)
    assert r.thresholds["quad_abs"] == 1e-8
    assert r.thresholds["total_rel"] == 1e-10
    assert r.config["n"] == 12
    assert quad <= 1e-8
    assert tot <= 1e-10
    assert r.passed


def test_criterion_02_tree_counts_exact():
    r = _report("tree-counts")
    counts = r.statistics["counts"]
    _register(2, "tree enumeration counts", r.passed,
              f"sizes {counts} match (2n-2)!/(n-1)! for n<=6", r.runtime_s)
    assert counts == [1, 2, 12, 120, 1680, 30240]
    assert r.passed


def test_criterion_03_sampler_uniformity():
    r = _report("tree-uniformity")
    pvals = r.statistics["attempt_pvalues"]
    _register(3, "sampler uniformity over 120 shapes", r.passed,
              f"chi-square p-values {['%.3f' % p for p in pvals]} at 1.2e5 draws, "
              f"significance 0.001", r.runtime_s)
    assert r.statistics["n_codes"] == 120
    assert r.config["replicates"] == 120_000
    assert r.thresholds["significance"] == 0.001
    assert r.passed


def test_criterion_04_jump_chain_equivalence():
    r = _report("equivalence")
    pvals = r.statistics["attempt_pvalues"]
    _register(4, "pruning vs rate-table chain at n=10", r.passed,
              f"joint (k1, k2) homogeneity p-values {['%.3f' % p for p in pvals]}, "
              f"1e5 runs each, significance 0.001", r.runtime_s)
    assert r.config["n"] == 10
    assert r.config["replicates"] == 100_000
    assert r.passed


def test_criterion_05_post_merger_uniformity():
    r = _report("first-merger")
    pvals = r.statistics["attempt_pvalues"]
    conditioned = r.statistics["conditioned"]
    _register(5, "post-pair-merger tree uniformity", r.passed,
              f"12 codes, conditioned samples {conditioned} (>= 60000), "
              f"p-values {['%.3f' % p for p in pvals]}", r.runtime_s)
    assert r.config["n"] == 4
    assert min(conditioned) >= 60_000
    assert r.passed


def test_criterion_06_collision_scaling_documented_targets_fail_honestly():
    r = _report("rayleigh")
    s = r.statistics
    detail = (
        f"stated gates MISS by design of the target, not the chain: "
        f"KS(X/sqrt(2n)) {s['ks']:.3f} !< 0.05, "
        f"mean rel err vs sqrt(pi) {s['mean_rel_error']:.3f} !< 0.05; "
        f"exact recursion agrees with the run ({s['z_vs_exact_recursion']:.2f} sigma), "
        f"corrected scale passes (mean rel {s['mean_rel_error_half_target']:.3f}, "
        f"KS {s['ks_corrected_scale']:.3f})"
    )
    _register(6, "collision-count scaling", r.passed, detail, r.runtime_s)
    # the documented gates must fail decisively (factor-2 constant)...
    assert r.passed is False
    assert s["ks"] > 0.05
    assert s["mean_rel_error"] > 0.05
    assert r.cause is not None and "rate recursion" in r.cause
    # ...while the simulator itself is vindicated by the exact recursion
    assert s["z_vs_exact_recursion"] < 4.0
    assert s["mean_rel_error_half_target"] < 0.05
    assert s["ks_corrected_scale"] < 0.05
    assert r.config["n"] == 10_000
    assert r.config["replicates"] == 20_000


def test_criterion_07_last_event_limits():
    r = _report("last-event")
    s = r.statistics
    _register(7, "final-merger limit probabilities", r.passed,
              f"|dP(E=0)| {s['p_e0_abs_error']:.4f}, |dP(E=1)| {s['p_e1_abs_error']:.4f}, "
              f"|dP(B=2)| {s['p_b2_abs_error']:.4f}, |dP(B-E=1)| {s['p_diff1_abs_error']:.4f}, "
              f"all < 0.02 at n=2000, 1e5 runs", r.runtime_s)
    assert r.thresholds["prob_abs"] == 0.02
    assert r.config["n"] == 2000
    for key in ("p_e0", "p_e1", "p_b2", "p_diff1"):
        assert s[key + "_abs_error"] < 0.02
    assert r.passed


def test_criterion_08_generating_function_exactness():
    r = _report("gf-coefficients")
    s = r.statistics
    _register(8, "generating-function exactness", r.passed,
              f"max coeff err {s['max_coeff_error']:.1e} <= 1e-8, corners "
              f"{max(s['corner_phi_error'], s['corner_psi_error']):.1e} <= 1e-12, "
              f"grid identity {s['grid_identity_max_dev']:.1e} <= 1e-12; "
              f"23/160 is the order-3 B coefficient "
              f"(E order-3 is 19/324, off by {s['p_E_3_vs_19_324']:.1e})", r.runtime_s)
    assert s["max_coeff_error"] <= 1e-8
    assert s["corner_phi_error"] <= 1e-12
    assert s["corner_psi_error"] <= 1e-12
    assert s["grid_identity_max_dev"] <= 1e-12
    # the ambiguous label is settled: 23/160 belongs to B, not E
    assert s["owner_of_23_160"] == "B"
    assert abs(r.estimates["p_B_3"] - 23.0 / 160.0) <= 1e-8
    assert s["p_E_3_vs_19_324"] <= 1e-8
    assert r.passed


def test_criterion_09_identity_suite():
    r = _report("gf-identities")
    s = r.statistics
    _register(9, "integral identity suite", r.passed,
              f"J-vs-I {s['max_J_vs_I']:.1e} < 1e-7, delta {s['max_delta_quad_vs_closed']:.1e} < 1e-7, "
              f"3/2-power {max(s['max_pow32_theta_dev'], s['max_pow32_unit_dev']):.1e} < 1e-8, "
              f"laplace {s['max_laplace_dev']:.1e} < 1e-6, "
              f"all-ones {s['max_all_ones_dev']:.1e} < 1e-10", r.runtime_s)
    assert s["max_J_vs_I"] < 1e-7
    assert s["max_delta_quad_vs_closed"] < 1e-7
    assert s["max_pow32_theta_dev"] < 1e-8
    assert s["max_pow32_unit_dev"] < 1e-8
    assert s["max_laplace_dev"] < 1e-6
    assert s["max_all_ones_dev"] < 1e-10
    assert r.passed


def test_criterion_10_reduced_tree_law():
    r = _report("crt-hn")
    s = r.statistics
    _register(10, "reduced-tree length laws", r.passed,
              f"rate rel err n=3/10/50: {s['rate_rel_error_n3']:.4f}/"
              f"{s['rate_rel_error_n10']:.4f}/{s['rate_rel_error_n50']:.4f} < 0.02; "
              f"root edge n=1/5: {s['root_edge_rel_error_n1']:.4f}/"
              f"{s['root_edge_rel_error_n5']:.4f} < 0.01; first-edge p-values "
              f"{['%.3f' % p for p in s['first_edge_attempt_pvalues']]}", r.runtime_s)
    for m in (3, 10, 50):
        assert s[f"rate_rel_error_n{m}"] < 0.02
    for m in (1, 5):
        assert s[f"root_edge_rel_error_n{m}"] < 0.01
    assert r.passed


def test_criterion_11_cross_construction():
    r = _report("crt-uvw")
    s = r.statistics
    _register(11, "continuum vs discrete block counts", r.passed,
              f"joint (U,V)/(B,E) p-values {['%.3f' % p for p in s['attempt_pvalues']]} "
              f"at n=500, 1e5 each; |dP(W=0)| {s['p_w0_abs_error']:.4f} < 0.02 at n=2000",
              r.runtime_s)
    assert r.config["n"] == 500
    assert r.estimates["p_w0_n"] == 2000.0
    assert s["p_w0_abs_error"] < 0.02
    assert r.passed


def test_criterion_12_dust_and_integrated_dust():
    dust = _report("dust")
    theta = _report("theta-integral")
    ok = dust.passed and theta.passed
    _register(12, "dust law and its integral", ok,
              f"dust KS {dust.statistics['ks']:.4f} < 0.01 at 1e6 draws; "
              f"integral mean rel err {theta.statistics['mean_rel_error']:.4f} < 0.05, "
              f"KS {theta.statistics['ks']:.4f} < 0.05 at 1e5 paths",
              dust.runtime_s + theta.runtime_s)
    assert dust.statistics["ks"] < 0.01
    assert dust.config["replicates"] == 1_000_000
    assert theta.statistics["mean_rel_error"] < 0.05
    assert theta.statistics["ks"] < 0.05
    assert theta.thresholds["grid_step"] == 0.01
    assert theta.thresholds["theta_max"] == 20.0
    assert ok


def test_criterion_13_stochastic_order():
    r = _report("stochastic-order")
    s = r.statistics
    _register(13, "partial-sum domination up to order 50", r.passed,
              f"min margin {s['min_margin']:.4f} >= -1e-8 (at j={s['argmin_margin']}), "
              f"cross-radius dev {s['cross_radius_dev']:.1e}", r.runtime_s)
    assert r.config["n"] == 50
    assert s["min_margin"] >= -1e-8
    assert s["cross_radius_dev"] <= 1e-9
    assert r.passed
