"""Command-line front end.

Subcommands:
    rates            print the merger-rate table and its row-sum identity
    simulate-prune   tree-pruning chain runs as JSON lines
    simulate-lambda  measure-driven jump-chain runs as JSON lines
    simulate-crt     continuum reduced-tree (U, V, W, L, H) draws as JSON lines
    gf               probability extraction from a generating function
    verify           run the statistical verification suite

Every simulation replicate gets its own derived stream, so outputs are
reproducible from (seed, replicate index) alone.  Event logs go to stdout
or --out as JSON lines; --hist writes a unit-bin CSV histogram
(bin_low, bin_high, count) of the run statistic for plotting.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from . import crtsim, experiments, lambdasim, prunesim, specfun
from .rng import derive_seed, derive_stream

__all__ = ["build_parser", "main"]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _parse_measure(text: str) -> specfun.LambdaMeasure:
    """Parse 'kingman', 'uniform', or 'beta:A,B' into a measure."""
    low = text.strip().lower()
    if low == "kingman":
        return specfun.LambdaMeasure.kingman()
    if low == "uniform":
        return specfun.LambdaMeasure.uniform()
    if low.startswith("beta:"):
        parts = low[len("beta:"):].split(",")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(
                f"beta measure needs two parameters, e.g. beta:1.5,0.5; got {text!r}")
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad beta parameters in {text!r}")
        return specfun.LambdaMeasure.beta(a, b)
    raise argparse.ArgumentTypeError(
        f"unknown measure {text!r}; use kingman, uniform, or beta:A,B")


def _open_out(path: str):
    """Writable text handle for a path, with '-' meaning stdout."""
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _write_lines(path: str, lines) -> int:
    out = _open_out(path)
    count = 0
    try:
        for line in lines:
            out.write(line)
            out.write("\n")
            count += 1
    finally:
        if out is not sys.stdout:
            out.close()
    return count


def _write_hist(path: str, values) -> None:
    """Unit-bin histogram of integer-valued statistics as CSV."""
    if not values:
        raise ValueError("no values to histogram")
    lo = min(values)
    hi = max(values)
    counts = [0] * (hi - lo + 1)
    for v in values:
        counts[v - lo] += 1
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        for i, c in enumerate(counts):
            writer.writerow([lo + i, lo + i + 1, c])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_rates(args) -> int:
    """Rate table lambda_{b,k} for 2 <= k <= b <= n, with the total-rate check."""
    n = args.n
    if n < 2:
        print("rates needs --n >= 2", file=sys.stderr)
        return 2
    for b in range(2, n + 1):
        total = specfun.rate_total(b)
        row = [specfun.rate_nk(b, k) for k in range(2, b + 1)]
        weighted = sum(math.comb(b, k) * r for k, r in zip(range(2, b + 1), row))
        rel = abs(weighted - total) / total
        print(f"b={b:<3d} total={total:.12g}  row_sum_rel_err={rel:.2e}")
        for k, r in zip(range(2, b + 1), row):
            print(f"    k={k:<3d} rate={r:.12g}")
    return 0


def _cmd_simulate_prune(args) -> int:
    collisions = []

    def lines():
        for i in range(args.replicates):
            rep_seed = derive_seed(args.seed, i)
            log = prunesim.run_chain(args.n, derive_stream(args.seed, i),
                                     timed=args.timed, seed=rep_seed)
            collisions.append(prunesim.collision_count(log))
            yield log.to_json_line()

    count = _write_lines(args.out, lines())
    if args.hist:
        _write_hist(args.hist, collisions)
    print(f"wrote {count} runs (n={args.n}, seed={args.seed})", file=sys.stderr)
    return 0


def _cmd_simulate_lambda(args) -> int:
    table = lambdasim.build_table(args.measure, args.n)
    jumps = []

    def lines():
        for i in range(args.replicates):
            rep_seed = derive_seed(args.seed, i)
            log = lambdasim.run_lambda_chain(args.n, table, derive_stream(args.seed, i),
                                             timed=args.timed, seed=rep_seed)
            jumps.append(len(log.events))
            yield log.to_json_line()

    count = _write_lines(args.out, lines())
    if args.hist:
        _write_hist(args.hist, jumps)
    print(f"wrote {count} runs (n={args.n}, measure={args.measure.kind}, "
          f"seed={args.seed})", file=sys.stderr)
    return 0


def _cmd_simulate_crt(args) -> int:
    params = crtsim.CrtParams(alpha=args.alpha)
    us = []

    def lines():
        for i in range(args.replicates):
            rep_seed = derive_seed(args.seed, i)
            s = crtsim.sample_uvw(args.n, params, derive_stream(args.seed, i))
            us.append(s.U)
            yield json.dumps({"n": args.n, "seed": rep_seed, "U": s.U, "V": s.V,
                              "W": s.W, "L": s.L, "H": s.H})

    count = _write_lines(args.out, lines())
    if args.hist:
        _write_hist(args.hist, us)
    print(f"wrote {count} draws (n={args.n}, alpha={args.alpha}, "
          f"seed={args.seed})", file=sys.stderr)
    return 0


_GF_ALIASES = {"phi": "B", "psi": "U"}


def _cmd_gf(args) -> int:
    """Extract p_0..p_kmax of one marginal by circle quadrature.

    phi and psi name the diagonal (total-count) marginals B and U.  No
    tolerance is enforced here; the cross-radius error estimate is printed
    so the caller can judge how deep the coefficients are trustworthy
    (roundoff grows like radius**-k, so high orders at small radius are
    noise, and the estimate says so).
    """
    which = _GF_ALIASES.get(args.which, args.which)
    pgf = specfun.marginal_pgf(which)
    probs, err = specfun.pgf_extract(pgf, args.extract, radius=args.radius, tol=None)
    print(f"# marginal={which} kmax={args.extract} radius={args.radius}")
    print(f"# cross-radius error estimate: {err:.3e}")
    for k, p in enumerate(probs):
        print(f"{k:4d}  {p:.15g}")
    print(f"# partial sum: {float(probs.sum()):.15g}")
    return 0


def _cmd_verify(args) -> int:
    reports = experiments.verify(args.suite, seed=args.seed, workers=args.workers)
    if args.out:
        payload = {
            "version": experiments.REPORT_VERSION,
            "suite": args.suite,
            "seed": args.seed,
            "pass": all(r.passed for r in reports),
            "reports": [json.loads(r.to_json()) for r in reports],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"report written to {args.out}", file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_sim_args(sp, default_n: int, default_reps: int) -> None:
    sp.add_argument("--n", type=int, default=default_n, help="initial block count")
    sp.add_argument("--replicates", type=int, default=default_reps)
    sp.add_argument("--seed", type=int, default=experiments.DEFAULT_SEED)
    sp.add_argument("--out", type=str, default="-",
                    help="JSON-lines output path, or - for stdout")
    sp.add_argument("--hist", type=str, default="",
                    help="optional CSV histogram path (bin_low, bin_high, count)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="coalforge",
        description="Simulators and statistical checks for a pruning-driven "
                    "multiple-merger coalescent and its continuum limit.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("rates", help="print the merger-rate table")
    sp.add_argument("--n", type=int, default=12, help="largest block count")
    sp.set_defaults(func=_cmd_rates)

    sp = sub.add_parser("simulate-prune", help="run the tree-pruning chain")
    _add_sim_args(sp, default_n=10_000, default_reps=1)
    sp.add_argument("--timed", type=_parse_bool, default=False,
                    help="attach exponential holding times (true/false)")
    sp.set_defaults(func=_cmd_simulate_prune)

    sp = sub.add_parser("simulate-lambda", help="run the measure-driven jump chain")
    _add_sim_args(sp, default_n=10, default_reps=1)
    sp.add_argument("--measure", type=_parse_measure,
                    default=specfun.LambdaMeasure.beta(1.5, 0.5),
                    help="kingman, uniform, or beta:A,B (default beta:1.5,0.5)")
    sp.add_argument("--timed", type=_parse_bool, default=False,
                    help="attach exponential holding times (true/false)")
    sp.set_defaults(func=_cmd_simulate_lambda)

    sp = sub.add_parser("simulate-crt", help="draw continuum reduced-tree statistics")
    _add_sim_args(sp, default_n=2000, default_reps=1)
    sp.add_argument("--alpha", type=float, default=2.0,
                    help="scaling parameter (mark intensity is 2*alpha per unit length)")
    sp.set_defaults(func=_cmd_simulate_crt)

    sp = sub.add_parser("gf", help="extract probabilities from a generating function")
    sp.add_argument("--which", type=str, default="phi",
                    choices=sorted(set(list(_GF_ALIASES) + ["E", "B-E", "B", "W", "V-W", "V", "U"])),
                    help="marginal name; phi/psi mean the diagonals B/U")
    sp.add_argument("--extract", type=int, default=50,
                    help="highest coefficient order to report")
    sp.add_argument("--radius", type=float, default=0.5,
                    help="extraction circle radius in (0, 1)")
    sp.set_defaults(func=_cmd_gf)

    sp = sub.add_parser("verify", help="run the verification suite")
    sp.add_argument("--suite", type=str, default="all",
                    help="all, fast, slow, or a comma-separated experiment list")
    sp.add_argument("--seed", type=int, default=experiments.DEFAULT_SEED)
    sp.add_argument("--workers", type=int, default=1,
                    help="worker processes for replicate-level parallelism")
    sp.add_argument("--out", type=str, default="",
                    help="write the combined JSON report here")
    sp.set_defaults(func=_cmd_verify)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
