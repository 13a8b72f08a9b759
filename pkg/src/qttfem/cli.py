"""Command line entry point ``qttfem``."""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import bench
from . import checks
from . import limit_problem as lp
from . import qtt_grid as qg
from . import tt_core as tc
from . import tt_solver as ts

_BENCH = {"conv": "ms1d", "rank": "ms1d", "nscale": "nscale1d", "2d": "ms2d",
          "homog-err": "homog_err", "limit": "limit1d"}


def _levels(text):
    v = bench._parse_list(text)
    if not v:
        raise bench.BenchError("empty level range")
    return (v[0], v[-1])


def _coefficient(args):
    lam = args.lam[-1] if args.lam else 10
    if args.coef == "eq68":
        return bench.make_coefficient("eq68", lam, args.n)
    if args.coef in ("eq61", "eq611") and len(args.lam or []) > 1:
        raise SystemExit("eq61/eq611 take a single --lam")
    return bench.make_coefficient(args.coef, lam)


def cmd_solve_ms(args):
    c = _coefficient(args)
    t = time.perf_counter()
    opts = ts.SolverOptions(tol_residual=args.tol, max_sweeps=args.max_sweeps)
    u, res = bench.solve_ms(c, args.level, args.tol, opts if c.dim == 2 else None)
    secs = time.perf_counter() - t
    print(f"coefficient {c.name} lambdas {list(c.lambdas)} level {args.level} dim {c.dim}")
    print(f"|u|_H1 = {qg.h1_seminorm(u):.12e}")
    print(f"ranks {u.coeffs.ranks} effective {tc.effective_rank(u.coeffs.mode_sizes, u.coeffs.ranks):.3f}")
    if res is not None:
        print(f"solver {res.flag or 'converged'} after {res.sweeps} sweeps")
    print(f"time {secs:.2f} s")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        u.save(out / "u.qtt")
        if res is not None:
            res.trace_csv(out / "trace.csv")
        print(f"wrote {out}")
    return 0


def cmd_solve_limit(args):
    c = _coefficient(args)
    t = time.perf_counter()
    sol, ladder = lp.solve_limit(c, -1.0, args.level, args.tol)
    secs = time.perf_counter() - t
    print(f"coefficient {c.name} lambdas {list(c.lambdas)} level {args.level} dim {c.dim}")
    for i, ui in enumerate(sol.u, start=1):
        print(f"u_{i} ranks {ui.ranks}")
    if c.dim == 1 and args.coef == "eq61":
        print(f"triple-norm error vs exact {lp.limit_error_norms(sol, lp.eq61_exact()):.6e}")
    print(f"time {secs:.2f} s")
    if args.out:
        print(f"wrote {sol.export(args.out)}")
    return 0


def cmd_bench(args):
    exp = _BENCH[args.kind]
    over = dict(experiment=exp, lambdas=tuple(args.lam) if args.lam else None,
                levels=_levels(args.levels) if args.levels else None, l_ref=args.l_ref,
                out=args.out, workers=args.workers, solver_tol=args.tol,
                fit_levels=_levels(args.fit_levels) if args.fit_levels else None)
    if args.kind == "rank" or args.rank_protocol:
        over["rank_protocol"] = True
    if args.config:
        cfg = bench.load_config(args.config, **over)
    else:
        cfg = bench.ExperimentConfig(**{k: v for k, v in over.items() if v is not None})
    res = bench.run(cfg)
    path = bench.write_outputs(res)
    for k in sorted(res.summary):
        print(f"{k} = {res.summary[k]}")
    print(f"wrote {path}")
    return 0


def cmd_verify(args):
    bad = 0
    for name, ok, detail in checks.run_all():
        print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
        bad += not ok
    return 1 if bad else 0


def build_parser():
    ap = argparse.ArgumentParser(prog="qttfem", description="QTT finite elements for multiscale diffusion")
    sub = ap.add_subparsers(dest="command", required=True)

    def coef_args(p):
        p.add_argument("--coef", default="eq61",
                       help="eq61, eq68, eq611, unit, unit2d or file:path.py")
        p.add_argument("--lam", type=int, action="append", help="scale exponent (eps = 2^-lam)")
        p.add_argument("--n", type=int, default=1, help="number of scales for eq68")
        p.add_argument("--level", type=int, default=12)
        p.add_argument("--out")

    p = sub.add_parser("solve-ms", help="solve the fine-scale problem")
    coef_args(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-sweeps", type=int, default=30)
    p.set_defaults(func=cmd_solve_ms)

    p = sub.add_parser("solve-limit", help="solve the one-scale limit problem")
    coef_args(p)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_solve_limit)

    p = sub.add_parser("bench", help="run an experiment and write CSV and plot data")
    p.add_argument("kind", choices=sorted(_BENCH))
    p.add_argument("--config", help="key-value experiment file")
    p.add_argument("--lam", type=int, action="append")
    p.add_argument("--levels", help="level range, e.g. 4-14")
    p.add_argument("--fit-levels", help="order fit window, e.g. 11-19")
    p.add_argument("--l-ref", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--rank-protocol", action="store_true")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the quick invariant checks")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (bench.BenchError, lp.LimitError, ts.SolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
