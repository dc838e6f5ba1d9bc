"""Command-line entry point: ``lmec run``, ``lmec profile`` and ``lmec solve``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .problems import get_problem, suite
from .solver import SolverOptions, solve

EXIT_CONFIG = 2


def _csv_list(text: str) -> list[str]:
    return [s.strip().lower() for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="benchmark solvers over a problem suite")
    run.add_argument("--suite", default="hs",
                     help="hs, da, all, or a comma list of problem names")
    run.add_argument("--solvers", type=_csv_list, default=["lm", "gn"],
                     help="comma list of lm, gn")
    run.add_argument("--tol", type=float, default=1e-6, help="stationarity tolerance")
    run.add_argument("--max-iter", type=int, default=1000)
    run.add_argument("--seed", type=int, default=7, help="seed for data-assimilation instances")
    run.add_argument("--out", type=Path, default=Path("results.csv"), help="results CSV")
    run.add_argument("--trace-dir", type=Path, default=None,
                     help="write one JSON-lines trace per run here")
    run.add_argument("--parallel", action="store_true", help="run problems on a thread pool")

    prof = sub.add_parser("profile", help="performance profiles from a results CSV")
    prof.add_argument("--in", dest="inp", type=Path, required=True, help="results CSV")
    prof.add_argument("--out", type=Path, default=Path("profile.csv"), help="profile CSV")
    prof.add_argument("--gnuplot", type=Path, default=None,
                      help="also write a gnuplot table to this file")

    one = sub.add_parser("solve", help="solve a single problem and print a summary")
    one.add_argument("--problem", required=True)
    one.add_argument("--solver", default="lm", help="lm or gn")
    one.add_argument("--tol", type=float, default=1e-6)
    one.add_argument("--max-iter", type=int, default=1000)
    one.add_argument("--trace", type=Path, default=None, help="JSON-lines trace output")
    return parser


def _cmd_run(args) -> int:
    records = bench.run_suite(suite(args.suite, seed=args.seed), args.solvers, tol=args.tol,
                              max_iter=args.max_iter, parallel=args.parallel,
                              trace_dir=args.trace_dir)
    bench.write_records(records, args.out)
    for r in records:
        flag = "ok  " if r.success else "FAIL"
        print(f"{flag} {r.problem:<24} {r.solver:<3} iters={r.iters:<5d} f={r.f:.6g} "
              f"|C|={r.c_norm:.2e} |g|={r.ghat_norm:.2e}")
    return 0


def _cmd_profile(args) -> int:
    if not args.inp.exists():
        raise bench.ConfigurationError(f"{args.inp} does not exist")
    curves = bench.performance_profile(bench.read_records(args.inp))
    bench.write_profile(curves, args.out)
    if args.gnuplot is not None:
        args.gnuplot.write_text(bench.gnuplot_table(curves))
    for c in curves:
        print(f"{c.solver}: rho(1)={c(1.0):.3f} rho(inf)={c.rho[-1]:.3f}")
    return 0


def _cmd_solve(args) -> int:
    if args.solver not in bench.SOLVERS:
        raise bench.ConfigurationError(f"unknown solver {args.solver!r}")
    try:
        problem = get_problem(args.problem)
    except (ValueError, NotImplementedError) as exc:
        raise bench.ConfigurationError(str(exc)) from exc
    report = solve(problem, SolverOptions(mode=args.solver, tol=args.tol,
                                          max_iter=args.max_iter))
    if args.trace is not None:
        report.write_trace(args.trace)
    fin = report.final
    print(json.dumps({"problem": problem.name, "solver": args.solver,
                      "status": report.status.value, "iters": report.iterations,
                      "f": fin.f, "c_norm": fin.c_norm, "ghat_norm": fin.ghat_norm}))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "profile": _cmd_profile, "solve": _cmd_solve}[args.command]
    try:
        return handler(args)
    except (bench.ConfigurationError, ValueError) as exc:
        print(f"lmec: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
