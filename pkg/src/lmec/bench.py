"""Benchmark runner and Dolan-More performance profiles.

Each (problem, solver) pair yields a :class:`RunRecord`.  The performance
measure is the iteration count; a failed run has infinite ratio.  Problems are
given by registry name (see :func:`lmec.problems.get_problem`) or as
:class:`~lmec.model.Problem` instances.
"""

from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .model import Problem
from .problems import get_problem
from .solver import SolverOptions, Status, solve

logger = logging.getLogger(__name__)

SOLVERS = ("lm", "gn")
CSV_COLUMNS = ("problem", "solver", "success", "iters", "f", "c_norm", "ghat_norm", "wall_ms")


class ConfigurationError(ValueError):
    """Unknown problem or solver name, detected before any run starts."""


@dataclass(frozen=True)
class RunRecord:
    problem: str
    solver: str
    success: bool
    iters: int
    f: float
    c_norm: float
    ghat_norm: float
    wall_ms: float

    @property
    def t_ps(self) -> Optional[int]:
        """Performance measure: iterations to success, ``None`` on failure.

        Zero-iteration successes count as one so ratios stay defined.
        """
        return max(self.iters, 1) if self.success else None


@dataclass(frozen=True)
class ProfileCurve:
    """Step function ``rho_s(tau)``; ``rho[i]`` holds on ``[tau[i], tau[i+1])``."""

    solver: str
    tau: np.ndarray
    rho: np.ndarray

    @property
    def log2_tau(self) -> np.ndarray:
        return np.log2(self.tau)

    def __call__(self, tau: float) -> float:
        idx = np.searchsorted(self.tau, tau, side="right") - 1
        return 0.0 if idx < 0 else float(self.rho[idx])


def _resolve(problem: Union[str, Problem]) -> Problem:
    return problem if isinstance(problem, Problem) else get_problem(problem)


def run_one(problem: Union[str, Problem], solver: str, tol: float = 1e-6,
            max_iter: int = 1000, trace_dir: Optional[Path] = None) -> RunRecord:
    """Solve one problem; any failure is recorded rather than raised."""
    prob = _resolve(problem)
    start = time.perf_counter()
    try:
        report = solve(prob, SolverOptions(mode=solver, tol=tol, max_iter=max_iter))
    except Exception as exc:  # a crashing run is a failed run
        logger.warning("%s/%s raised %s", prob.name, solver, exc)
        wall = 1e3 * (time.perf_counter() - start)
        return RunRecord(prob.name, solver, False, 0, math.nan, math.nan, math.nan, wall)
    wall = 1e3 * (time.perf_counter() - start)
    if trace_dir is not None:
        safe = prob.name.replace(":", "_").replace(",", "_").replace("=", "")
        report.write_trace(Path(trace_dir) / f"{safe}.{solver}.jsonl")
    fin = report.final if report.trace else None
    return RunRecord(
        problem=prob.name,
        solver=solver,
        success=report.status is Status.CONVERGED,
        iters=report.iterations,
        f=fin.f if fin else math.nan,
        c_norm=fin.c_norm if fin else math.nan,
        ghat_norm=fin.ghat_norm if fin else math.nan,
        wall_ms=wall,
    )


def run_suite(problems: Sequence[Union[str, Problem]], solvers: Sequence[str],
              tol: float = 1e-6, max_iter: int = 1000, parallel: bool = False,
              trace_dir: Optional[Union[str, Path]] = None,
              max_workers: Optional[int] = None) -> list[RunRecord]:
    """Run every solver on every problem.

    Records come back in problem-major order regardless of ``parallel``.

    Raises
    ------
    ConfigurationError
        On an empty list or an unknown name; raised before any solve starts.
    """
    if not problems or not solvers:
        raise ConfigurationError("need at least one problem and one solver")
    unknown = [s for s in solvers if s not in SOLVERS]
    if unknown:
        raise ConfigurationError(f"unknown solver(s) {unknown}; choose from {SOLVERS}")
    resolved = []
    for p in problems:
        try:
            resolved.append(_resolve(p))
        except (ValueError, NotImplementedError) as exc:
            raise ConfigurationError(str(exc)) from exc
    if trace_dir is not None:
        trace_dir = Path(trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(p, s) for p in resolved for s in solvers]
    if not parallel:
        return [run_one(p, s, tol, max_iter, trace_dir) for p, s in jobs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(run_one, p, s, tol, max_iter, trace_dir) for p, s in jobs]
        return [fut.result() for fut in futures]


def performance_profile(records: Iterable[RunRecord]) -> list[ProfileCurve]:
    """Dolan-More profiles over iteration counts.

    Ties at the per-problem best count for every tied solver.  A problem no
    solver solved carries no information and is dropped with a warning.
    Breakpoints are the distinct finite ratios, shared by all curves.
    """
    records = list(records)
    solvers = list(dict.fromkeys(r.solver for r in records))
    problems = list(dict.fromkeys(r.problem for r in records))
    if len(solvers) < 2:
        warnings.warn("performance profile with fewer than two solvers", stacklevel=2)

    cost = {}
    for r in records:
        key = (r.problem, r.solver)
        if key in cost:
            raise ValueError(f"duplicate record for {key}")
        cost[key] = r.t_ps if r.success else math.inf

    ratios = {s: [] for s in solvers}
    for p in problems:
        row = [cost.get((p, s), math.inf) for s in solvers]
        best = min(row)
        if math.isinf(best):
            warnings.warn(f"no solver succeeded on {p}; excluded from the profile", stacklevel=2)
            continue
        for s, c in zip(solvers, row):
            ratios[s].append(c / best)

    n_prob = len(next(iter(ratios.values()), []))
    if n_prob == 0:
        return [ProfileCurve(s, np.array([1.0]), np.array([0.0])) for s in solvers]
    finite = {1.0} | {r for rs in ratios.values() for r in rs if math.isfinite(r)}
    tau = np.array(sorted(finite))
    curves = []
    for s in solvers:
        rs = np.sort(np.array(ratios[s]))
        rho = np.searchsorted(rs, tau, side="right") / n_prob
        curves.append(ProfileCurve(s, tau, rho))
    return curves


def write_records(records: Iterable[RunRecord], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([r.problem, r.solver, int(r.success), r.iters, repr(r.f),
                             repr(r.c_norm), repr(r.ghat_norm), f"{r.wall_ms:.3f}"])


def read_records(path: Union[str, Path]) -> list[RunRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [RunRecord(row["problem"], row["solver"], row["success"] in ("1", "True", "true"),
                          int(row["iters"]), float(row["f"]), float(row["c_norm"]),
                          float(row["ghat_norm"]), float(row["wall_ms"]))
                for row in reader]


def write_profile(curves: Sequence[ProfileCurve], path: Union[str, Path]) -> None:
    """Long-format CSV: solver, tau, log2_tau, rho."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("solver", "tau", "log2_tau", "rho"))
        for c in curves:
            for t, lt, r in zip(c.tau, c.log2_tau, c.rho):
                writer.writerow((c.solver, repr(float(t)), repr(float(lt)), repr(float(r))))


def gnuplot_table(curves: Sequence[ProfileCurve]) -> str:
    """Whitespace-separated table, one ``rho`` column per solver against ``log2(tau)``.

    Plot with ``with steps``.
    """
    if not curves:
        return ""
    lines = ["# log2_tau " + " ".join(c.solver for c in curves)]
    for i, lt in enumerate(curves[0].log2_tau):
        lines.append(f"{lt:.6g} " + " ".join(f"{c.rho[i]:.6g}" for c in curves))
    return "\n".join(lines) + "\n"
