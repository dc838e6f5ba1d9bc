"""Problem definition and per-point evaluation.

A problem is ``min 1/2 ||F(x)||^2  s.t.  C(x) = 0`` with ``F: R^d -> R^m`` and
``C: R^d -> R^p``.  Jacobians are never matrices: ``jF(x)`` and ``jC(x)``
return :class:`~lmec.linops.LinearOperator` objects bound to ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .linops import LinearOperator, estimate_norm

Vector = np.ndarray


class EvaluationError(ArithmeticError):
    """A user callback returned non-finite values."""

    def __init__(self, message: str, x: Vector):
        super().__init__(message)
        self.x = x


@dataclass(frozen=True)
class Problem:
    """An equality-constrained nonlinear least-squares problem."""

    name: str
    d: int
    m: int
    p: int
    F: Callable[[Vector], Vector]
    C: Callable[[Vector], Vector]
    jF: Callable[[Vector], LinearOperator]
    jC: Callable[[Vector], LinearOperator]
    x0: Vector
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 1 <= self.p < self.d:
            raise ValueError(f"{self.name}: need 1 <= p < d, got p={self.p}, d={self.d}")
        if self.m < 1:
            raise ValueError(f"{self.name}: residual dimension must be positive")
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (self.d,):
            raise ValueError(f"{self.name}: x0 has shape {x0.shape}, expected ({self.d},)")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    def lagrangian(self, x: Vector, y: Vector) -> float:
        F = self.F(x)
        return 0.5 * float(F @ F) + float(y @ self.C(x))


@dataclass
class IterateState:
    """Everything the step computations need at one point ``x``."""

    x: Vector
    F: Vector
    C: Vector
    jF: LinearOperator
    jC: LinearOperator

    @property
    def f(self) -> float:
        return 0.5 * float(self.F @ self.F)

    @property
    def phi(self) -> float:
        return 0.5 * float(self.C @ self.C)

    @cached_property
    def c_norm(self) -> float:
        return float(np.linalg.norm(self.C))

    @cached_property
    def grad_f(self) -> Vector:
        return self.jF.rmatvec(self.F)

    @cached_property
    def grad_phi(self) -> Vector:
        return self.jC.rmatvec(self.C)

    @cached_property
    def jc_norm(self) -> float:
        # 20 power iterations, estimated at most once per iterate
        return estimate_norm(self.jC, iters=20)

    @cached_property
    def jf_norm(self) -> float:
        return estimate_norm(self.jF, iters=20)

    def lagrangian(self, y: Vector) -> float:
        return self.f + float(y @ self.C)


def evaluate(problem: Problem, x: Vector) -> IterateState:
    """Evaluate residuals, constraints and bind the Jacobian operators at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.d,):
        raise ValueError(f"expected a point of length {problem.d}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise EvaluationError("non-finite point", x)
    F = np.asarray(problem.F(x), dtype=float)
    C = np.asarray(problem.C(x), dtype=float)
    with np.errstate(over="ignore"):
        finite = np.isfinite(F @ F) and np.isfinite(C @ C)
    if not finite:
        raise EvaluationError(f"{problem.name}: non-finite residual or constraint", x)
    if F.shape != (problem.m,) or C.shape != (problem.p,):
        raise ValueError(f"{problem.name}: F or C returned the wrong shape")
    return IterateState(x=x.copy(), F=F, C=C, jF=problem.jF(x), jC=problem.jC(x))


@dataclass
class FDReport:
    """Worst relative discrepancies between operators and finite differences."""

    jF: float
    jC: float
    adjoint_F: float
    adjoint_C: float

    @property
    def worst(self) -> float:
        return max(self.jF, self.jC, self.adjoint_F, self.adjoint_C)


def _relerr(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def fd_check(problem: Problem, x: Vector, h: float = 1e-6, n_dirs: int = 10,
             seed: int = 0) -> FDReport:
    """Compare Jacobian actions with central differences along random directions.

    Also probes ``<J u, w> = <u, J^T w>`` for each Jacobian.  Nothing is raised;
    the caller decides what discrepancy is acceptable.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    JF, JC = problem.jF(x), problem.jC(x)
    errs = {"jF": 0.0, "jC": 0.0, "adjoint_F": 0.0, "adjoint_C": 0.0}
    for _ in range(n_dirs):
        v = rng.standard_normal(problem.d)
        v /= np.linalg.norm(v)
        for key, fun, J, k in (("jF", problem.F, JF, problem.m), ("jC", problem.C, JC, problem.p)):
            fd = (np.asarray(fun(x + h * v)) - np.asarray(fun(x - h * v))) / (2 * h)
            Jv = J.matvec(v)
            errs[key] = max(errs[key], _relerr(Jv, fd))
            w = rng.standard_normal(k)
            lhs, rhs = float(Jv @ w), float(v @ J.rmatvec(w))
            scale = max(float(np.linalg.norm(Jv) * np.linalg.norm(w)), 1e-12)
            adj = "adjoint_F" if key == "jF" else "adjoint_C"
            errs[adj] = max(errs[adj], abs(lhs - rhs) / scale)
    return FDReport(**errs)
