"""Matrix-free linear algebra: operators defined by their action, CG and MINRES.

Every operator in the package is a :class:`LinearOperator` wrapping a pair of
callables ``v -> A v`` and (optionally) ``u -> A^T u``.  The Krylov solvers only
ever touch operators through these callables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

Vector = np.ndarray
Tolerance = Union[float, Callable[[float], float]]


class ContractViolation(ValueError):
    """Raised when an operation is called outside of its documented domain."""


class NumericalBreakdown(ArithmeticError):
    """Non-finite values appeared inside an iterative solver.

    The last finite iterate is kept on ``iterate`` so callers can recover.
    """

    def __init__(self, message: str, iterate: Optional[Vector] = None):
        super().__init__(message)
        self.iterate = iterate


@dataclass(frozen=True)
class LinearOperator:
    """A linear map ``R^in_dim -> R^out_dim`` known only through its action."""

    in_dim: int
    out_dim: int
    matvec: Callable[[Vector], Vector]
    rmatvec: Optional[Callable[[Vector], Vector]] = None

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ContractViolation("operator dimensions must be positive")

    def __call__(self, v: Vector) -> Vector:
        return self.matvec(v)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.out_dim, self.in_dim)

    @property
    def has_adjoint(self) -> bool:
        return self.rmatvec is not None

    @property
    def T(self) -> "LinearOperator":
        if self.rmatvec is None:
            raise ContractViolation("operator has no adjoint action")
        return LinearOperator(self.out_dim, self.in_dim, self.rmatvec, self.matvec)

    @classmethod
    def from_matrix(cls, A) -> "LinearOperator":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A.shape[1], A.shape[0], lambda v: A @ v, lambda u: A.T @ u)

    @classmethod
    def identity(cls, n: int) -> "LinearOperator":
        return cls(n, n, lambda v: np.array(v, dtype=float), lambda v: np.array(v, dtype=float))

    def to_dense(self) -> np.ndarray:
        """Materialize the matrix column by column.  Meant for tests on small operators."""
        cols = [self.matvec(e) for e in np.eye(self.in_dim)]
        return np.column_stack(cols).reshape(self.out_dim, self.in_dim)


@dataclass
class KrylovResult:
    solution: Vector
    residual_norm: float
    iterations: int
    converged: bool
    tol: float = np.nan
    residual_history: list = field(default_factory=list)


def regularized_normal_operator(J: LinearOperator, gamma: float) -> LinearOperator:
    """Return ``v -> J^T J v + gamma v`` (symmetric, SPD for ``gamma > 0``)."""
    if not J.has_adjoint:
        raise ContractViolation("regularized normal operator needs the adjoint of J")
    if gamma < 0:
        raise ContractViolation(f"gamma must be non-negative, got {gamma}")

    def action(v):
        return J.rmatvec(J.matvec(v)) + gamma * v

    return LinearOperator(J.in_dim, J.in_dim, action, action)


def estimate_norm(J: LinearOperator, iters: int = 20, seed: int = 0) -> float:
    """Estimate the spectral norm of ``J`` by power iteration on ``J^T J``."""
    v = np.random.default_rng(seed).standard_normal(J.in_dim)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        Jv = J.matvec(v)
        sigma = np.linalg.norm(Jv)
        w = J.rmatvec(Jv)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    return float(sigma)


def _check_finite(vec, what, iterate):
    if not np.all(np.isfinite(vec)):
        raise NumericalBreakdown(f"non-finite {what} in Krylov iteration", iterate)


def cg_solve(
    op: LinearOperator,
    rhs: Vector,
    tol: Tolerance,
    max_iter: int,
    x0: Optional[Vector] = None,
    precond: Optional[Callable[[Vector], Vector]] = None,
) -> KrylovResult:
    """Conjugate gradients for a symmetric positive (semi)definite operator.

    Parameters
    ----------
    op : LinearOperator
        Square symmetric operator.
    rhs : ndarray
        Right-hand side.
    tol : float or callable
        Absolute tolerance on the residual norm.  A callable receives the
        residual norm after the first iteration and returns the tolerance to
        use from then on.
    max_iter : int
        Iteration cap.  Hitting it is not an error: ``converged`` is False and
        the last iterate is returned.
    x0 : ndarray, optional
        Starting point, zero by default.
    precond : callable, optional
        Applied to every residual.  With an (approximate) nullspace projector
        this gives projected CG; the monitored quantity is then the norm of the
        projected residual.

    Notes
    -----
    Iteration stops early on non-positive curvature ``<p, A p> <= 0``, which
    happens for singular systems; the current iterate is returned unconverged.
    """
    b = np.asarray(rhs, dtype=float)
    if op.in_dim != op.out_dim or b.shape != (op.in_dim,):
        raise ContractViolation("cg_solve needs a square operator matching rhs")
    _check_finite(b, "right-hand side", None)
    apply_p = precond if precond is not None else (lambda r: r)

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - op.matvec(x) if x0 is not None else b.copy()
    z = apply_p(r)
    res = float(np.linalg.norm(z))
    history = [res]
    tol_val = tol if not callable(tol) else 0.0
    if not callable(tol) and res <= tol_val:
        return _cg_result(op, b, x, 0, tol_val, history, precond, res)
    if res == 0.0:
        return _cg_result(op, b, x, 0, tol_val, history, precond, res)

    p = z.copy()
    rz = float(r @ z)
    it = 0
    while it < max_iter:
        Ap = op.matvec(p)
        _check_finite(Ap, "operator output", x)
        pAp = float(p @ Ap)
        if pAp <= 0.0 or rz <= 0.0:
            break
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        z = apply_p(r)
        _check_finite(z, "residual", x)
        it += 1
        res = float(np.linalg.norm(z))
        history.append(res)
        if it == 1 and callable(tol):
            tol_val = float(tol(res))
        if res <= tol_val:
            break
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    return _cg_result(op, b, x, it, tol_val, history, precond, res)


def _cg_result(op, b, x, it, tol_val, history, precond, recurrence_res):
    if precond is None:
        res = float(np.linalg.norm(b - op.matvec(x)))
    else:
        # a fresh projection would cost another inner solve
        res = recurrence_res
    return KrylovResult(x, res, it, bool(res <= tol_val), tol_val, history)


def minres_solve(
    op: LinearOperator,
    rhs: Vector,
    tol: float,
    max_iter: int,
) -> KrylovResult:
    """MINRES for a symmetric, possibly indefinite operator, started from zero.

    Lanczos tridiagonalization with Givens QR updates.  The reported
    ``residual_norm`` is recomputed from the returned solution.
    """
    b = np.asarray(rhs, dtype=float)
    if op.in_dim != op.out_dim or b.shape != (op.in_dim,):
        raise ContractViolation("minres_solve needs a square operator matching rhs")
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    _check_finite(b, "right-hand side", None)

    n = b.shape[0]
    x = np.zeros(n)
    beta1 = float(np.linalg.norm(b))
    history = [beta1]
    if beta1 <= tol:
        return KrylovResult(x, beta1, 0, True, tol, history)

    v_prev = np.zeros(n)
    v = b / beta1
    beta = 0.0
    w_prev = np.zeros(n)
    w_prev2 = np.zeros(n)
    c_prev, s_prev = 1.0, 0.0  # rotation k-2
    c, s = 1.0, 0.0  # rotation k-1
    phibar = beta1
    it = 0
    while it < max_iter:
        Av = op.matvec(v)
        _check_finite(Av, "operator output", x)
        p = Av - beta * v_prev
        alpha = float(v @ p)
        p = p - alpha * v
        beta_next = float(np.linalg.norm(p))

        eps = s_prev * beta
        dbar = c_prev * beta
        delta = c * dbar + s * alpha
        gbar = -s * dbar + c * alpha
        gamma = float(np.hypot(gbar, beta_next))
        if gamma == 0.0:
            break
        c_new, s_new = gbar / gamma, beta_next / gamma
        tau = c_new * phibar
        phibar = -s_new * phibar

        w = (v - delta * w_prev - eps * w_prev2) / gamma
        x = x + tau * w
        it += 1
        history.append(abs(phibar))

        w_prev2, w_prev = w_prev, w
        c_prev, s_prev, c, s = c, s, c_new, s_new
        if abs(phibar) <= tol or beta_next == 0.0:
            break
        v_prev, v = v, p / beta_next
        beta = beta_next

    res = float(np.linalg.norm(b - op.matvec(x)))
    return KrylovResult(x, res, it, bool(res <= tol), tol, history)
