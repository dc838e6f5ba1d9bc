"""Composite-step pieces: quasi-normal step, nullspace projection, tangential step.

All subproblems are solved matrix-free.  The quasi-normal step minimizes the
regularized Gauss-Newton model of the constraint violation

    m_c(n) = 1/2 ||C + J_c n||^2 + gamma/2 ||n||^2,

and the tangential step minimizes ``1/2 <H t, t> + <W(g), t>`` over the
(approximate) nullspace of ``J_c``, where ``H = J_F^T J_F + gamma I`` and ``W``
is the orthogonal projector onto ``null(J_c)`` applied by MINRES on the
augmented system ``[[I, J_c^T], [J_c, 0]] (t, z) = (v, 0)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linops import (
    KrylovResult,
    LinearOperator,
    cg_solve,
    minres_solve,
    regularized_normal_operator,
)
from .model import IterateState

logger = logging.getLogger(__name__)

Vector = np.ndarray


@dataclass(frozen=True)
class StepConfig:
    """Inner-solver tolerances and Cauchy safeguards."""

    cg_tol_floor: float = 1e-4
    cg_tol_rel: float = 1e-8
    cg_tol_abs_floor: float = 1e-15
    cg_max_iter: int = 1000
    minres_max_iter: Optional[int] = None  # default 2 (d + p) + 10
    xi0: float = 1.0
    xi1: float = 1.0
    xi2: float = 1.0
    kappa1: float = 1e-4
    kappa2: float = 1e-4
    strong_projection: bool = False

    def __post_init__(self):
        for name in ("cg_tol_floor", "cg_tol_rel", "cg_tol_abs_floor", "xi0", "xi1",
                     "xi2", "kappa1", "kappa2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"StepConfig.{name} must be positive")
        if self.cg_max_iter < 1:
            raise ValueError("StepConfig.cg_max_iter must be positive")

    def cg_tolerance(self, first_residual: float) -> float:
        """Absolute CG tolerance from the residual norm after one iteration."""
        return min(self.cg_tol_floor, max(self.cg_tol_abs_floor, self.cg_tol_rel * first_residual))

    def projection_tolerance(self, n_norm: float, gamma: float) -> float:
        """MINRES tolerance for the projector and the recovered step."""
        inv_gamma_sq = math.inf if gamma == 0 else 1.0 / gamma**2
        return min(self.cg_tol_floor, max(self.cg_tol_abs_floor, min(n_norm, inv_gamma_sq)))


def augmented_operator(jC: LinearOperator) -> LinearOperator:
    """The symmetric saddle-point operator ``[[I, J^T], [J, 0]]``."""
    d, p = jC.in_dim, jC.out_dim

    def action(u):
        t, z = u[:d], u[d:]
        return np.concatenate([t + jC.rmatvec(z), jC.matvec(t)])

    return LinearOperator(d + p, d + p, action, action)


class Projector:
    """Approximate nullspace projector built on MINRES solves of the augmented system.

    Keeps running totals so callers can report inner-solver work and the worst
    residual achieved.
    """

    def __init__(self, jC: LinearOperator, max_iter: Optional[int] = None):
        self.jC = jC
        self.d, self.p = jC.in_dim, jC.out_dim
        self.K = augmented_operator(jC)
        self.max_iter = max_iter if max_iter is not None else 2 * (self.d + self.p) + 10
        self.calls = 0
        self.iterations = 0
        self.worst_residual = 0.0
        self.last: Optional[KrylovResult] = None

    def __call__(self, v: Vector, tol: float) -> Vector:
        rhs = np.concatenate([np.asarray(v, dtype=float), np.zeros(self.p)])
        res = minres_solve(self.K, rhs, tol, self.max_iter)
        if not res.converged:
            logger.debug("projection stopped at residual %.3e (tol %.3e)", res.residual_norm, tol)
        self.calls += 1
        self.iterations += res.iterations
        self.worst_residual = max(self.worst_residual, res.residual_norm)
        self.last = res
        return res.solution[: self.d]


def project(v: Vector, state: IterateState, tol: float, max_iter: Optional[int] = None) -> Vector:
    """Apply the approximate projector onto ``null(J_c)`` at ``state`` to ``v``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.asarray(v, dtype=float)
    if v.shape != (state.jC.in_dim,):
        raise ValueError("vector length does not match the variable dimension")
    return Projector(state.jC, max_iter)(v, tol)


@dataclass
class NormalStepResult:
    n: Vector
    pred_c: float
    cg_iterations: int
    cauchy_fallback_used: bool = False
    cg_residual: float = 0.0


@dataclass
class TangentialStepResult:
    t_tilde: Vector
    g: Vector
    g_hat: Vector
    grad_lagrangian: Vector
    W_n: Vector
    pred_t: float
    cg_iterations: int
    minres_iterations: int
    cauchy_fallback_used: bool = False
    projection_residuals: dict = field(default_factory=dict)

    @property
    def g_hat_norm(self) -> float:
        return float(np.linalg.norm(self.g_hat))


def normal_model_decrease(state: IterateState, n: Vector, gamma: float) -> float:
    """``m_c(0) - m_c(n)`` evaluated directly."""
    r = state.C + state.jC.matvec(n)
    return 0.5 * float(state.C @ state.C) - 0.5 * float(r @ r) - 0.5 * gamma * float(n @ n)


def cauchy_point_normal(state: IterateState, gamma: float) -> Vector:
    """Minimizer of ``m_c`` along the steepest-descent direction ``-J_c^T C``."""
    g = state.grad_phi
    gg = float(g @ g)
    if gg == 0.0:
        return np.zeros_like(g)
    Jg = state.jC.matvec(g)
    alpha = gg / (float(Jg @ Jg) + gamma * gg)
    return -alpha * g


def quasi_normal_step(state: IterateState, gamma: float, cfg: StepConfig = StepConfig()
                      ) -> NormalStepResult:
    """Inexact minimizer of the regularized Gauss-Newton constraint model.

    CG from zero on ``(J_c^T J_c + gamma I) n = -J_c^T C``.  If the resulting
    decrease misses ``kappa1 ||C||^2 / (||J_c||^2 + gamma)`` the Cauchy point is
    tried instead.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    d = state.jC.in_dim
    if not np.any(state.C):
        return NormalStepResult(np.zeros(d), 0.0, 0)

    A = regularized_normal_operator(state.jC, gamma)
    res = cg_solve(A, -state.grad_phi, cfg.cg_tolerance, cfg.cg_max_iter)
    n = res.solution
    pred = normal_model_decrease(state, n, gamma)
    result = NormalStepResult(n, pred, res.iterations, False, res.residual_norm)

    c_sq = float(state.C @ state.C)
    # skip the norm estimate whenever the required decrease is met for any ||J_c||
    if gamma > 0 and pred >= cfg.kappa1 * c_sq / gamma:
        return result
    required = cfg.kappa1 * c_sq / (state.jc_norm**2 + gamma)
    if pred < required:
        nc = cauchy_point_normal(state, gamma)
        pred_cp = normal_model_decrease(state, nc, gamma)
        if pred_cp > pred:
            result = NormalStepResult(nc, pred_cp, res.iterations, True, res.residual_norm)
            logger.info("normal step: Cauchy fallback (pred %.3e -> %.3e)", pred, pred_cp)
        if result.pred_c < required:
            logger.warning("normal step: sufficient decrease unattainable "
                           "(pred %.3e < %.3e, ||J^T C|| = %.3e)",
                           result.pred_c, required, np.linalg.norm(state.grad_phi))
    return result


def tangential_step(state: IterateState, n: Vector, y: Vector, gamma: float,
                    cfg: StepConfig = StepConfig(),
                    projector: Optional[Projector] = None) -> TangentialStepResult:
    """Inexact tangential step by projected CG on ``H t = -W(g)``.

    ``g = J_F^T F + J_c^T y + H n`` is projected once to obtain the reduced
    gradient ``g_hat``.  CG residuals are projected to the CG tolerance itself,
    since looser projections leave range-space noise that ``H`` amplifies.
    ``W(n)``, needed by the predicted Lagrangian reduction, is computed here
    as well.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    projector = projector or Projector(state.jC, cfg.minres_max_iter)
    it0 = projector.iterations
    H = regularized_normal_operator(state.jF, gamma)
    grad_L = state.grad_f + state.jC.rmatvec(y)
    g = grad_L + H.matvec(n)

    n_norm = float(np.linalg.norm(n))
    tol_w = cfg.projection_tolerance(n_norm, gamma)
    g_hat = projector(g, tol_w)
    residuals = {"g_hat": projector.last.residual_norm}
    if cfg.strong_projection:
        target = cfg.xi1 * min(float(np.linalg.norm(g_hat)), math.inf if gamma == 0 else 1 / gamma)
        if tol_w > target:
            tol_w = max(target, cfg.cg_tol_abs_floor)
            g_hat = projector(g, tol_w)
            residuals["g_hat"] = projector.last.residual_norm

    W_n = projector(n, tol_w) if n_norm > 0 else np.zeros_like(n)
    residuals["W_n"] = projector.last.residual_norm if n_norm > 0 else 0.0

    gh_sq = float(g_hat @ g_hat)
    if gh_sq == 0.0:
        return TangentialStepResult(np.zeros_like(g), g, g_hat, grad_L, W_n, 0.0, 0,
                                    projector.iterations - it0, False, residuals)

    # residual projections share the CG tolerance, fixed after the first iteration
    cg_tol = []

    def tol_after_first(res1):
        cg_tol.append(cfg.cg_tolerance(res1))
        return cg_tol[0]

    def project_residual(r):
        tol = cg_tol[0] if cg_tol else cfg.cg_tolerance(float(np.linalg.norm(r)))
        return projector(r, tol)

    worst_before = projector.worst_residual
    projector.worst_residual = 0.0
    res = cg_solve(H, -g_hat, tol_after_first, cfg.cg_max_iter, precond=project_residual)
    residuals["cg_projections"] = projector.worst_residual
    projector.worst_residual = max(worst_before, projector.worst_residual)

    t_tilde = res.solution
    pred_t = tangential_model_decrease(H, g_hat, t_tilde)
    fallback = False
    if gamma == 0 or pred_t < cfg.kappa2 * gh_sq / gamma:
        required = cfg.kappa2 * gh_sq / (state.jf_norm**2 + gamma)
        if pred_t < required:
            Hg = float(g_hat @ H.matvec(g_hat))
            if Hg > 0:
                tc = -(gh_sq / Hg) * g_hat
                pred_tc = tangential_model_decrease(H, g_hat, tc)
                if pred_tc > pred_t:
                    t_tilde, pred_t, fallback = tc, pred_tc, True
                    logger.info("tangential step: Cauchy fallback")
    return TangentialStepResult(t_tilde, g, g_hat, grad_L, W_n, pred_t, res.iterations,
                                projector.iterations - it0, fallback, residuals)


def tangential_model_decrease(H: LinearOperator, g_hat: Vector, t: Vector) -> float:
    return -0.5 * float(t @ H.matvec(t)) - float(g_hat @ t)


def recover_step(t_tilde: Vector, n: Vector, state: IterateState, gamma: float,
                 cfg: StepConfig = StepConfig(),
                 projector: Optional[Projector] = None) -> Vector:
    """Project ``t_tilde`` back onto ``null(J_c)``; the result is added to ``n``."""
    if not np.any(t_tilde):
        return np.zeros_like(t_tilde)
    projector = projector or Projector(state.jC, cfg.minres_max_iter)
    tol = cfg.projection_tolerance(float(np.linalg.norm(n)), gamma)
    return projector(t_tilde, tol)
