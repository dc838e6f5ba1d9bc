"""Outer iteration: nonmonotone Levenberg-Marquardt with composite steps.

Each iteration builds ``s = n + t`` from an inexact quasi-normal step ``n`` and
a recovered tangential step ``t``, then accepts or rejects it with the
nonmonotone rule of :mod:`lmec.acceptance`.  On acceptance the regularization
``gamma`` shrinks by ``gamma_hat1``; on rejection it grows by ``gamma_hat2`` and
the step is recomputed.  A Gauss-Newton baseline (``gamma = 0``, every step
accepted) shares the same step machinery.
"""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .acceptance import (
    AcceptanceInputs,
    Decision,
    NonmonotoneMemory,
    decide,
    rared_c,
    rared_l,
    update_R,
)
from .linops import LinearOperator, NumericalBreakdown, cg_solve, regularized_normal_operator
from .model import EvaluationError, IterateState, Problem, evaluate, fd_check
from .steps import (
    NormalStepResult,
    Projector,
    StepConfig,
    TangentialStepResult,
    quasi_normal_step,
    recover_step,
    tangential_step,
)

logger = logging.getLogger(__name__)

TRACE_FIELDS = ("iter", "f", "c_norm", "ghat_norm", "gamma", "pred_c", "pred_t", "pred_l",
                "ared_c", "ared_l", "rared_c", "rared_l", "decision", "inner_rej", "cg_n",
                "cg_t", "minres_total")


class Status(str, enum.Enum):
    CONVERGED = "CONVERGED"
    MAX_ITER = "MAX_ITER"
    BREAKDOWN = "BREAKDOWN"


@dataclass(frozen=True)
class SolverOptions:
    rho1: float = 1e-2
    rho2: float = 1e-2
    gamma_hat1: float = 0.9
    gamma_hat2: float = 2.0
    alpha: float = 0.1
    beta: float = 0.1
    xi: float = 0.75
    gamma_min: float = 1e-16
    gamma0: float = 1.0
    nu: int = 5
    mu: float = 1e-3
    tol: float = 1e-6
    max_iter: int = 1000
    max_inner_rejections: int = 50
    step_config: StepConfig = field(default_factory=StepConfig)
    mode: str = "lm"
    reentry: str = "step3"  # "step4" recomputes only t after a rejection
    check_derivatives: bool = True

    def __post_init__(self):
        if not (0 < self.rho1 < 1 and 0 < self.rho2 < 1):
            raise ValueError("rho1 and rho2 must lie in (0, 1)")
        if not 0 < self.gamma_hat1 < 1 < self.gamma_hat2:
            raise ValueError("need 0 < gamma_hat1 < 1 < gamma_hat2")
        if not (0 < self.alpha < 0.5 and 0 < self.beta < 0.5):
            raise ValueError("alpha and beta must lie in (0, 1/2)")
        if not 2 / 3 < self.xi < 1:
            raise ValueError("xi must lie in (2/3, 1)")
        if not (self.gamma_min > 0 and self.gamma0 > 0):
            raise ValueError("gamma_min and gamma0 must be positive")
        if self.tol <= 0 or self.max_iter < 0 or self.max_inner_rejections < 0:
            raise ValueError("tol must be positive and budgets non-negative")
        if self.mode not in ("lm", "gn"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.reentry not in ("step3", "step4"):
            raise ValueError(f"unknown reentry {self.reentry!r}")


@dataclass
class Attempt:
    """One trial step inside an outer iteration."""

    gamma: float
    inputs: Optional[AcceptanceInputs]
    decision: str


@dataclass
class IterationRecord:
    iter: int
    f: float
    c_norm: float
    ghat_norm: float
    gamma: float
    pred_c: Optional[float] = None
    pred_t: Optional[float] = None
    pred_l: Optional[float] = None
    ared_c: Optional[float] = None
    ared_l: Optional[float] = None
    rared_c: Optional[float] = None
    rared_l: Optional[float] = None
    decision: Optional[str] = None
    inner_rej: int = 0
    cg_n: int = 0
    cg_t: int = 0
    minres_total: int = 0
    R: Optional[float] = None
    k: int = 0
    attempts: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in TRACE_FIELDS}


@dataclass
class SolveReport:
    status: Status
    iterations: int
    x: np.ndarray
    y: np.ndarray
    trace: list
    gamma: float
    solver: str = "lm"
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def final(self) -> IterationRecord:
        return self.trace[-1]

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.trace:
                fh.write(json.dumps(rec.to_json()) + "\n")


def multiplier_estimate(state: IterateState, n: np.ndarray, gamma: float,
                        cfg: StepConfig = StepConfig()) -> np.ndarray:
    """Least-squares multipliers ``argmin_y ||J_F^T F + H n + J_c^T y||``.

    Solved by CG on ``J_c J_c^T y = -J_c (J_F^T F + H n)``.
    """
    jC = state.jC
    H = regularized_normal_operator(state.jF, gamma)
    gbar = state.grad_f + H.matvec(n)
    JJt = LinearOperator(jC.out_dim, jC.out_dim,
                         lambda u: jC.matvec(jC.rmatvec(u)),
                         lambda u: jC.matvec(jC.rmatvec(u)))
    try:
        res = cg_solve(JJt, -jC.matvec(gbar), cfg.cg_tolerance, cfg.cg_max_iter)
    except NumericalBreakdown:
        logger.warning("multiplier estimate broke down; using y = 0")
        return np.zeros(jC.out_dim)
    return res.solution


@dataclass
class _Step:
    normal: NormalStepResult
    tangential: TangentialStepResult
    projector: Projector


def _compute_step(state, gamma, cfg, y=None) -> tuple[_Step, np.ndarray]:
    """Quasi-normal and tangential steps; multipliers are estimated unless given."""
    projector = Projector(state.jC, cfg.minres_max_iter)
    normal = quasi_normal_step(state, gamma, cfg)
    if y is None:
        y = multiplier_estimate(state, normal.n, gamma, cfg)
    tang = tangential_step(state, normal.n, y, gamma, cfg, projector)
    return _Step(normal, tang, projector), y


def stationarity(problem: Problem, x: np.ndarray, gamma: float,
                 cfg: StepConfig = StepConfig()) -> tuple[float, float]:
    """``(||C||, ||g_hat||)`` at ``x`` computed exactly as the solver does."""
    state = evaluate(problem, x)
    step, _ = _compute_step(state, gamma, cfg)
    return state.c_norm, step.tangential.g_hat_norm


def solve(problem: Problem, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Minimize ``1/2 ||F||^2`` subject to ``C = 0`` from ``problem.x0``."""
    if opts.mode == "gn":
        return gauss_newton_solve(problem, opts)
    start = time.perf_counter()
    cfg = opts.step_config
    _advise_derivatives(problem, opts)

    x = np.array(problem.x0, dtype=float)
    gamma = opts.gamma0
    mem = NonmonotoneMemory(nu=opts.nu, mu=opts.mu)
    trace: list[IterationRecord] = []
    y = np.zeros(problem.p)
    try:
        state = evaluate(problem, x)
    except EvaluationError:
        return SolveReport(Status.BREAKDOWN, 0, x, y, trace, gamma, "lm",
                           time.perf_counter() - start)
    status = Status.MAX_ITER

    for j in range(opts.max_iter + 1):
        try:
            step, y = _compute_step(state, gamma, cfg)
        except NumericalBreakdown as exc:
            logger.warning("breakdown at iteration %d: %s", j, exc)
            status = Status.BREAKDOWN
            break
        ghat_norm = step.tangential.g_hat_norm
        l_now = state.lagrangian(y)
        if j == 0:
            mem.a0 = max(min(0.1 * max(1.0, state.c_norm), ghat_norm + state.c_norm),
                         np.finfo(float).tiny)
        mem.push(state.c_norm**2, l_now)
        rec = IterationRecord(j, state.f, state.c_norm, ghat_norm, gamma)
        trace.append(rec)
        if max(state.c_norm, ghat_norm) <= opts.tol:
            status = Status.CONVERGED
            break
        if j == opts.max_iter:
            break

        R, rec.k = update_R(mem, state.c_norm, ghat_norm, opts.alpha, opts.beta)
        rec.R = R
        accepted = False
        while True:
            try:
                t = recover_step(step.tangential.t_tilde, step.normal.n, state, gamma, cfg,
                                 step.projector)
                s = step.normal.n + t
                trial = evaluate(problem, x + s)
            except (EvaluationError, NumericalBreakdown) as exc:
                logger.info("trial step failed (%s); treating as rejection", exc)
                trial, inputs, decision = None, None, Decision.REJECT
            else:
                inputs = _acceptance_inputs(problem, state, trial, step, t, y, gamma, R,
                                            l_now, mem, opts)
                decision = decide(inputs)
            rec.attempts.append(Attempt(gamma, inputs, decision.value))
            _fill_record(rec, step, inputs, decision)
            if decision.accepted:
                accepted = True
                break
            gamma *= opts.gamma_hat2
            rec.inner_rej += 1
            if rec.inner_rej > opts.max_inner_rejections:
                break
            if opts.reentry == "step3":
                try:
                    step, _ = _compute_step(state, gamma, cfg, y)
                except NumericalBreakdown as exc:
                    logger.warning("breakdown recomputing the step: %s", exc)
                    break
        if not accepted:
            status = Status.BREAKDOWN
            break
        gamma = max(opts.gamma_min, opts.gamma_hat1 * gamma)
        x = trial.x
        state = trial

    return SolveReport(status, len(trace) - 1 if trace else 0, x, y, trace, gamma, "lm",
                       time.perf_counter() - start)


def _acceptance_inputs(problem, state, trial, step, t, y, gamma, R, l_now, mem, opts
                       ) -> AcceptanceInputs:
    n = step.normal.n
    tang = step.tangential
    H = regularized_normal_operator(state.jF, gamma)
    pred_c = max(step.normal.pred_c, 0.0)
    pred_t = tang.pred_t
    # m(0) - m(n + t_tilde) plus the correction for W(n) != n
    pred_l = (-0.5 * float(n @ H.matvec(n)) - float(tang.grad_lagrangian @ n) + pred_t
              + 0.5 * float((gamma * t + tang.g) @ (n - tang.W_n)))
    c_trial_sq = float(trial.C @ trial.C)
    l_trial = trial.lagrangian(y)
    return AcceptanceInputs(
        pred_c=pred_c,
        pred_t=pred_t,
        pred_l=pred_l,
        ared_c=0.5 * state.c_norm**2 - 0.5 * c_trial_sq,
        ared_l=l_now - l_trial,
        rared_c=rared_c(mem, R, c_trial_sq),
        rared_l=rared_l(mem, l_now, l_trial),
        rho1=opts.rho1,
        rho2=opts.rho2,
        xi=opts.xi,
    )


def _fill_record(rec, step, inputs, decision):
    if inputs is not None:
        for name in ("pred_c", "pred_t", "pred_l", "ared_c", "ared_l", "rared_c", "rared_l"):
            setattr(rec, name, getattr(inputs, name))
    rec.decision = decision.value if isinstance(decision, Decision) else decision
    rec.cg_n += step.normal.cg_iterations
    rec.cg_t += step.tangential.cg_iterations
    rec.minres_total += step.projector.iterations


def _advise_derivatives(problem, opts):
    if not opts.check_derivatives:
        return
    report = fd_check(problem, problem.x0, h=1e-6, n_dirs=3)
    if report.jF > 1e-4 or report.jC > 1e-4:
        logger.warning("%s: Jacobians disagree with finite differences (jF %.2e, jC %.2e)",
                       problem.name, report.jF, report.jC)


def gauss_newton_solve(problem: Problem, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Composite Gauss-Newton steps with ``gamma = 0``, all accepted unconditionally."""
    # divergence is an expected outcome here, not a warning
    with np.errstate(all="ignore"):
        return _gauss_newton(problem, opts)


def _gauss_newton(problem, opts):
    start = time.perf_counter()
    cfg = opts.step_config
    _advise_derivatives(problem, opts)
    x = np.array(problem.x0, dtype=float)
    y = np.zeros(problem.p)
    trace: list[IterationRecord] = []
    status = Status.MAX_ITER
    try:
        state = evaluate(problem, x)
    except EvaluationError:
        return SolveReport(Status.BREAKDOWN, 0, x, y, trace, 0.0, "gn",
                           time.perf_counter() - start)

    for j in range(opts.max_iter + 1):
        try:
            step, y = _compute_step(state, 0.0, cfg)
            rec = IterationRecord(j, state.f, state.c_norm, step.tangential.g_hat_norm, 0.0)
            trace.append(rec)
            if max(state.c_norm, rec.ghat_norm) <= opts.tol:
                status = Status.CONVERGED
                break
            if j == opts.max_iter:
                break
            t = recover_step(step.tangential.t_tilde, step.normal.n, state, 0.0, cfg,
                             step.projector)
            trial = evaluate(problem, x + step.normal.n + t)
        except (NumericalBreakdown, EvaluationError) as exc:
            logger.info("Gauss-Newton breakdown at iteration %d: %s", j, exc)
            status = Status.BREAKDOWN
            break
        rec.pred_c = step.normal.pred_c
        rec.pred_t = step.tangential.pred_t
        rec.ared_c = 0.5 * state.c_norm**2 - 0.5 * float(trial.C @ trial.C)
        rec.ared_l = state.lagrangian(y) - trial.lagrangian(y)
        rec.decision = "ACCEPT_GN"
        rec.cg_n = step.normal.cg_iterations
        rec.cg_t = step.tangential.cg_iterations
        rec.minres_total = step.projector.iterations
        x = trial.x
        state = trial

    return SolveReport(status, len(trace) - 1 if trace else 0, x, y, trace, 0.0, "gn",
                       time.perf_counter() - start)
