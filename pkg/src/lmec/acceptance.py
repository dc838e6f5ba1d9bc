"""Nonmonotone step acceptance.

Reductions of the constraint violation ``phi = 1/2 ||C||^2`` and of the
Lagrangian are compared with their model predictions.  The "relaxed" actual
reductions measure progress against the larger of the current value and a
weighted average over the last ``nu`` iterates, so either quantity may rise
temporarily.  The reference level ``R`` lets feasibility slip further when the
reduced gradient dominates, bounded by the slowly vanishing sequence ``a_k``.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from .linops import ContractViolation


class Decision(str, enum.Enum):
    ACCEPT_FULL = "ACCEPT_FULL"
    ACCEPT_FEAS = "ACCEPT_FEAS"
    REJECT = "REJECT"

    @property
    def accepted(self) -> bool:
        return self is not Decision.REJECT


def a_k(k: int, a0: float) -> float:
    """``a0 / sqrt(k + 1)``."""
    if k < 0 or a0 <= 0:
        raise ContractViolation("a_k needs k >= 0 and a0 > 0")
    return a0 * (k + 1) ** -0.5


@dataclass
class NonmonotoneMemory:
    """Bounded histories of ``||C||^2`` and Lagrangian values plus the R/k state.

    Histories use uniform weights ``1 / len(buffer)``; newest entries are
    appended on the right.
    """

    nu: int = 5
    mu: float = 1e-3
    a0: float = 1.0
    k_counter: int = 0
    R_last: float = float("nan")
    c_history: deque = field(default=None)
    l_history: deque = field(default=None)

    def __post_init__(self):
        if self.nu < 1:
            raise ValueError("nu must be a positive integer")
        if not 0 < self.mu <= 1.0 / self.nu:
            raise ValueError(f"uniform weights 1/{self.nu} must dominate mu={self.mu}")
        self.c_history = deque(self.c_history or (), maxlen=self.nu)
        self.l_history = deque(self.l_history or (), maxlen=self.nu)

    def push(self, c_norm_sq: float, lagrangian: float) -> None:
        self.c_history.append(float(c_norm_sq))
        self.l_history.append(float(lagrangian))

    @staticmethod
    def _average(buf) -> float:
        if not buf:
            raise ContractViolation("nonmonotone history is empty")
        return sum(buf) / len(buf)

    @property
    def c_average(self) -> float:
        return self._average(self.c_history)

    @property
    def l_average(self) -> float:
        return self._average(self.l_history)

    @property
    def weights(self) -> list[float]:
        n = len(self.c_history)
        return [1.0 / n] * n

    def update_R(self, c_norm: float, g_hat_norm: float, alpha: float, beta: float
                 ) -> tuple[float, int]:
        if c_norm < 0 or g_hat_norm < 0:
            raise ContractViolation("norms must be non-negative")
        a = a_k(self.k_counter, self.a0)
        k_next = self.k_counter
        if c_norm < min(alpha * a, beta * g_hat_norm):
            R = min(a * a, g_hat_norm**2)
            if R >= self.c_average:
                k_next += 1
        else:
            R = c_norm**2
        self.R_last = R
        self.k_counter = k_next
        return R, k_next


def update_R(mem: NonmonotoneMemory, c_norm: float, g_hat_norm: float,
             alpha: float, beta: float) -> tuple[float, int]:
    """Reference level for the relaxed constraint reduction.

    When ``||C|| < min(alpha a_k, beta ||g_hat||)`` the level is raised to
    ``min(a_k^2, ||g_hat||^2)`` and ``k`` advances if that exceeds the history
    average; otherwise ``R = ||C||^2``.  Updates ``mem`` in place.
    """
    return mem.update_R(c_norm, g_hat_norm, alpha, beta)


def rared_c(mem: NonmonotoneMemory, R: float, c_trial_sq: float) -> float:
    return 0.5 * max(R, mem.c_average) - 0.5 * c_trial_sq


def rared_l(mem: NonmonotoneMemory, l_now: float, l_trial: float) -> float:
    return max(l_now, mem.l_average) - l_trial


@dataclass(frozen=True)
class AcceptanceInputs:
    pred_c: float
    pred_t: float
    pred_l: float
    ared_c: float
    ared_l: float
    rared_c: float
    rared_l: float
    rho1: float = 1e-2
    rho2: float = 1e-2
    xi: float = 0.75


def decide(inputs: AcceptanceInputs) -> Decision:
    """Classify a trial step.

    Full acceptance needs the tangential prediction to dominate the normal one
    and both relaxed reductions to be sufficient; when the tangential
    prediction is weak, the step is still accepted on feasibility progress.
    """
    q = inputs
    if q.pred_c < 0:
        raise ContractViolation(f"pred_c must be non-negative, got {q.pred_c}")
    tangential_dominates = (q.pred_t >= max(q.pred_c, q.pred_c**q.xi)
                            and q.pred_l >= q.rho2 * q.pred_t)
    feasibility_ok = q.rared_c >= q.rho1 * q.pred_c
    if tangential_dominates:
        if feasibility_ok and q.rared_l >= q.rho1 * q.pred_l:
            return Decision.ACCEPT_FULL
        return Decision.REJECT
    return Decision.ACCEPT_FEAS if feasibility_ok else Decision.REJECT
