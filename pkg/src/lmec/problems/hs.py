"""Hock-Schittkowski / Schittkowski problems in least-squares form.

Each objective is written as ``1/2 ||F||^2`` with ``F`` stacking ``sqrt(2)``
times the square roots of the collection's sum-of-squares terms, so ``f``
matches the published objective value.  Bounds in the original statements are
dropped; none is active at the reported solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..linops import LinearOperator
from ..model import Problem

HS_IDS = (6, 26, 42, 47, 60, 65, 77, 79, 216, 235, 249, 252, 269, 316, 317, 318, 322, 344,
          345, 373)

S2 = math.sqrt(2.0)


@dataclass(frozen=True)
class _HSDef:
    F: Callable
    JF: Callable
    C: Callable
    JC: Callable
    x0: tuple
    f_star: float


def _a(*rows):
    return np.array(rows, dtype=float)


def _hs6():
    return _HSDef(
        F=lambda x: _a(S2 * (1 - x[0])),
        JF=lambda x: _a([-S2, 0.0]),
        C=lambda x: _a(10 * (x[1] - x[0] ** 2)),
        JC=lambda x: _a([-20 * x[0], 10.0]),
        x0=(-1.2, 1.0),
        f_star=0.0,
    )


def _hs26():
    return _HSDef(
        F=lambda x: S2 * _a(x[0] - x[1], (x[1] - x[2]) ** 2),
        JF=lambda x: S2 * _a([1.0, -1.0, 0.0],
                             [0.0, 2 * (x[1] - x[2]), -2 * (x[1] - x[2])]),
        C=lambda x: _a((1 + x[1] ** 2) * x[0] + x[2] ** 4 - 3),
        JC=lambda x: _a([1 + x[1] ** 2, 2 * x[0] * x[1], 4 * x[2] ** 3]),
        x0=(-2.6, 2.0, 2.0),
        f_star=0.0,
    )


def _hs42():
    return _HSDef(
        F=lambda x: S2 * (x - _a(1, 2, 3, 4)),
        JF=lambda x: S2 * np.eye(4),
        C=lambda x: _a(x[0] - 2, x[2] ** 2 + x[3] ** 2 - 2),
        JC=lambda x: _a([1.0, 0, 0, 0], [0, 0, 2 * x[2], 2 * x[3]]),
        x0=(1.0, 1.0, 1.0, 1.0),
        f_star=28 - 10 * S2,
    )


def _hs47():
    # the odd-power term of the original objective is squared to stay a least-squares form
    return _HSDef(
        F=lambda x: S2 * _a(x[0] - x[1], x[1] - x[2], (x[2] - x[3]) ** 2, (x[3] - x[4]) ** 2),
        JF=lambda x: S2 * _a([1.0, -1, 0, 0, 0],
                             [0, 1.0, -1, 0, 0],
                             [0, 0, 2 * (x[2] - x[3]), -2 * (x[2] - x[3]), 0],
                             [0, 0, 0, 2 * (x[3] - x[4]), -2 * (x[3] - x[4])]),
        C=lambda x: _a(x[0] + x[1] ** 2 + x[2] ** 3 - 3,
                       x[1] - x[2] ** 2 + x[3] - 1,
                       x[0] * x[4] - 1),
        JC=lambda x: _a([1.0, 2 * x[1], 3 * x[2] ** 2, 0, 0],
                        [0, 1.0, -2 * x[2], 1.0, 0],
                        [x[4], 0, 0, 0, x[0]]),
        x0=(2.0, S2, -1.0, 2 - S2, 0.5),
        f_star=0.0,
    )


def _hs60():
    return _HSDef(
        F=lambda x: S2 * _a(x[0] - 1, x[0] - x[1], (x[1] - x[2]) ** 2),
        JF=lambda x: S2 * _a([1.0, 0, 0], [1.0, -1, 0],
                             [0, 2 * (x[1] - x[2]), -2 * (x[1] - x[2])]),
        C=lambda x: _a(x[0] * (1 + x[1] ** 2) + x[2] ** 4 - 4 - 3 * S2),
        JC=lambda x: _a([1 + x[1] ** 2, 2 * x[0] * x[1], 4 * x[2] ** 3]),
        x0=(2.0, 2.0, 2.0),
        f_star=0.0325682002513,
    )


def _hs77():
    return _HSDef(
        F=lambda x: S2 * _a(x[0] - 1, x[0] - x[1], x[2] - 1, (x[3] - 1) ** 2, (x[4] - 1) ** 3),
        JF=lambda x: S2 * _a([1.0, 0, 0, 0, 0], [1.0, -1, 0, 0, 0], [0, 0, 1.0, 0, 0],
                             [0, 0, 0, 2 * (x[3] - 1), 0], [0, 0, 0, 0, 3 * (x[4] - 1) ** 2]),
        C=lambda x: _a(x[0] ** 2 * x[3] + math.sin(x[3] - x[4]) - 2 * S2,
                       x[1] + x[2] ** 4 * x[3] ** 2 - 8 - S2),
        JC=lambda x: _a([2 * x[0] * x[3], 0, 0, x[0] ** 2 + math.cos(x[3] - x[4]),
                         -math.cos(x[3] - x[4])],
                        [0, 1.0, 4 * x[2] ** 3 * x[3] ** 2, 2 * x[2] ** 4 * x[3], 0]),
        x0=(2.0,) * 5,
        f_star=0.24150513,
    )


def _hs79():
    return _HSDef(
        F=lambda x: S2 * _a(x[0] - 1, x[0] - x[1], x[1] - x[2], (x[2] - x[3]) ** 2,
                            (x[3] - x[4]) ** 2),
        JF=lambda x: S2 * _a([1.0, 0, 0, 0, 0], [1.0, -1, 0, 0, 0], [0, 1.0, -1, 0, 0],
                             [0, 0, 2 * (x[2] - x[3]), -2 * (x[2] - x[3]), 0],
                             [0, 0, 0, 2 * (x[3] - x[4]), -2 * (x[3] - x[4])]),
        C=lambda x: _a(x[0] + x[1] ** 2 + x[2] ** 3 - 2 - 3 * S2,
                       x[1] - x[2] ** 2 + x[3] + 2 - 2 * S2,
                       x[0] * x[4] - 2),
        JC=lambda x: _a([1.0, 2 * x[1], 3 * x[2] ** 2, 0, 0],
                        [0, 1.0, -2 * x[2], 1.0, 0],
                        [x[4], 0, 0, 0, x[0]]),
        x0=(2.0,) * 5,
        f_star=0.0,
    )


def _s216():
    return _HSDef(
        F=lambda x: S2 * _a(10 * (x[0] ** 2 - x[1]), x[0] - 1),
        JF=lambda x: S2 * _a([20 * x[0], -10.0], [1.0, 0.0]),
        C=lambda x: _a(x[0] * (x[0] - 4) - 2 * x[1] + 12),
        JC=lambda x: _a([2 * x[0] - 4, -2.0]),
        x0=(-1.2, 1.0),
        f_star=1.0,
    )


def _s235():
    return _HSDef(
        F=lambda x: S2 * _a(x[1] - x[0] ** 2, 0.1 * (x[0] - 1)),
        JF=lambda x: S2 * _a([-2 * x[0], 1.0, 0.0], [0.1, 0.0, 0.0]),
        C=lambda x: _a(x[0] + x[2] ** 2 + 1),
        JC=lambda x: _a([1.0, 0.0, 2 * x[2]]),
        x0=(-2.0, 3.0, 1.0),
        f_star=0.04,
    )


def _s252():
    return _HSDef(
        F=lambda x: S2 * _a(0.1 * (x[0] - 1), x[1] - x[0] ** 2),
        JF=lambda x: S2 * _a([0.1, 0.0, 0.0], [-2 * x[0], 1.0, 0.0]),
        C=lambda x: _a(x[0] + x[2] ** 2 + 1),
        JC=lambda x: _a([1.0, 0.0, 2 * x[2]]),
        x0=(-1.0, 2.0, 2.0),
        f_star=0.04,
    )


def _s269():
    return _HSDef(
        F=lambda x: S2 * _a(x[0] - x[1], x[1] + x[2] - 2, x[3] - 1, x[4] - 1),
        JF=lambda x: S2 * _a([1.0, -1, 0, 0, 0], [0, 1.0, 1, 0, 0], [0, 0, 0, 1.0, 0],
                             [0, 0, 0, 0, 1.0]),
        C=lambda x: _a(x[0] + 3 * x[1], x[2] + x[3] - 2 * x[4], x[1] - x[4]),
        JC=lambda x: _a([1.0, 3, 0, 0, 0], [0, 0, 1.0, 1, -2], [0, 1.0, 0, 0, -1]),
        x0=(2.0,) * 5,
        f_star=176 / 43,
    )


_BUILDERS = {
    6: _hs6, 26: _hs26, 42: _hs42, 47: _hs47, 60: _hs60, 77: _hs77, 79: _hs79,
    216: _s216, 235: _s235, 252: _s252, 269: _s269,
}

SUPPORTED_HS = tuple(sorted(_BUILDERS))


def _op_factory(jac):
    def factory(x):
        return LinearOperator.from_matrix(np.atleast_2d(jac(np.asarray(x, dtype=float))))
    return factory


def make_hs(pid: int) -> Problem:
    """Build problem ``pid`` with analytic Jacobian actions and its standard start."""
    if pid not in HS_IDS:
        raise ValueError(f"{pid} is not in the benchmark list {HS_IDS}")
    if pid not in _BUILDERS:
        raise NotImplementedError(f"problem {pid} is not available; supported: {SUPPORTED_HS}")
    spec = _BUILDERS[pid]()
    x0 = np.array(spec.x0, dtype=float)
    F0, C0 = spec.F(x0), spec.C(x0)
    return Problem(
        name=f"hs{pid}",
        d=x0.size,
        m=np.atleast_1d(F0).size,
        p=np.atleast_1d(C0).size,
        F=lambda x: np.atleast_1d(spec.F(x)),
        C=lambda x: np.atleast_1d(spec.C(x)),
        jF=_op_factory(spec.JF),
        jC=_op_factory(spec.JC),
        x0=x0,
        info={"f_star": spec.f_star},
    )
