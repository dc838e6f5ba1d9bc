"""Strong-constraint 4DVAR on the Lorenz-63 system.

Variables are the stacked states ``(x_0, ..., x_T)`` in ``R^{3(T+1)}``.  The
residual stacks the background misfit ``x_0 - x_b`` and the innovations
``y_i - H(x_i)`` for ``i = 0..T``; the constraints are ``x_i - M(x_{i-1})`` for
``i = 1..T`` where ``M`` is one RK4 step.  Background and observation error
covariances are identities, so no whitening is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linops import LinearOperator
from ..model import Problem


@dataclass(frozen=True)
class DAConfig:
    T: int = 45
    gamma_obs: int = 3
    sigma: float = 10.0
    rho: float = 28.0
    beta_lorenz: float = 8.0 / 3.0
    dt: float = 0.01
    seed: int = 7
    spinup: int = 1000

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("the horizon T must be at least 1")
        if self.gamma_obs < 1 or self.gamma_obs % 2 == 0:
            raise ValueError("gamma_obs must be an odd positive integer")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def lorenz_rhs(x, cfg: DAConfig = DAConfig()) -> np.ndarray:
    """Lorenz-63 vector field; works on arrays of shape ``(..., 3)``."""
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([cfg.sigma * (x2 - x1),
                     x1 * (cfg.rho - x3) - x2,
                     x1 * x2 - cfg.beta_lorenz * x3], axis=-1)


def lorenz_jacobian(x, cfg: DAConfig = DAConfig()) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    J = np.zeros(x.shape + (3,))
    J[..., 0, 0] = -cfg.sigma
    J[..., 0, 1] = cfg.sigma
    J[..., 1, 0] = cfg.rho - x3
    J[..., 1, 1] = -1.0
    J[..., 1, 2] = -x1
    J[..., 2, 0] = x2
    J[..., 2, 1] = x1
    J[..., 2, 2] = -cfg.beta_lorenz
    return J


def rk4_step(x, cfg: DAConfig = DAConfig()) -> np.ndarray:
    h = cfg.dt
    k1 = lorenz_rhs(x, cfg)
    k2 = lorenz_rhs(x + 0.5 * h * k1, cfg)
    k3 = lorenz_rhs(x + 0.5 * h * k2, cfg)
    k4 = lorenz_rhs(x + h * k3, cfg)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_tangent(x, cfg: DAConfig = DAConfig()) -> np.ndarray:
    """Jacobian of :func:`rk4_step`, shape ``(..., 3, 3)``."""
    h = cfg.dt
    x = np.asarray(x, dtype=float)
    eye = np.broadcast_to(np.eye(3), x.shape + (3,))
    k1 = lorenz_rhs(x, cfg)
    x2 = x + 0.5 * h * k1
    k2 = lorenz_rhs(x2, cfg)
    x3 = x + 0.5 * h * k2
    k3 = lorenz_rhs(x3, cfg)
    x4 = x + h * k3
    d1 = lorenz_jacobian(x, cfg)
    d2 = lorenz_jacobian(x2, cfg) @ (eye + 0.5 * h * d1)
    d3 = lorenz_jacobian(x3, cfg) @ (eye + 0.5 * h * d2)
    d4 = lorenz_jacobian(x4, cfg) @ (eye + h * d3)
    return eye + h / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)


def observe(x, gamma_obs: int) -> np.ndarray:
    """Componentwise ``x/2 (1 + |x|^(gamma_obs - 1) / 10)``."""
    x = np.asarray(x, dtype=float)
    return 0.5 * x * (1.0 + np.abs(x) ** (gamma_obs - 1) / 10.0)


def observe_derivative(x, gamma_obs: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 0.5 + gamma_obs * np.abs(x) ** (gamma_obs - 1) / 20.0


def propagate(x0, steps: int, cfg: DAConfig = DAConfig()) -> np.ndarray:
    """Trajectory of ``steps`` RK4 steps from ``x0``; shape ``(steps + 1, 3)``."""
    traj = np.empty((steps + 1, 3))
    traj[0] = x0
    for i in range(steps):
        traj[i + 1] = rk4_step(traj[i], cfg)
    return traj


def twin_experiment(cfg: DAConfig):
    """Seeded truth trajectory, background state and noisy observations."""
    rng = np.random.default_rng(cfg.seed)
    start = np.array([1.0, 1.0, 1.0]) + rng.standard_normal(3)
    truth0 = propagate(start, cfg.spinup, cfg)[-1]
    truth = propagate(truth0, cfg.T, cfg)
    xb = truth0 + rng.standard_normal(3)
    obs = observe(truth, cfg.gamma_obs) + rng.standard_normal(truth.shape)
    return truth, xb, obs


def make_4dvar(cfg: DAConfig = DAConfig(), name: str | None = None) -> Problem:
    """Build the 4DVAR problem; the start is the background propagated by the model."""
    T, g = cfg.T, cfg.gamma_obs
    truth, xb, obs = twin_experiment(cfg)
    d, m, p = 3 * (T + 1), 3 + 3 * (T + 1), 3 * T

    def states(x):
        return np.asarray(x, dtype=float).reshape(T + 1, 3)

    def F(x):
        X = states(x)
        return np.concatenate([X[0] - xb, (obs - observe(X, g)).ravel()])

    def C(x):
        X = states(x)
        return (X[1:] - rk4_step(X[:-1], cfg)).ravel()

    def jF(x):
        Hp = observe_derivative(states(x), g)

        def mv(v):
            V = v.reshape(T + 1, 3)
            return np.concatenate([V[0], (-Hp * V).ravel()])

        def rmv(u):
            out = (-Hp * u[3:].reshape(T + 1, 3))
            out[0] += u[:3]
            return out.ravel()

        return LinearOperator(d, m, mv, rmv)

    def jC(x):
        Mp = rk4_tangent(states(x)[:-1], cfg)

        def mv(v):
            V = v.reshape(T + 1, 3)
            return (V[1:] - np.einsum("tij,tj->ti", Mp, V[:-1])).ravel()

        def rmv(w):
            W = w.reshape(T, 3)
            out = np.zeros((T + 1, 3))
            out[1:] += W
            out[:-1] -= np.einsum("tji,tj->ti", Mp, W)
            return out.ravel()

        return LinearOperator(d, p, mv, rmv)

    x0 = propagate(xb, T, cfg).ravel()
    return Problem(
        name=name or f"da:T={T},gobs={g},seed={cfg.seed}",
        d=d, m=m, p=p, F=F, C=C, jF=jF, jC=jC, x0=x0,
        info={"truth": truth.ravel(), "xb": xb, "obs": obs, "config": cfg},
    )
