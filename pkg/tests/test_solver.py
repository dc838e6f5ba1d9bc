import json

import numpy as np
import pytest

from lmec import LinearOperator, Problem, SolverOptions, Status, gauss_newton_solve, solve
from lmec.acceptance import decide
from lmec.solver import TRACE_FIELDS, multiplier_estimate, stationarity

from conftest import dense_state, linear_problem


def line_problem(x0=(0.0, 0.0)):
    """min 1/2 ||x - (1, 1)||^2 s.t. x1 = x2; solution (1, 1)."""
    return linear_problem(np.eye(2), [1.0, 1.0], [[1.0, -1.0]], [0.0], x0)


def sphere_problem():
    """Nonlinear residual, linear constraint sum(x) = 3, feasible start."""
    return Problem(
        "sphere", 3, 3, 1,
        F=lambda x: np.array([x[0] ** 2 - 1, x[1] - 2, x[2]]),
        C=lambda x: np.array([x.sum() - 3]),
        jF=lambda x: LinearOperator.from_matrix([[2 * x[0], 0, 0], [0, 1.0, 0], [0, 0, 1.0]]),
        jC=lambda x: LinearOperator.from_matrix([[1.0, 1.0, 1.0]]),
        x0=np.array([1.0, 1.0, 1.0]),
    )


class TestOptions:
    @pytest.mark.parametrize("kw", [dict(gamma_hat1=1.2), dict(gamma_hat2=0.5), dict(alpha=0.6),
                                    dict(xi=0.5), dict(tol=0.0), dict(mode="newton"),
                                    dict(reentry="step5"), dict(rho1=1.0)])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverOptions(**kw)

    def test_defaults(self):
        o = SolverOptions()
        assert (o.rho1, o.rho2, o.gamma_hat1, o.gamma_hat2) == (1e-2, 1e-2, 0.9, 2.0)
        assert (o.alpha, o.beta, o.xi, o.gamma_min, o.gamma0) == (0.1, 0.1, 0.75, 1e-16, 1.0)
        assert (o.nu, o.mu, o.max_iter, o.max_inner_rejections) == (5, 1e-3, 1000, 50)


class TestMultipliers:
    def test_identity_constraint_jacobian(self):
        state = dense_state(np.eye(2), np.eye(2), [1.0, 2.0], [0.0, 0.0])
        np.testing.assert_allclose(multiplier_estimate(state, np.zeros(2), 1.0), [-1.0, -2.0],
                                   atol=1e-10)

    def test_orthogonal_gradient(self):
        state = dense_state(np.eye(2), [[1.0, 0.0]], [0.0, 3.0], [0.0])
        np.testing.assert_allclose(multiplier_estimate(state, np.zeros(2), 1.0), [0.0], atol=1e-14)

    def test_random_against_lstsq(self):
        rng = np.random.default_rng(0)
        JF, JC = rng.standard_normal((4, 5)), rng.standard_normal((2, 5))
        state = dense_state(JF, JC, rng.standard_normal(4), rng.standard_normal(2))
        n, gamma = rng.standard_normal(5), 0.4
        gbar = JF.T @ state.F + (JF.T @ JF + gamma * np.eye(5)) @ n
        y_ref = np.linalg.lstsq(JC.T, -gbar, rcond=None)[0]
        np.testing.assert_allclose(multiplier_estimate(state, n, gamma), y_ref, atol=1e-6)


class TestSolve:
    def test_linear_problem(self):
        report = solve(line_problem())
        assert report.status is Status.CONVERGED
        assert report.iterations <= 15
        np.testing.assert_allclose(report.x, [1.0, 1.0], atol=1e-6)

    def test_optimal_start(self):
        report = solve(line_problem((1.0, 1.0)))
        assert report.converged and report.iterations <= 1
        np.testing.assert_allclose(report.x, [1.0, 1.0], atol=1e-6)

    def test_hs6(self):
        from lmec.problems import get_problem
        report = solve(get_problem("hs6"), SolverOptions(tol=1e-6))
        assert report.converged
        np.testing.assert_allclose(report.x, [1.0, 1.0], atol=1e-5)

    def test_converged_report_rechecked(self):
        prob = sphere_problem()
        report = solve(prob)
        assert report.converged
        c, g = stationarity(prob, report.x, report.gamma)
        assert max(c, g) <= SolverOptions().tol

    def test_linear_constraints_stay_feasible(self):
        report = solve(sphere_problem())
        assert report.converged
        assert max(r.c_norm for r in report.trace) <= 10 * SolverOptions().tol

    def test_step4_reentry(self):
        report = solve(sphere_problem(), SolverOptions(reentry="step4"))
        assert report.converged

    def test_failed_trial_counts_as_rejection(self):
        # residual undefined for x1 > 1.5; the first full step lands at (3, 3)
        prob = Problem(
            "wall", 2, 2, 1,
            F=lambda x: np.array([np.inf if x[0] > 1.5 else 10 * (x[0] - 3), 10 * (x[1] - 3)]),
            C=lambda x: np.array([x[0] - x[1]]),
            jF=lambda x: LinearOperator.from_matrix(10 * np.eye(2)),
            jC=lambda x: LinearOperator.from_matrix([[1.0, -1.0]]),
            x0=np.array([0.0, 0.0]),
        )
        report = solve(prob, SolverOptions(gamma0=1e-3, max_iter=50, check_derivatives=False))
        attempts = [a for r in report.trace for a in r.attempts]
        assert any(a.inputs is None and a.decision == "REJECT" for a in attempts)
        assert all(np.isfinite(r.f) for r in report.trace)

    def test_rejection_budget_gives_breakdown(self):
        prob = Problem(
            "cliff", 2, 1, 1,
            F=lambda x: np.array([np.inf if np.any(x != 0) else 1.0]),
            C=lambda x: np.array([x[0]]),
            jF=lambda x: LinearOperator.from_matrix([[0.0, 1.0]]),
            jC=lambda x: LinearOperator.from_matrix([[1.0, 0.0]]),
            x0=np.zeros(2),
        )
        report = solve(prob, SolverOptions(max_inner_rejections=3, check_derivatives=False))
        assert report.status is Status.BREAKDOWN
        assert report.trace[-1].inner_rej == 4

    def test_max_iter(self):
        from lmec.problems import get_problem
        report = solve(get_problem("hs26"), SolverOptions(max_iter=3))
        assert report.status is Status.MAX_ITER and report.iterations == 3

    def test_gamma_and_replay(self):
        report = solve(sphere_problem(), SolverOptions(gamma0=10.0))
        opts = SolverOptions()
        for rec, nxt in zip(report.trace, report.trace[1:]):
            for a in rec.attempts:
                assert a.gamma >= opts.gamma_min
                if a.inputs is not None:
                    assert decide(a.inputs).value == a.decision
            assert nxt.gamma == max(opts.gamma_min, opts.gamma_hat1 * rec.attempts[-1].gamma)

    def test_write_trace(self, tmp_path):
        report = solve(line_problem())
        path = tmp_path / "trace.jsonl"
        report.write_trace(path)
        lines = [json.loads(s) for s in path.read_text().splitlines()]
        assert len(lines) == len(report.trace)
        assert all(tuple(rec) == TRACE_FIELDS for rec in lines)
        assert lines[0]["decision"] in ("ACCEPT_FULL", "ACCEPT_FEAS")


class TestGaussNewton:
    def test_linear_one_iteration(self):
        report = gauss_newton_solve(line_problem())
        assert report.converged and report.iterations == 1
        np.testing.assert_allclose(report.x, [1.0, 1.0], atol=1e-8)

    def test_mode_dispatch(self):
        report = solve(line_problem(), SolverOptions(mode="gn"))
        assert report.solver == "gn"
        assert all(r.gamma == 0.0 for r in report.trace)

    def test_every_step_accepted(self):
        report = gauss_newton_solve(sphere_problem())
        assert all(r.decision == "ACCEPT_GN" for r in report.trace[:-1])
