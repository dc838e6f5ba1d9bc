import math

import numpy as np
import pytest

from lmec import evaluate, fd_check
from lmec.problems import (
    DAConfig,
    HS_IDS,
    SUPPORTED_HS,
    get_problem,
    lorenz_rhs,
    make_4dvar,
    make_hs,
    observe,
    rk4_step,
    suite,
)
from lmec.problems.lorenz import observe_derivative, propagate


class TestHS:
    def test_subset_size(self):
        assert len(SUPPORTED_HS) >= 10
        assert set(SUPPORTED_HS) <= set(HS_IDS)

    def test_unknown_and_unsupported(self):
        with pytest.raises(ValueError):
            make_hs(7)
        with pytest.raises(NotImplementedError, match="supported"):
            make_hs(65)

    @pytest.mark.parametrize("pid", SUPPORTED_HS)
    def test_dimensions(self, pid):
        prob = make_hs(pid)
        assert 2 <= prob.d <= 9
        assert 1 <= prob.p < prob.d

    @pytest.mark.parametrize("pid", SUPPORTED_HS)
    def test_derivatives_near_x0(self, pid):
        prob = make_hs(pid)
        rng = np.random.default_rng(pid)
        for x in [prob.x0] + [prob.x0 + 0.1 * rng.standard_normal(prob.d) for _ in range(5)]:
            assert fd_check(prob, x, h=1e-6).worst <= 1e-5

    def test_hs6_start(self):
        state = evaluate(make_hs(6), make_hs(6).x0)
        assert state.phi == pytest.approx(9.68)
        assert state.f == pytest.approx(2.2**2)

    def test_hs42_solution_value(self):
        # x* = (2, 2, 0.6 sqrt 2, 0.8 sqrt 2)
        prob = make_hs(42)
        x = np.array([2.0, 2.0, 0.6 * math.sqrt(2), 0.8 * math.sqrt(2)])
        state = evaluate(prob, x)
        assert state.f == pytest.approx(28 - 10 * math.sqrt(2))
        assert state.c_norm == pytest.approx(0.0, abs=1e-14)

    def test_s269_solution_value(self):
        # x* = (-33, 11, 27, -5, 11) / 43
        x = np.array([-33.0, 11.0, 27.0, -5.0, 11.0]) / 43
        state = evaluate(make_hs(269), x)
        assert state.f == pytest.approx(176 / 43)
        assert state.c_norm == pytest.approx(0.0, abs=1e-14)


class TestLorenz:
    def test_fixed_point(self):
        np.testing.assert_array_equal(lorenz_rhs(np.zeros(3)), np.zeros(3))

    def test_rhs_arithmetic(self):
        np.testing.assert_allclose(lorenz_rhs(np.ones(3)), [0.0, 26.0, 1 - 8 / 3])

    def test_chaos(self):
        # on the attractor; the leading Lyapunov exponent is about 0.9
        cfg = DAConfig()
        x = propagate(np.array([1.0, 1.0, 1.0]), 1000, cfg)[-1]
        dx = np.array([1e-8, 0.0, 0.0])
        sep = [np.linalg.norm(propagate(x, n, cfg)[-1] - propagate(x + dx, n, cfg)[-1])
               for n in (500, 2000)]
        assert sep[0] > 10 * 1e-8
        assert sep[1] > 1e-4

    def test_rk4_order(self):
        # halving dt cuts the one-step error by about 2^5
        x = np.array([1.0, 2.0, 20.0])
        ref = propagate(x, 64, DAConfig(dt=0.1 / 64))[-1]
        e1 = np.linalg.norm(rk4_step(x, DAConfig(dt=0.1)) - ref)
        e2 = np.linalg.norm(propagate(x, 2, DAConfig(dt=0.05))[-1] - ref)
        assert 16 < e1 / e2 < 64

    def test_observation_operator(self):
        assert observe(1.0, 3) == pytest.approx(0.55)
        assert observe(0.0, 3) == 0.0
        np.testing.assert_allclose(observe(-2.0, 3), -observe(2.0, 3))

    @pytest.mark.parametrize("g", [1, 3, 5])
    def test_observation_derivative(self, g):
        x = np.array([-2.0, -1e-3, 0.0, 1e-3, 0.7, 3.0])
        h = 1e-6
        fd = (observe(x + h, g) - observe(x - h, g)) / (2 * h)
        np.testing.assert_allclose(observe_derivative(x, g), fd, rtol=1e-6, atol=1e-8)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DAConfig(gamma_obs=2)
        with pytest.raises(ValueError):
            DAConfig(T=0)
        with pytest.raises(ValueError):
            DAConfig(dt=0.0)


class TestFourDVar:
    def test_dimensions(self):
        prob = make_4dvar(DAConfig(T=2))
        assert (prob.d, prob.m, prob.p) == (9, 12, 6)

    def test_propagated_trajectory_is_feasible(self):
        cfg = DAConfig(T=2)
        prob = make_4dvar(cfg)
        x = propagate(np.array([0.5, -1.0, 3.0]), cfg.T, cfg).ravel()
        assert evaluate(prob, x).c_norm <= 1e-12
        assert evaluate(prob, prob.x0).c_norm <= 1e-12

    def test_truth_is_feasible(self):
        prob = make_4dvar(DAConfig(T=45))
        assert evaluate(prob, prob.info["truth"]).c_norm <= 1e-12

    def test_residual_layout(self):
        cfg = DAConfig(T=3, seed=4)
        prob = make_4dvar(cfg)
        x = np.random.default_rng(0).standard_normal(prob.d)
        F = prob.F(x)
        np.testing.assert_allclose(F[:3], x[:3] - prob.info["xb"])
        np.testing.assert_allclose(F[3:], (prob.info["obs"] - observe(x.reshape(4, 3), 3)).ravel())

    def test_seeded(self):
        a, b = make_4dvar(DAConfig(seed=3)), make_4dvar(DAConfig(seed=3))
        np.testing.assert_array_equal(a.info["obs"], b.info["obs"])
        assert not np.array_equal(a.info["obs"], make_4dvar(DAConfig(seed=4)).info["obs"])

    @pytest.mark.parametrize("T", [1, 2, 3])
    def test_full_row_rank(self, T):
        prob = make_4dvar(DAConfig(T=T))
        rng = np.random.default_rng(T)
        for _ in range(3):
            JC = prob.jC(10 * rng.standard_normal(prob.d)).to_dense()
            assert np.linalg.svd(JC, compute_uv=False).min() > 0.1

    @pytest.mark.parametrize("T", [2, 15])
    def test_derivatives(self, T):
        prob = make_4dvar(DAConfig(T=T, gamma_obs=5))
        rng = np.random.default_rng(0)
        for _ in range(5):
            assert fd_check(prob, prob.x0 + rng.standard_normal(prob.d), h=1e-6).worst <= 1e-5


class TestRegistry:
    def test_names(self):
        assert get_problem("HS6").name == "hs6"
        assert get_problem("da:T=3,gobs=5,seed=2").name == "da:T=3,gobs=5,seed=2"
        assert get_problem("da:T=3,dt=0.02").name == "da:T=3,gobs=3,seed=7,dt=0.02"

    @pytest.mark.parametrize("bad", ["hsx", "foo", "da:T=3,zzz=1"])
    def test_bad_names(self, bad):
        with pytest.raises(ValueError):
            get_problem(bad)

    def test_suite_expansion(self):
        assert suite("hs") == [f"hs{i}" for i in SUPPORTED_HS]
        assert suite("da", seed=3) == ["da:T=45,gobs=3,seed=3"]
        assert suite("hs6,da:T=2,gobs=5,hs77") == ["hs6", "da:T=2,gobs=5", "hs77"]
        assert len(suite("all")) == len(SUPPORTED_HS) + 1
