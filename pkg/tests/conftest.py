import numpy as np
import pytest

from lmec import IterateState, LinearOperator, Problem, SolverOptions, solve
from lmec.problems import DEFAULT_DA, SUPPORTED_HS, get_problem


def dense_state(JF, JC, F, C, x=None):
    """IterateState built from explicit matrices and residuals."""
    JF, JC = np.atleast_2d(np.asarray(JF, float)), np.atleast_2d(np.asarray(JC, float))
    x = np.zeros(JC.shape[1]) if x is None else np.asarray(x, float)
    return IterateState(x=x, F=np.asarray(F, float), C=np.asarray(C, float),
                        jF=LinearOperator.from_matrix(JF), jC=LinearOperator.from_matrix(JC))


def random_state(rng, d, p, m):
    JC = rng.standard_normal((p, d))
    JF = rng.standard_normal((m, d))
    return dense_state(JF, JC, rng.standard_normal(m), rng.standard_normal(p)), JF, JC


def dense_projector(JC):
    return np.eye(JC.shape[1]) - JC.T @ np.linalg.solve(JC @ JC.T, JC)


def nullspace_basis(JC):
    _, s, vt = np.linalg.svd(JC)
    return vt[len(s):].T


def linear_problem(A, b, Cmat, c, x0, name="linear"):
    """F(x) = A x - b, C(x) = Cmat x - c."""
    A, b, Cmat, c = (np.atleast_2d(np.asarray(A, float)), np.asarray(b, float),
                     np.atleast_2d(np.asarray(Cmat, float)), np.asarray(c, float))
    return Problem(name=name, d=A.shape[1], m=A.shape[0], p=Cmat.shape[0],
                   F=lambda x: A @ x - b, C=lambda x: Cmat @ x - c,
                   jF=lambda x: LinearOperator.from_matrix(A),
                   jC=lambda x: LinearOperator.from_matrix(Cmat),
                   x0=np.asarray(x0, float))


@pytest.fixture(scope="session")
def hs_runs():
    """LM and GN reports for every supported HS problem at tol 1e-6."""
    out = {}
    for pid in SUPPORTED_HS:
        prob = get_problem(f"hs{pid}")
        for mode in ("lm", "gn"):
            out[prob.name, mode] = solve(prob, SolverOptions(mode=mode, tol=1e-6, max_iter=1000))
    return out


@pytest.fixture(scope="session")
def da_runs():
    """LM (200 iterations) and GN (1000 iterations) on the seeded 4DVAR instance."""
    prob = get_problem(DEFAULT_DA)
    return {
        "lm": solve(prob, SolverOptions(mode="lm", tol=1e-4, max_iter=200)),
        "gn": solve(prob, SolverOptions(mode="gn", tol=1e-4, max_iter=1000)),
    }
