"""Matrix-free nonmonotone Levenberg-Marquardt for equality-constrained least squares."""

from .acceptance import AcceptanceInputs, Decision, NonmonotoneMemory, decide
from .linops import (
    ContractViolation,
    KrylovResult,
    LinearOperator,
    NumericalBreakdown,
    cg_solve,
    minres_solve,
    regularized_normal_operator,
)
from .model import EvaluationError, IterateState, Problem, evaluate, fd_check
from .solver import SolveReport, SolverOptions, Status, gauss_newton_solve, solve
from .steps import StepConfig

__version__ = "0.1.0"
