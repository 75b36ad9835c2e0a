"""Thin solver-facing wrapper around parameterized cvxpy conic programs.

An :class:`SdpInstance` is built once per fixed data block and re-solved for
different parameter values (DPP), which keeps the bisection loops cheap.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Any

import cvxpy as cp
import numpy as np

log = logging.getLogger(__name__)

DEFAULT_SOLVER = "CLARABEL"
SOLVER_OPTIONS: dict[str, dict[str, Any]] = {
    "CLARABEL": {"tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9, "tol_feas": 1e-9, "max_iter": 300},
    "SCS": {"eps": 1e-9, "max_iters": 100_000},
}


def solve_quietly(problem: cp.Problem, solver: str) -> None:
    """Solve with the configured options; inaccuracy is reported via status, not warnings."""
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Solution may be inaccurate")
        # raised from cvxpy's own canonicalization of 1 x 1 matrix programs
        warnings.filterwarnings("ignore", message="Initializing a Constant with a nested list")
        problem.solve(solver=solver, **SOLVER_OPTIONS.get(solver, {}))


class SolverFailure(RuntimeError):
    """The conic backend returned neither a solution nor an infeasibility certificate."""


@dataclass
class SdpResult:
    status: str  # "optimal" | "infeasible" | "failed"
    objective: float
    values: dict[str, np.ndarray] = field(default_factory=dict)
    inaccurate: bool = False

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


@dataclass
class SdpInstance:
    """A convex program over Hermitian PSD matrix variables plus scalar slacks.

    ``parameters`` are the knobs changed between solves (e.g. the rate target
    ``2^-R``); ``variables`` are read back after each solve.
    """

    problem: cp.Problem
    variables: dict[str, cp.Variable]
    parameters: dict[str, cp.Parameter]
    solver: str = DEFAULT_SOLVER

    @property
    def psd_variable_dims(self) -> list[int]:
        return [v.shape[0] for v in self.variables.values() if v.ndim == 2]

    @property
    def constraint_kinds(self) -> list[str]:
        kinds = []
        for c in self.problem.constraints:
            name = type(c).__name__
            kinds.append(
                {
                    "Equality": "linear-equality",
                    "Zero": "linear-equality",
                    "Inequality": "linear-inequality",
                    "NonPos": "linear-inequality",
                    "SOC": "second-order-cone",
                    "PSD": "linear-matrix-inequality",
                }.get(name, name)
            )
        return kinds

    def solve(self, **param_values: Any) -> SdpResult:
        for name, value in param_values.items():
            self.parameters[name].value = value
        try:
            solve_quietly(self.problem, self.solver)
        except cp.error.SolverError as exc:
            log.debug("solver error: %s", exc)
            return SdpResult("failed", float("nan"))
        status = self.problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return SdpResult("infeasible", float("inf"), inaccurate=status != cp.INFEASIBLE)
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            vals = {k: np.array(v.value) for k, v in self.variables.items()}
            return SdpResult("optimal", float(self.problem.value), vals, inaccurate=status != cp.OPTIMAL)
        return SdpResult("failed", float("nan"))
