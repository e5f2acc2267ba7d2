"""Semidefinite feasibility oracle: one contract isolating all solver specifics.

Every claimed-feasible assignment is re-verified by direct eigenvalue checks;
solver status strings are never trusted on their own.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .lmi import LmiProblem, default_margin

DEFAULT_SOLVER = "CLARABEL"  # deterministic interior-point method


class FeasibilityStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    MARGINAL = "marginal"
    SOLVER_FAILURE = "solver_failure"


@dataclass
class FeasibilityResult:
    status: FeasibilityStatus
    values: dict | None
    achieved_margin: float | None  # most positive lambda_max over all constraints
    solver_diagnostics: str = ""
    meta: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.status is FeasibilityStatus.FEASIBLE


def _make_cvxpy_variable(var):
    if var.shape == ():
        return cp.Variable()
    if var.symmetric:
        return cp.Variable(var.shape, symmetric=True)
    return cp.Variable(var.shape)


def _post_verify(problem: LmiProblem, values: dict, eps: float):
    """Direct eigenvalue verification of every constraint and sign restriction."""
    worst = -np.inf
    ok = True
    for name, F in problem.evaluate(values).items():
        lam_max = float(np.linalg.eigvalsh(0.5 * (F + F.T)).max())
        worst = max(worst, lam_max)
        if lam_max > -0.5 * eps:
            ok = False
    for var in problem.variables:
        val = values[var.name]
        if var.positive_definite:
            if np.linalg.eigvalsh(0.5 * (val + val.T)).min() <= 0:
                ok = False
        if var.lower_bound is not None and val < 0.5 * var.lower_bound:
            ok = False
    return ok, worst


def solve_feasibility(problem: LmiProblem, margin: float | None = None,
                      solver: str = DEFAULT_SOLVER, verbose: bool = False,
                      **solver_options) -> FeasibilityResult:
    """Decide feasibility of an affine matrix-inequality system.

    Strict definiteness is realized as <= -margin I (default 1e-7 (1+h)).
    For jointly homogeneous systems the conic program is solved at unit
    strictness instead -- an equivalent scaling that keeps infeasibility
    certificates well-conditioned -- and the returned witness still satisfies
    the requested margin. Every feasible claim is post-verified by eigenvalue
    checks at the -margin/2 band; a claim failing the band is reported as
    MARGINAL, and numerical breakdown as SOLVER_FAILURE (never silently
    infeasible). Constraints are pre-scaled by 1 / max(1, ||constant term||_2).

    With the default deterministic interior-point solver, identical problems
    and margins return identical results.
    """
    h = float(problem.metadata.get("h", 0.0))
    eps = default_margin(h) if margin is None else float(margin)
    if eps <= 0:
        raise ValueError("margin must be positive")
    problem.check_affine()
    eps_solve = max(eps, 1.0 + h) if problem.homogeneous else eps

    cpvars = {v.name: _make_cvxpy_variable(v) for v in problem.variables}
    cons = []
    for var in problem.variables:
        if var.positive_definite:
            cons.append(cpvars[var.name] >> eps_solve * np.eye(var.shape[0]))
        if var.lower_bound is not None:
            cons.append(cpvars[var.name] >= var.lower_bound)

    for constraint, C0, terms in problem.compile():
        scale = max(1.0, np.linalg.norm(C0, 2))
        expr = cp.Constant(C0 / scale)
        for name, entry, Cj in terms:
            coeff = cpvars[name] if entry == () else cpvars[name][entry]
            expr = expr + coeff * (Cj / scale)
        cons.append(expr << -(eps_solve / scale) * np.eye(constraint.size))

    prob = cp.Problem(cp.Minimize(0), cons)
    try:
        prob.solve(solver=solver, verbose=verbose, **solver_options)
    except (cp.SolverError, ValueError, ArithmeticError) as exc:
        return FeasibilityResult(
            status=FeasibilityStatus.SOLVER_FAILURE,
            values=None,
            achieved_margin=None,
            solver_diagnostics=f"{solver}: {exc}",
        )

    diag = f"{solver} status: {prob.status}"
    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return FeasibilityResult(FeasibilityStatus.INFEASIBLE, None, None, diag)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return FeasibilityResult(FeasibilityStatus.SOLVER_FAILURE, None, None, diag)

    values = {}
    for var in problem.variables:
        raw = cpvars[var.name].value
        if raw is None:
            return FeasibilityResult(FeasibilityStatus.SOLVER_FAILURE, None, None,
                                     diag + "; no assignment returned")
        if var.shape == ():
            values[var.name] = float(raw)
        else:
            raw = np.asarray(raw, dtype=float)
            values[var.name] = 0.5 * (raw + raw.T) if var.symmetric else raw

    ok, worst = _post_verify(problem, values, eps)
    status = FeasibilityStatus.FEASIBLE if ok else FeasibilityStatus.MARGINAL
    return FeasibilityResult(status, values, worst, diag,
                             meta={"margin": eps, "solver": solver})
