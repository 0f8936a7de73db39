"""Conic backend: lowers a ConicProblem to cvxpy and solves it.

Two established interior-point backends are linked.  Problems with few
decision variables (reduced symmetric designs, small configurations) go to
a Schur-complement method whose per-iteration cost scales with the variable
count; everything else goes to a sparse direct method that tolerates large
variable counts.  The automatic choice can be overridden per call, and any
solver name cvxpy knows is accepted.

Statuses are propagated verbatim from cvxpy.  Reduced-accuracy termination
("optimal_inaccurate") is returned, not raised: the caller's independent
stabilizability verification is the authoritative gate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .design import ConicProblem, LmiBlock, orthonormal_rows

# Schur-complement IPMs cost O(m^2 n^2) per iteration in the variable count
# m; past this many variables the sparse direct backend wins.
SMALL_PROBLEM_VARIABLES = 300

_SMALL_BACKEND = "CVXOPT"
_LARGE_BACKEND = "CLARABEL"

OK_STATUSES = ("optimal", "optimal_inaccurate")


class SolverError(RuntimeError):
    """Backend failure, with problem dimensions for diagnosis."""


@dataclass(frozen=True)
class ConicSolution:
    stress: np.ndarray | None
    epigraph: np.ndarray | None
    status: str
    objective: float | None
    solve_time: float
    solver: str
    iterations: int | None = None


def _lmi_expression(block: LmiBlock, w, cp):
    if block.factor is not None:
        factor = block.factor
        if block.dim >= 24 and factor.size:
            # the incidence factor is 2-sparse per column; keep it that way
            density = np.count_nonzero(factor) / factor.size
            if density < 0.25:
                factor = sp.csc_matrix(factor)
        expr = block.sign * (factor @ cp.diag(w) @ factor.T)
    else:
        stacked = np.stack([a.ravel(order="F") for a in block.basis], axis=1)
        expr = block.sign * cp.reshape(stacked @ w, (block.dim, block.dim), order="F")
    return expr + block.offset


def solve_conic(problem: ConicProblem, *, solver: str | None = None,
                tol: float = 1e-8, verbose: bool = False) -> ConicSolution:
    """Solve the design program and return the raw stress vector + status."""
    import cvxpy as cp

    n = problem.n_stress
    backend = solver or (_SMALL_BACKEND if problem.variable_count <= SMALL_PROBLEM_VARIABLES
                         else _LARGE_BACKEND)
    backend = backend.upper()

    w = cp.Variable(n)
    s = cp.Variable(n)
    constraints = [s >= w, s >= -w]
    eq = orthonormal_rows(problem.equalities)
    if eq.shape[0]:
        constraints.append(eq @ w == 0)
    lmi_min = problem.lmi_min
    if backend == _LARGE_BACKEND and problem.lmi_min_sparse is not None:
        lmi_min = problem.lmi_min_sparse
    for block in (lmi_min, problem.lmi_max, *problem.extra_lmis):
        constraints.append(_lmi_expression(block, w, cp) >> 0)
    objective = cp.Minimize(problem.l1_weights @ s + problem.objective_stress @ w)
    prob = cp.Problem(objective, constraints)

    options = _backend_options(backend, tol)
    t0 = time.perf_counter()
    try:
        prob.solve(solver=backend, verbose=verbose, **options)
    except cp.error.SolverError as exc:
        raise SolverError(
            f"{backend} failed on problem with {problem.variable_count} variables, "
            f"{problem.equalities.shape[0]} equality rows, LMI dims "
            f"({problem.lmi_min.dim}, {problem.lmi_max.dim}): {exc}"
        ) from exc
    elapsed = time.perf_counter() - t0

    stats = prob.solver_stats
    solve_time = getattr(stats, "solve_time", None) or elapsed
    iterations = getattr(stats, "num_iters", None)
    return ConicSolution(
        stress=None if w.value is None else np.asarray(w.value, float),
        epigraph=None if s.value is None else np.asarray(s.value, float),
        status=prob.status,
        objective=None if prob.value is None else float(prob.value),
        solve_time=float(solve_time),
        solver=backend,
        iterations=iterations,
    )


def _backend_options(backend: str, tol: float) -> dict:
    if backend == "CLARABEL":
        return {
            "tol_feas": tol,
            "tol_gap_abs": tol,
            "tol_gap_rel": tol,
            "max_iter": 300,
        }
    if backend == "CVXOPT":
        return {
            "abstol": tol,
            "reltol": max(tol, 1e-9),
            "feastol": max(tol, 1e-9),
            "max_iters": 200,
        }
    if backend == "SCS":
        return {"eps": max(tol, 1e-9), "max_iters": 100_000}
    return {}
