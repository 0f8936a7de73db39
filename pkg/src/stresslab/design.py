"""Generic convex stress design: assembly and solution of the sparse
fast-convergence program over complete-graph edge weights.

The decision variable is the complete-graph stress vector w (length
N(N-1)/2) plus an epigraph vector s of the same length for the L1 term.
The program minimizes ``sum(s) - alpha * psi @ w`` subject to

* ``s >= w`` and ``s >= -w``                      (epigraph rows),
* ``Psi diag(w) Psi^T - gamma I  >> 0``           (floor LMI),
* ``beta I - B diag(w) B^T       >> 0``           (cap LMI),
* ``E w = 0``                                     (equilibrium block),

where Q is an orthonormal kernel basis of the augmented configuration,
``Psi = Q^T B`` and ``psi = diag(Psi^T Psi)``.  The positive-semidefinite
cap on the full stress follows from the floor LMI together with the
equality block, so the spectral norm is encoded one-sided; a two-sided
debugging variant is available behind a flag.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Configuration,
    DegenerateConfigurationError,
    ExtractionResult,
    SpectralReport,
    StressVector,
    Tolerances,
    VerificationReport,
    assemble_stress,
    augment,
    complete_incidence,
    edge_count,
    extract_topology,
    kernel_basis,
    spectral_report,
    verify_stabilizable,
)


class StageError(RuntimeError):
    """Pipeline failure wrapped with the stage that produced it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class DesignVerificationError(StageError):
    """Solver returned a solution that fails the stabilizability check."""

    def __init__(self, result: "DesignResult"):
        super().__init__("verify", "designed stress failed stabilizability verification")
        self.result = result


@dataclass(frozen=True)
class DesignParams:
    """Hyperparameters of the stress design program.

    ``alpha`` weighs convergence speed against sparsity, ``beta`` caps the
    spectral norm, ``gamma`` floors the smallest nonzero eigenvalue and
    ``eps_rel`` is the relative threshold for topology extraction.
    Benchmark defaults: gamma=0.1, beta=1, alpha in {0.5, 1.5, 5}.
    """

    alpha: float = 0.5
    beta: float = 1.0
    gamma: float = 0.1
    eps_rel: float = 1e-6
    solver_tol: float = 1e-8
    solver: str | None = None
    two_sided: bool = False
    polish: bool = True
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.gamma <= 0:
            raise ValueError("alpha, beta and gamma must be positive")
        if self.beta <= self.gamma:
            # contradictory eigenvalue bounds; keep the object usable so the
            # solver can report infeasibility
            warnings.warn("beta <= gamma makes the design infeasible", stacklevel=2)
        if self.eps_rel < 0:
            raise ValueError("eps_rel must be nonnegative")


# ---------------------------------------------------------------------------
# conic problem container


@dataclass(frozen=True)
class LmiBlock:
    """Affine map from the stress variables to a symmetric matrix.

    Either factored, ``sign * F diag(w) F^T + offset``, or a weighted basis
    sum, ``sign * sum_k w_k A_k + offset``.  Feasible iff the value is PSD.
    """

    dim: int
    offset: np.ndarray
    sign: float = 1.0
    factor: np.ndarray | None = None
    basis: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if (self.factor is None) == (self.basis is None):
            raise ValueError("exactly one of factor/basis must be given")
        if self.offset.shape != (self.dim, self.dim):
            raise ValueError("offset shape does not match block dimension")

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        if self.factor is not None:
            val = (self.factor * w) @ self.factor.T
        else:
            val = sum(wk * ak for wk, ak in zip(w, self.basis))
        return self.sign * val + self.offset

    def min_eigenvalue(self, w: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(self.evaluate(w))[0])


@dataclass(frozen=True)
class ConicProblem:
    """Explicit conic form of a stress design program.

    Variable layout is ``x = [w; s]`` with ``n_stress`` entries each:
    the stress weights followed by their L1 epigraph.  ``equalities`` acts
    on w alone and is passed whole (redundant rows included); backends
    may compress it.  ``lmi_min_sparse``, when present, is a proven
    equivalent of ``lmi_min`` with a sparser variable map that large-scale
    backends lower instead.
    """

    n_stress: int
    objective_stress: np.ndarray  # linear coefficients on w (the -alpha*psi term)
    l1_weights: np.ndarray  # objective coefficients on s (1, or class multiplicities)
    equalities: np.ndarray
    lmi_min: LmiBlock
    lmi_max: LmiBlock
    extra_lmis: tuple[LmiBlock, ...] = ()
    lmi_min_sparse: LmiBlock | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.objective_stress.shape != (self.n_stress,):
            raise ValueError("objective_stress length mismatch")
        if self.l1_weights.shape != (self.n_stress,):
            raise ValueError("l1_weights length mismatch")
        if self.equalities.shape[1] != self.n_stress:
            raise ValueError("equality block width mismatch")

    @property
    def variable_count(self) -> int:
        return 2 * self.n_stress

    @property
    def objective_vector(self) -> np.ndarray:
        return np.concatenate([self.objective_stress, self.l1_weights])

    def epigraph_rows(self) -> np.ndarray:
        """Nonnegative-cone rows G with G @ [w; s] >= 0 encoding s >= |w|."""
        eye = np.eye(self.n_stress)
        return np.block([[-eye, eye], [eye, eye]])

    def objective_value(self, w: np.ndarray) -> float:
        return float(self.l1_weights @ np.abs(w) + self.objective_stress @ w)

    def feasibility_margins(self, w: np.ndarray) -> dict:
        """Constraint slacks at w (negative = violated); oracle for tests."""
        return {
            "lmi_min": self.lmi_min.min_eigenvalue(w),
            "lmi_max": self.lmi_max.min_eigenvalue(w),
            "equality_residual": float(np.linalg.norm(self.equalities @ w)),
        }


# ---------------------------------------------------------------------------
# assembly operations


def build_nullspace_operator(aug: np.ndarray, incidence: np.ndarray) -> np.ndarray:
    """Equilibrium block E with ``E w = vec-stacked columns of Pbar Omega``.

    Row block i equals ``Pbar B diag(B[i, :])``, so ``E w = 0`` iff
    ``Omega Pbar^T = 0`` for ``Omega = B diag(w) B^T``.
    """
    aug = np.asarray(aug, float)
    incidence = np.asarray(incidence, float)
    if aug.shape[1] != incidence.shape[0]:
        raise ValueError("augmented configuration and incidence disagree on N")
    pb = aug @ incidence
    blocks = [pb * incidence[i, :] for i in range(incidence.shape[0])]
    return np.vstack(blocks)


def trace_weights(q: np.ndarray, incidence: np.ndarray) -> np.ndarray:
    """Per-edge trace coefficients ``psi = diag(Psi^T Psi)`` with ``Psi = Q^T B``."""
    psi_mat = q.T @ incidence
    return np.sum(psi_mat * psi_mat, axis=0)


def critical_alpha(psi: np.ndarray) -> float:
    """Largest alpha keeping the L1 cone's global minimum: ``1 / max(psi)``."""
    peak = float(np.max(psi)) if psi.size else 0.0
    if peak <= 0:
        raise ValueError("trace weights are identically zero; configuration degenerate")
    return 1.0 / peak


def orthonormal_rows(mat: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the row space (same nullspace, full row rank)."""
    _, s, vt = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, mat.shape[1]))
    rank = int(np.sum(s > rtol * s[0]))
    return vt[:rank]


def assemble_p2(config: Configuration, params: DesignParams) -> ConicProblem:
    """Build the generic design program for ``config``.

    The floor LMI is stored in its kernel-projected (N-D-1)-dimensional
    form; an equivalent full-dimensional block with a sparse variable map
    (``B diag(w) B^T - gamma Q Q^T >> 0``, valid under the equality block)
    is attached for large-scale backends.
    """
    if not config.is_design_valid:
        raise DegenerateConfigurationError(
            "configuration is affinely degenerate; stress design undefined"
        )
    n, d = config.count, config.dim
    aug = augment(config)
    incidence = complete_incidence(n)
    q = kernel_basis(aug)
    psi_mat = q.T @ incidence
    psi = np.sum(psi_mat * psi_mat, axis=0)
    eq = build_nullspace_operator(aug, incidence)
    nk = n - d - 1
    lmi_min = LmiBlock(dim=nk, offset=-params.gamma * np.eye(nk), sign=1.0, factor=psi_mat)
    lmi_max = LmiBlock(dim=n, offset=params.beta * np.eye(n), sign=-1.0, factor=incidence)
    lmi_min_sparse = LmiBlock(dim=n, offset=-params.gamma * (q @ q.T), sign=1.0,
                              factor=incidence)
    extra = ()
    if params.two_sided:
        extra = (LmiBlock(dim=n, offset=np.zeros((n, n)), sign=1.0, factor=incidence),)
    return ConicProblem(
        n_stress=edge_count(n),
        objective_stress=-params.alpha * psi,
        l1_weights=np.ones(edge_count(n)),
        equalities=eq,
        lmi_min=lmi_min,
        lmi_max=lmi_max,
        extra_lmis=extra,
        lmi_min_sparse=lmi_min_sparse,
        meta={
            "kind": "p2",
            "n": n,
            "dim": d,
            "alpha": params.alpha,
            "beta": params.beta,
            "gamma": params.gamma,
            "psi": psi,
            "critical_alpha": critical_alpha(psi),
        },
    )


def solve_design(problem: ConicProblem, *, solver: str | None = None,
                 tol: float = 1e-8, verbose: bool = False):
    """Hand the conic problem to a backend; see ``stresslab.solvers``."""
    from .solvers import solve_conic

    return solve_conic(problem, solver=solver, tol=tol, verbose=verbose)


# ---------------------------------------------------------------------------
# end-to-end pipeline


@dataclass(frozen=True)
class DesignResult:
    """Verified output of a stress design run."""

    params: DesignParams
    stress: StressVector  # pruned (and polished) weights on the complete graph
    stress_raw: np.ndarray  # solver output before extraction
    omega: np.ndarray
    extraction: ExtractionResult
    spectral: SpectralReport
    verification: VerificationReport
    status: str
    objective: float
    solve_time: float
    wall_time: float
    solver: str
    critical_alpha: float
    classification: object | None = None  # StressClassification for reduced designs
    reduction_ratio: float | None = None

    @property
    def topology(self):
        return self.extraction.topology

    @property
    def m(self) -> int:
        return self.extraction.m

    @property
    def success(self) -> bool:
        return self.verification.overall and self.status in ("optimal", "optimal_inaccurate")


def _polish_equalities(values: np.ndarray, kept: np.ndarray, eq: np.ndarray) -> np.ndarray:
    """Min-norm correction of the kept weights onto the equality nullspace."""
    if kept.size == 0:
        return values
    rows = orthonormal_rows(eq)
    r_kept = rows[:, kept]
    resid = r_kept @ values[kept]
    delta, *_ = np.linalg.lstsq(r_kept, resid, rcond=None)
    out = values.copy()
    out[kept] -= delta
    return out


def design_stress(config: Configuration, params: DesignParams | None = None,
                  *, check: bool = True, verbose: bool = False) -> DesignResult:
    """Full generic design pipeline, failing loudly if verification fails.

    kernel basis -> equilibrium operator -> trace weights -> assembly ->
    conic solve -> topology extraction -> equality polish -> verification.
    Set ``check=False`` to get the result object even when verification or
    the solver status is bad (the bench harness does its own triage).
    """
    params = params or DesignParams()
    t0 = time.perf_counter()
    try:
        problem = assemble_p2(config, params)
    except DegenerateConfigurationError as exc:
        raise StageError("assemble", str(exc)) from exc
    alpha_star = problem.meta["critical_alpha"]
    if params.alpha < alpha_star:
        warnings.warn(
            f"alpha={params.alpha} is below the critical value {alpha_star:.4g}; "
            "the dominant L1 term may shrink active weights and defeat thresholding",
            stacklevel=2,
        )
    solution = solve_design(problem, solver=params.solver, tol=params.solver_tol,
                            verbose=verbose)
    if solution.stress is None:
        raise StageError("solve", f"solver returned no point (status {solution.status})")
    return _finish_design(config, params, solution, problem.equalities, t0, check,
                          critical_alpha_value=problem.meta["critical_alpha"])


def _finish_design(config: Configuration, params: DesignParams, solution,
                   full_equalities: np.ndarray, t0: float, check: bool,
                   critical_alpha_value: float = float("nan"),
                   classification=None, reduction_ratio: float | None = None) -> DesignResult:
    """Shared extraction/polish/verify tail of the generic and reduced pipelines.

    ``full_equalities`` must act on the complete-graph stress vector (the
    reduced pipeline expands its solution before calling this).
    """
    raw = np.asarray(solution.stress, float)
    extraction = extract_topology(raw, params.eps_rel, n_nodes=config.count)
    values = extraction.pruned.values
    if params.polish and not extraction.empty:
        values = _polish_equalities(values, extraction.kept, full_equalities)
    stress = StressVector(config.count, values)
    omega = assemble_stress(complete_incidence(config.count), stress)
    spectral = spectral_report(omega, config.dim, params.tolerances)
    verification = verify_stabilizable(omega, config, params.tolerances)
    result = DesignResult(
        params=params,
        stress=stress,
        stress_raw=raw,
        omega=omega,
        extraction=extraction,
        spectral=spectral,
        verification=verification,
        status=solution.status,
        objective=float(solution.objective) if solution.objective is not None else float("nan"),
        solve_time=solution.solve_time,
        wall_time=time.perf_counter() - t0,
        solver=solution.solver,
        critical_alpha=float(critical_alpha_value),
        classification=classification,
        reduction_ratio=reduction_ratio,
    )
    if check and not result.success:
        raise DesignVerificationError(result)
    return result
