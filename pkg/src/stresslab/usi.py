"""Unique stress identifier: edge-class detection for rotationally symmetric
configurations and the class-reduced design program.

Optimal stresses of symmetric configurations repeat across symmetric-
equivalent edges, so the complete-graph design collapses to one decision
variable per edge class.  Classes are detected from the Euclidean distance
matrix: equal squared edge length is necessary for symmetric equivalence,
and merging by length can only reduce the class count further (which keeps
the reduced program a restriction of the generic one).  Exact cyclic-orbit
enumeration is provided for polygons as a validation oracle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    Configuration,
    StressVector,
    edge_array,
    edge_count,
)
from .design import (
    ConicProblem,
    DesignParams,
    DesignResult,
    LmiBlock,
    StageError,
    _finish_design,
    assemble_p2,
    design_stress,
    solve_design,
)


def edm(config: Configuration) -> np.ndarray:
    """Euclidean distance matrix of squared pairwise distances."""
    p = config.coords
    g = p.T @ p
    sq = np.diag(g)
    d2 = sq[:, None] + sq[None, :] - 2.0 * g
    d2 = np.maximum(d2, 0.0)
    np.fill_diagonal(d2, 0.0)
    return (d2 + d2.T) / 2.0


@dataclass(frozen=True)
class StressClassification:
    """Partition of the complete-graph edges into equal-length classes.

    ``labels[e]`` is the class of canonical edge e; classes are numbered by
    ascending squared length.  ``selection`` is the {0,1} matrix S with
    ``w_full = S @ w_reduced``; ``multiplicities`` is ``S^T 1``.
    """

    n_nodes: int
    labels: np.ndarray
    class_sq_lengths: np.ndarray
    representatives: tuple[tuple[int, int], ...]
    tol: float

    @property
    def n_classes(self) -> int:
        return len(self.class_sq_lengths)

    @property
    def selection(self) -> np.ndarray:
        sel = np.zeros((len(self.labels), self.n_classes))
        sel[np.arange(len(self.labels)), self.labels] = 1.0
        return sel

    @property
    def multiplicities(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes).astype(float)

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        """Lift a per-class weight vector to the complete-graph edge order."""
        reduced = np.asarray(reduced, float)
        return reduced[self.labels]


def classify_edges(edm_matrix: np.ndarray, tol_edm: float = 1e-9) -> StressClassification:
    """Group complete-graph edges by squared length.

    Gap-based clustering: squared lengths are sorted and split wherever the
    consecutive gap exceeds ``tol_edm`` times the largest length, which is
    robust to floating-point construction noise in the solid generators.
    """
    if tol_edm <= 0:
        raise ValueError("tol_edm must be positive")
    edm_matrix = np.asarray(edm_matrix, float)
    n = edm_matrix.shape[0]
    edges = edge_array(n)
    sq = edm_matrix[edges[:, 0], edges[:, 1]]
    order = np.argsort(sq, kind="stable")
    sorted_sq = sq[order]
    scale = float(sorted_sq[-1]) if sorted_sq.size else 0.0
    labels = np.zeros(len(sq), dtype=int)
    cls = 0
    labels[order[0]] = 0
    for k in range(1, len(sorted_sq)):
        if sorted_sq[k] - sorted_sq[k - 1] > tol_edm * scale:
            cls += 1
        labels[order[k]] = cls
    n_classes = cls + 1
    lengths = np.zeros(n_classes)
    rep_by_class: list[tuple[int, int] | None] = [None] * n_classes
    for e, lab in enumerate(labels):
        if rep_by_class[lab] is None:
            rep_by_class[lab] = (int(edges[e, 0]), int(edges[e, 1]))
            lengths[lab] = sq[e]
    return StressClassification(n, labels, lengths, tuple(rep_by_class), tol_edm)


def classify_configuration(config: Configuration, tol_edm: float = 1e-9) -> StressClassification:
    return classify_edges(edm(config), tol_edm)


def polygon_orbit_classes(n: int) -> np.ndarray:
    """Exact edge classes of a regular n-gon under the cyclic rotation group.

    The orbit of edge (i, j) is its chord separation min(j-i, n-(j-i));
    returns 0-based class labels aligned with the canonical edge ordering.
    """
    edges = edge_array(n)
    sep = edges[:, 1] - edges[:, 0]
    sep = np.minimum(sep, n - sep)
    return (sep - 1).astype(int)


# ---------------------------------------------------------------------------
# reduced program


def reduce_p3(classification: StressClassification, problem: ConicProblem) -> ConicProblem:
    """Class-reduced form of a generic design program.

    With selection matrix S: objective weights become the class
    multiplicities ``c = S^T 1`` and ``psi_r = S^T psi``; each LMI becomes a
    weighted sum of per-class basis matrices (``Psi diag(s_s) Psi^T`` and
    ``B diag(s_s) B^T``, precomputed once); the equality block becomes
    ``E S``.
    """
    if problem.meta.get("kind") != "p2":
        raise ValueError("reduce_p3 expects the generic complete-graph program")
    m_bar = problem.n_stress
    if len(classification.labels) != m_bar:
        raise ValueError("classification does not match the problem's edge count")
    sel = classification.selection
    n_classes = classification.n_classes
    psi = problem.meta["psi"]

    def class_basis(factor: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple((factor[:, classification.labels == s])
                     @ (factor[:, classification.labels == s]).T
                     for s in range(n_classes))

    lmi_min = LmiBlock(
        dim=problem.lmi_min.dim,
        offset=problem.lmi_min.offset,
        sign=problem.lmi_min.sign,
        basis=class_basis(problem.lmi_min.factor),
    )
    lmi_max = LmiBlock(
        dim=problem.lmi_max.dim,
        offset=problem.lmi_max.offset,
        sign=problem.lmi_max.sign,
        basis=class_basis(problem.lmi_max.factor),
    )
    meta = dict(problem.meta)
    meta.update({
        "kind": "p3",
        "full_equalities": problem.equalities,
        "selection": sel,
        "n_classes": n_classes,
        "full_edge_count": m_bar,
    })
    return ConicProblem(
        n_stress=n_classes,
        objective_stress=-meta["alpha"] * (sel.T @ psi),
        l1_weights=classification.multiplicities,
        equalities=problem.equalities @ sel,
        lmi_min=lmi_min,
        lmi_max=lmi_max,
        meta=meta,
    )


def design_stress_usi(config: Configuration, params: DesignParams | None = None,
                      *, tol_edm: float = 1e-9, check: bool = True,
                      verbose: bool = False) -> DesignResult:
    """Symmetry-reduced design pipeline: classify, reduce, solve, expand.

    Falls back to the generic pipeline (flagged by ``reduction_ratio = 1``)
    when every edge length is distinct and no reduction exists.
    """
    params = params or DesignParams()
    t0 = time.perf_counter()
    classification = classify_configuration(config, tol_edm)
    m_bar = edge_count(config.count)
    if classification.n_classes == m_bar:
        result = design_stress(config, params, check=check, verbose=verbose)
        return _with_classification(result, classification, 1.0)
    problem = assemble_p2(config, params)
    reduced = reduce_p3(classification, problem)
    solution = solve_design(reduced, solver=params.solver, tol=params.solver_tol,
                            verbose=verbose)
    if solution.stress is None:
        raise StageError("solve", f"reduced solve returned no point (status {solution.status})")
    expanded = solution.stress[classification.labels]
    lifted = ConicLift(solution, expanded)
    return _finish_design(
        config, params, lifted, problem.equalities, t0, check,
        critical_alpha_value=problem.meta["critical_alpha"],
        classification=classification,
        reduction_ratio=classification.n_classes / m_bar,
    )


class ConicLift:
    """Solution shim presenting an expanded stress vector to the shared tail."""

    def __init__(self, solution, expanded: np.ndarray):
        self.stress = expanded
        self.status = solution.status
        self.objective = solution.objective
        self.solve_time = solution.solve_time
        self.solver = solution.solver


def _with_classification(result: DesignResult, classification: StressClassification,
                         ratio: float) -> DesignResult:
    from dataclasses import replace

    return replace(result, classification=classification, reduction_ratio=ratio)


# ---------------------------------------------------------------------------
# permutation diagnostics


def check_permutation_invariance(omega: np.ndarray, perm) -> float:
    """Relative residual ``||Omega - Pi Omega Pi^T||_F / ||Omega||_F``.

    ``perm`` maps old node index i to new index perm[i]; residual 0 means
    the stress is exactly invariant under the relabeling.
    """
    omega = np.asarray(omega, float)
    perm = np.asarray(perm, dtype=int)
    n = omega.shape[0]
    if sorted(perm.tolist()) != list(range(n)):
        raise ValueError("perm is not a bijection on the node set")
    permuted = np.empty_like(omega)
    permuted[np.ix_(perm, perm)] = omega
    denom = np.linalg.norm(omega)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(omega - permuted) / denom)
