"""Configurations, incidence/stress assembly, spectral analysis, stabilizability.

The numeric substrate shared by the design, clustering and simulation layers.
Everything here is a pure function of its inputs; all container types are
frozen and safe to share across workers.

Conventions fixed across the package:

* a configuration is a ``D x N`` coordinate matrix ``P`` (columns = nodes);
* the augmented configuration ``Pbar`` stacks an all-ones row under ``P``;
* complete-graph edges are ordered lexicographically as ``(i, j)`` with
  ``i < j``, 0-based.  Stress vectors, incidence columns and edge CSV files
  all use this ordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np


class DegenerateConfigurationError(ValueError):
    """Configuration whose augmented matrix is rank deficient where full rank is required."""


class MetricError(ValueError):
    """A derived metric is undefined for the given inputs."""


# ---------------------------------------------------------------------------
# tolerances


@dataclass(frozen=True)
class Tolerances:
    """Scale-relative numeric tolerances for stress verification.

    ``psd`` and ``rank`` are relative to the largest eigenvalue; ``eq`` is
    relative to ``||Omega||_F * ||Pbar||_F``.  Defaults reflect solver
    accuracy of ~1e-8 and spectra bounded by the design cap.
    """

    psd: float = 1e-7
    rank: float = 1e-6
    eq: float = 1e-8


DEFAULT_TOLERANCES = Tolerances()


# ---------------------------------------------------------------------------
# edge ordering


def edge_list(n: int) -> list[tuple[int, int]]:
    """Canonical complete-graph edge ordering: lexicographic (i, j), i < j, 0-based."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def edge_count(n: int) -> int:
    return n * (n - 1) // 2


def edge_index(i: int, j: int, n: int) -> int:
    """Position of edge (i, j) in the canonical ordering."""
    if i == j:
        raise ValueError("self-loops have no edge index")
    if i > j:
        i, j = j, i
    if not 0 <= i < j < n:
        raise ValueError(f"edge ({i},{j}) out of range for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def edge_array(n: int) -> np.ndarray:
    """(M, 2) int array of canonical edges."""
    iu, ju = np.triu_indices(n, k=1)
    return np.column_stack([iu, ju])


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class Configuration:
    """Node coordinates ``coords`` of shape (D, N), with optional node labels."""

    coords: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=float))
        if coords.ndim != 2:
            raise ValueError("coords must be a D x N matrix")
        object.__setattr__(self, "coords", coords)
        d, n = coords.shape
        if n < d + 1:
            raise ValueError(f"need at least D+1={d + 1} nodes, got {n}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != n:
                raise ValueError("labels length must match node count")
            object.__setattr__(self, "labels", labels)
        self.coords.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def count(self) -> int:
        return self.coords.shape[1]

    @property
    def augmented_rank(self) -> int:
        return int(np.linalg.matrix_rank(augment(self)))

    @property
    def is_design_valid(self) -> bool:
        """True when the augmented configuration has full row rank D+1."""
        return self.augmented_rank == self.dim + 1

    def subset(self, nodes: Sequence[int]) -> "Configuration":
        idx = np.asarray(nodes, dtype=int)
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[i] for i in idx)
        return Configuration(self.coords[:, idx], labels)

    # -- JSON schema: {"dim": int, "coords": [[x, y(, z)], ...], "labels": [...]}

    def to_json(self) -> str:
        payload: dict = {"dim": self.dim, "coords": self.coords.T.tolist()}
        if self.labels is not None:
            payload["labels"] = list(self.labels)
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        payload = json.loads(text)
        coords = np.asarray(payload["coords"], dtype=float).T
        if coords.shape[0] != payload["dim"]:
            raise ValueError("dim field disagrees with coordinate width")
        labels = payload.get("labels")
        return cls(coords, tuple(labels) if labels is not None else None)


def augment(config: Configuration | np.ndarray) -> np.ndarray:
    """Augmented configuration: coordinates stacked over an all-ones row."""
    coords = config.coords if isinstance(config, Configuration) else np.asarray(config, float)
    return np.vstack([coords, np.ones(coords.shape[1])])


# ---------------------------------------------------------------------------
# topology and stress containers


@dataclass(frozen=True)
class Topology:
    """Undirected graph on ``n`` nodes as a tuple of canonical (i, j) edges."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-loop in topology")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            if not 0 <= key[0] < key[1] < self.n:
                raise ValueError(f"edge {key} out of range")
            seen.add(key)
        object.__setattr__(
            self, "edges", tuple(sorted((min(i, j), max(i, j)) for i, j in self.edges))
        )

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def average_degree(self) -> float:
        return 2.0 * self.m / self.n

    def neighbors(self, i: int) -> list[int]:
        out = [j for a, j in self.edges if a == i] + [a for a, j in self.edges if j == i]
        return sorted(out)


@dataclass(frozen=True)
class StressVector:
    """Edge weights over the complete graph in the canonical edge ordering."""

    n_nodes: int
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if values.shape != (edge_count(self.n_nodes),):
            raise ValueError(
                f"stress vector for n={self.n_nodes} must have length "
                f"{edge_count(self.n_nodes)}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("stress entries must be finite")
        object.__setattr__(self, "values", values)
        self.values.setflags(write=False)

    def weight(self, i: int, j: int) -> float:
        return float(self.values[edge_index(i, j, self.n_nodes)])

    def to_csv(self) -> str:
        """CSV rows ``edge_i,edge_j,weight`` over the canonical ordering."""
        lines = ["edge_i,edge_j,weight"]
        for (i, j), w in zip(edge_list(self.n_nodes), self.values):
            lines.append(f"{i},{j},{w!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, n_nodes: int) -> "StressVector":
        values = np.zeros(edge_count(n_nodes))
        rows = [r for r in text.strip().splitlines() if r and not r.startswith("edge_i")]
        for row in rows:
            i_s, j_s, w_s = row.split(",")
            values[edge_index(int(i_s), int(j_s), n_nodes)] = float(w_s)
        return cls(n_nodes, values)


def complete_incidence(n: int) -> np.ndarray:
    """Signed incidence matrix of the complete graph, N x N(N-1)/2.

    The column for edge (i, j), i < j, carries +1 at row i and -1 at row j;
    column order follows the canonical edge ordering.
    """
    if n < 2:
        raise ValueError("complete_incidence needs n >= 2")
    edges = edge_array(n)
    m = edges.shape[0]
    b = np.zeros((n, m))
    cols = np.arange(m)
    b[edges[:, 0], cols] = 1.0
    b[edges[:, 1], cols] = -1.0
    return b


def assemble_stress(incidence: np.ndarray, weights: StressVector | np.ndarray) -> np.ndarray:
    """Stress matrix ``B diag(w) B^T``, symmetrized against round-off."""
    w = weights.values if isinstance(weights, StressVector) else np.asarray(weights, float)
    if incidence.shape[1] != w.shape[0]:
        raise ValueError(
            f"weight length {w.shape[0]} does not match incidence columns {incidence.shape[1]}"
        )
    omega = (incidence * w) @ incidence.T
    return (omega + omega.T) / 2.0


def stress_from_topology(topology: Topology, weights: Iterable[float]) -> np.ndarray:
    """Assemble a stress matrix from per-edge weights on an explicit topology."""
    omega = np.zeros((topology.n, topology.n))
    for (i, j), w in zip(topology.edges, weights):
        omega[i, j] -= w
        omega[j, i] -= w
        omega[i, i] += w
        omega[j, j] += w
    return omega


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectralReport:
    """Eigenvalue summary of a symmetric stress matrix."""

    eigenvalues: np.ndarray  # ascending
    dim: int
    lambda_d2: float  # (D+2)-th smallest: the convergence-indicating eigenvalue
    lambda_max: float
    numeric_rank: int
    psd: bool
    cond: float
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES)

    @property
    def nullity(self) -> int:
        return len(self.eigenvalues) - self.numeric_rank


def spectral_report(
    omega: np.ndarray, dim: int, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> SpectralReport:
    """Sorted spectrum plus the derived stabilizability quantities.

    Rejects non-symmetric input; the eigensolve runs on the explicitly
    symmetrized matrix to kill round-off asymmetry.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise ValueError("stress matrix must be square")
    scale = np.abs(omega).max()
    if scale > 0 and np.abs(omega - omega.T).max() > 1e-8 * scale:
        raise ValueError("stress matrix must be symmetric")
    eigs = np.linalg.eigvalsh((omega + omega.T) / 2.0)
    lam_max = float(eigs[-1])
    lam_scale = max(lam_max, 0.0)
    rank = int(np.sum(eigs > tolerances.rank * lam_scale)) if lam_scale > 0 else 0
    n = len(eigs)
    lam_d2 = float(eigs[dim + 1]) if dim + 1 < n else float("nan")
    psd = bool(eigs[0] >= -tolerances.psd * lam_scale)
    if rank > 0:
        cond = float(lam_max / eigs[n - rank])
    else:
        cond = float("inf")
    return SpectralReport(eigs, dim, lam_d2, lam_max, rank, psd, cond, tolerances)


# ---------------------------------------------------------------------------
# kernel basis and verification


def kernel_basis(aug: np.ndarray) -> np.ndarray:
    """Orthonormal columns spanning the kernel of the augmented configuration.

    Raises DegenerateConfigurationError when ``aug`` is row-rank deficient,
    since the kernel dimension would then exceed N-D-1.
    """
    from scipy.linalg import null_space

    aug = np.asarray(aug, dtype=float)
    rows, n = aug.shape
    q = null_space(aug)
    if q.shape[1] != n - rows:
        raise DegenerateConfigurationError(
            f"augmented configuration is rank deficient ({n - q.shape[1]} < {rows})"
        )
    return q


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the stabilizable-stress check (PSD, rank N-D-1, equilibrium)."""

    psd: bool
    rank_ok: bool
    equilibrium_ok: bool
    overall: bool
    numeric_rank: int
    expected_rank: int
    equilibrium_residual: float
    spectral: SpectralReport
    degenerate_configuration: bool = False


def verify_stabilizable(
    omega: np.ndarray,
    config: Configuration,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> VerificationReport:
    """Check Omega against the stabilizability conditions for ``config``.

    psd            : lambda_1 >= -tol_psd * lambda_max
    rank_ok        : numeric rank == N - D - 1
    equilibrium_ok : ||Omega Pbar^T||_F <= tol_eq * ||Omega||_F * ||Pbar||_F

    A rank-deficient configuration is allowed here (analysis use) and only
    flagged; design entry points reject it instead.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (config.count, config.count):
        raise ValueError(
            f"stress matrix shape {omega.shape} does not match configuration "
            f"with N={config.count}"
        )
    pbar = augment(config)
    report = spectral_report(omega, config.dim, tolerances)
    expected = config.count - config.dim - 1
    residual = float(np.linalg.norm(omega @ pbar.T))
    norm_prod = np.linalg.norm(omega) * np.linalg.norm(pbar)
    equilibrium_ok = bool(residual <= tolerances.eq * norm_prod) if norm_prod > 0 else True
    rank_ok = report.numeric_rank == expected
    overall = report.psd and rank_ok and equilibrium_ok
    return VerificationReport(
        psd=report.psd,
        rank_ok=rank_ok,
        equilibrium_ok=equilibrium_ok,
        overall=bool(overall),
        numeric_rank=report.numeric_rank,
        expected_rank=expected,
        equilibrium_residual=residual,
        spectral=report,
        degenerate_configuration=not config.is_design_valid,
    )


# ---------------------------------------------------------------------------
# topology extraction and metrics


@dataclass(frozen=True)
class ExtractionResult:
    topology: Topology
    pruned: StressVector
    kept: np.ndarray  # indices into the canonical edge ordering
    m: int
    average_degree: float
    empty: bool  # all-zero input, valid but flagged


def extract_topology(
    weights: StressVector | np.ndarray,
    eps_rel: float = 1e-6,
    n_nodes: int | None = None,
) -> ExtractionResult:
    """Threshold a complete-graph stress vector into an explicit topology.

    Edges survive when ``|w_e| > eps_rel * max|w|``; dropped entries are
    zeroed in the pruned vector.
    """
    if eps_rel < 0:
        raise ValueError("eps_rel must be nonnegative")
    if isinstance(weights, StressVector):
        n = weights.n_nodes
        values = weights.values
    else:
        if n_nodes is None:
            raise ValueError("n_nodes required when passing a bare array")
        n = n_nodes
        values = np.asarray(weights, dtype=float)
    peak = np.abs(values).max() if values.size else 0.0
    if peak == 0.0:
        empty = Topology(n, ())
        return ExtractionResult(empty, StressVector(n, np.zeros_like(values)),
                                np.array([], dtype=int), 0, 0.0, True)
    kept = np.flatnonzero(np.abs(values) > eps_rel * peak)
    pruned = np.zeros_like(values)
    pruned[kept] = values[kept]
    all_edges = edge_array(n)
    edges = tuple(map(tuple, all_edges[kept]))
    topo = Topology(n, edges)
    return ExtractionResult(topo, StressVector(n, pruned), kept, topo.m,
                            topo.average_degree, False)


def matrix_topology(omega: np.ndarray, eps_rel: float = 1e-6) -> Topology:
    """Topology supported by the off-diagonal entries of a stress matrix.

    Used for ensemble stresses, which are assembled from cluster designs and
    have no single complete-graph weight vector.
    """
    omega = np.asarray(omega, float)
    n = omega.shape[0]
    off = omega.copy()
    np.fill_diagonal(off, 0.0)
    peak = np.abs(off).max()
    if peak == 0.0:
        return Topology(n, ())
    iu, ju = np.triu_indices(n, k=1)
    mask = np.abs(off[iu, ju]) > eps_rel * peak
    return Topology(n, tuple(zip(iu[mask].tolist(), ju[mask].tolist())))


def spectral_efficiency(report: SpectralReport, m: int, n: int,
                        lam_tol: float = 1e-12) -> float:
    """Convergence speed per unit communication capacity:
    ``lambda_{D+2} * N^2 / (lambda_max * M)``."""
    if m < 1:
        raise MetricError("spectral efficiency undefined for an empty topology")
    if not report.lambda_max > lam_tol:
        raise MetricError("spectral efficiency undefined for a null spectrum")
    return float(report.lambda_d2 * n * n / (report.lambda_max * m))


def permute_configuration(config: Configuration, perm: Sequence[int]) -> Configuration:
    """Relabel nodes: column i of the result is column perm[i] of the input."""
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(config.count)):
        raise ValueError("not a permutation of the node set")
    labels = None
    if config.labels is not None:
        labels = tuple(config.labels[p] for p in perm)
    return Configuration(config.coords[:, perm], labels)


def edge_permutation(perm: Sequence[int], n: int) -> np.ndarray:
    """Complete-graph edge permutation induced by a node permutation.

    Returns an index array ``sigma`` such that reindexing a stress vector by
    ``w[sigma]`` matches relabeling nodes by ``perm`` (column i of the
    permuted configuration is node perm[i] of the original).
    """
    perm = np.asarray(perm, dtype=int)
    sigma = np.empty(edge_count(n), dtype=int)
    for k, (i, j) in enumerate(edge_list(n)):
        sigma[k] = edge_index(perm[i], perm[j], n)
    return sigma
