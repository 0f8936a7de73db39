"""Cluster partitioning, ensemble stress construction and the collective
motion / leader-allocation / convergence-bound analyses.

A partition lists global node indices per cluster; bridging sets are the
pairwise intersections (derived, never user-stated).  The ensemble stress
is the sum of the per-cluster stresses zero-padded to the global node set;
it is the system matrix of the randomized controller's mean dynamics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Configuration,
    SpectralReport,
    Tolerances,
    VerificationReport,
    augment,
    spectral_report,
    verify_stabilizable,
)


class PartitionError(ValueError):
    """Partition violates a hard requirement (coverage or cluster size)."""


@dataclass(frozen=True)
class ClusterPartition:
    """Clusters as tuples of sorted global node indices over ``n_nodes``."""

    n_nodes: int
    clusters: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        cleaned = []
        for c, nodes in enumerate(self.clusters):
            arr = sorted(set(int(i) for i in nodes))
            if not arr:
                raise PartitionError(f"cluster {c} is empty")
            if arr[0] < 0 or arr[-1] >= self.n_nodes:
                raise PartitionError(f"cluster {c} has node indices out of range")
            cleaned.append(tuple(arr))
        object.__setattr__(self, "clusters", tuple(cleaned))

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.clusters)

    def membership_counts(self) -> np.ndarray:
        """C_i: number of clusters containing node i (0 = uncovered)."""
        counts = np.zeros(self.n_nodes, dtype=int)
        for nodes in self.clusters:
            counts[list(nodes)] += 1
        return counts

    def memberships(self) -> list[list[int]]:
        """Per-node list of cluster indices containing the node."""
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for c, nodes in enumerate(self.clusters):
            for i in nodes:
                out[i].append(c)
        return out

    def bridging(self, c: int, cprime: int) -> tuple[int, ...]:
        """Bridging set: nodes shared by clusters c and c'."""
        return tuple(sorted(set(self.clusters[c]) & set(self.clusters[cprime])))

    def connected_pairs(self) -> list[tuple[int, int]]:
        """Cluster pairs with a nonempty bridging set."""
        pairs = []
        for c in range(self.n_clusters):
            for k in range(c + 1, self.n_clusters):
                if self.bridging(c, k):
                    pairs.append((c, k))
        return pairs

    def bridge_nodes_of(self, c: int) -> tuple[int, ...]:
        """Union of the bridging sets attached to cluster c."""
        nodes: set[int] = set()
        for k in range(self.n_clusters):
            if k != c:
                nodes.update(self.bridging(c, k))
        return tuple(sorted(nodes))

    def overlap_graph_connected(self) -> bool:
        if self.n_clusters <= 1:
            return True
        adj = {c: set() for c in range(self.n_clusters)}
        for c, k in self.connected_pairs():
            adj[c].add(k)
            adj[k].add(c)
        seen = {0}
        stack = [0]
        while stack:
            c = stack.pop()
            for k in adj[c]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        return len(seen) == self.n_clusters

    def subconfiguration(self, config: Configuration, c: int) -> Configuration:
        return config.subset(self.clusters[c])

    # -- JSON: {"clusters": [[i, ...], ...], "leaders": [i, ...]}

    def to_json(self, leaders: Sequence[int] | None = None) -> str:
        payload: dict = {"clusters": [list(c) for c in self.clusters]}
        if leaders is not None:
            payload["leaders"] = sorted(int(i) for i in leaders)
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str, n_nodes: int) -> tuple["ClusterPartition", tuple[int, ...]]:
        payload = json.loads(text)
        part = cls(n_nodes, tuple(tuple(c) for c in payload["clusters"]))
        leaders = tuple(sorted(int(i) for i in payload.get("leaders", [])))
        return part, leaders


@dataclass(frozen=True)
class PartitionReport:
    covered: bool
    sizes_ok: bool
    overlap_connected: bool
    total_overlap: int  # sum ``N_c`` minus N
    pair_bridges: dict
    membership_counts: np.ndarray


def validate_partition(config: Configuration, partition: ClusterPartition) -> PartitionReport:
    """Coverage and size checks plus overlap-graph connectivity.

    Raises PartitionError for an uncovered node or a cluster smaller than
    D+1; a disconnected overlap graph is legal (independent subswarms) and
    only flagged.
    """
    if partition.n_nodes != config.count:
        raise PartitionError("partition node count does not match the configuration")
    counts = partition.membership_counts()
    uncovered = np.flatnonzero(counts == 0)
    if uncovered.size:
        raise PartitionError(f"nodes not covered by any cluster: {uncovered.tolist()}")
    need = config.dim + 1
    for c, size in enumerate(partition.sizes):
        if size < need:
            raise PartitionError(f"cluster {c} has {size} nodes; needs at least D+1={need}")
    pair_bridges = {pair: partition.bridging(*pair) for pair in partition.connected_pairs()}
    return PartitionReport(
        covered=True,
        sizes_ok=True,
        overlap_connected=partition.overlap_graph_connected(),
        total_overlap=int(sum(partition.sizes) - config.count),
        pair_bridges=pair_bridges,
        membership_counts=counts,
    )


def chain_partition(n: int, n_clusters: int, n_bridges: int,
                    seed: int | None = None) -> ClusterPartition:
    """Chain of clusters over a (optionally seeded-random) node ordering,
    consecutive clusters sharing ``n_bridges`` nodes.

    With ``seed=None`` the identity ordering is used.  Cluster sizes are as
    equal as the bridge arithmetic allows.
    """
    if n_clusters < 1:
        raise PartitionError("need at least one cluster")
    if n_clusters > 1 and n_bridges < 1:
        raise PartitionError("a chain of several clusters needs bridges")
    order = np.arange(n)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(n)
    total = n + (n_clusters - 1) * n_bridges  # nodes counted with multiplicity
    base, extra = divmod(total, n_clusters)
    sizes = [base + (1 if c < extra else 0) for c in range(n_clusters)]
    if min(sizes) <= n_bridges and n_clusters > 1:
        raise PartitionError("clusters too small for the requested bridge count")
    clusters = []
    start = 0
    for c, size in enumerate(sizes):
        clusters.append(tuple(int(i) for i in order[start:start + size]))
        start += size - n_bridges if c < n_clusters - 1 else size
    return ClusterPartition(n, tuple(clusters))


def replicate_design(base_omega: np.ndarray,
                     segments: Sequence[Sequence[int]]) -> list[np.ndarray]:
    """Reuse one segment's stress for every segment of a repeated-segment
    configuration (stresses are affine-invariant, so identical-up-to-affine
    segments share one design).

    ``segments`` lists global node ids per segment in base-node order (as
    returned by ``generate_with_segments``); ``base_omega`` must be the
    stress designed for segment 0's sorted subconfiguration.  Returns one
    stress per segment, indexed by that segment's sorted node list.
    """
    base = np.asarray(base_omega, float)
    ref = segments[0]
    pos0 = {g: i for i, g in enumerate(sorted(ref))}
    perm0 = np.array([pos0[g] for g in ref])
    base_order = base[np.ix_(perm0, perm0)]  # reindexed to base-node order
    out = []
    for seg in segments:
        if len(seg) != len(ref):
            raise ValueError("segments of unequal size cannot share a design")
        posc = {g: i for i, g in enumerate(sorted(seg))}
        permc = np.array([posc[g] for g in seg])
        omega_c = np.empty_like(base)
        omega_c[np.ix_(permc, permc)] = base_order
        out.append(omega_c)
    return out


# ---------------------------------------------------------------------------
# ensemble assembly


def embed_stress(omega_c: np.ndarray, nodes: Sequence[int], n: int) -> np.ndarray:
    """Zero-pad a cluster stress onto the global node set."""
    omega_c = np.asarray(omega_c, float)
    idx = np.asarray(nodes, dtype=int)
    if omega_c.shape != (idx.size, idx.size):
        raise ValueError("cluster stress shape does not match its node list")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError("node index out of range for the global dimension")
    padded = np.zeros((n, n))
    padded[np.ix_(idx, idx)] = omega_c
    return padded


@dataclass(frozen=True)
class EnsembleDesign:
    """Sum of zero-padded cluster stresses with its spectral summary."""

    omega: np.ndarray
    partition: ClusterPartition
    cluster_omegas: tuple[np.ndarray, ...]
    cluster_verifications: tuple[VerificationReport, ...]
    spectral: SpectralReport
    collective: bool  # numeric rank == N - D - 1
    equilibrium_residual: float
    equilibrium_ok: bool

    def padded(self, c: int) -> np.ndarray:
        return embed_stress(self.cluster_omegas[c], self.partition.clusters[c],
                            self.partition.n_nodes)


def ensemble_stress(
    cluster_omegas: Sequence[np.ndarray],
    partition: ClusterPartition,
    config: Configuration,
    tolerances: Tolerances = Tolerances(),
    require_verified: bool = True,
) -> EnsembleDesign:
    """Assemble and analyze the global ensemble stress.

    Each cluster stress is verified against its own subconfiguration first;
    an unverified stress is rejected (``require_verified=False`` downgrades
    that to a recorded failure for diagnostics).
    """
    if len(cluster_omegas) != partition.n_clusters:
        raise ValueError("one stress matrix per cluster required")
    verifications = []
    for c, omega_c in enumerate(cluster_omegas):
        sub = partition.subconfiguration(config, c)
        rep = verify_stabilizable(np.asarray(omega_c, float), sub, tolerances)
        if require_verified and not rep.overall:
            raise ValueError(f"cluster {c} stress fails stabilizability verification")
        verifications.append(rep)
    n = config.count
    omega = np.zeros((n, n))
    for omega_c, nodes in zip(cluster_omegas, partition.clusters):
        omega += embed_stress(np.asarray(omega_c, float), nodes, n)
    omega = (omega + omega.T) / 2.0
    report = spectral_report(omega, config.dim, tolerances)
    pbar = augment(config)
    residual = float(np.linalg.norm(omega @ pbar.T))
    norm_prod = np.linalg.norm(omega) * np.linalg.norm(pbar)
    # per-cluster residuals accumulate across the sum, hence the 10x headroom
    eq_ok = bool(residual <= 10 * tolerances.eq * norm_prod) if norm_prod > 0 else True
    collective = report.numeric_rank == n - config.dim - 1
    return EnsembleDesign(
        omega=omega,
        partition=partition,
        cluster_omegas=tuple(np.asarray(o, float) for o in cluster_omegas),
        cluster_verifications=tuple(verifications),
        spectral=report,
        collective=bool(collective),
        equilibrium_residual=residual,
        equilibrium_ok=eq_ok,
    )


# ---------------------------------------------------------------------------
# collective-motion and leader conditions


@dataclass(frozen=True)
class CollectiveMotionReport:
    pair_ranks: dict  # (c, c') -> (rank, required, ok)
    overlap_connected: bool
    overall: bool


def collective_motion_check(config: Configuration,
                            partition: ClusterPartition) -> CollectiveMotionReport:
    """Theorem-3 test: every connected cluster pair needs a bridging set
    whose augmented configuration has full row rank D+1."""
    required = config.dim + 1
    pbar = augment(config)
    pair_ranks = {}
    for pair in partition.connected_pairs():
        bridge = partition.bridging(*pair)
        rank = int(np.linalg.matrix_rank(pbar[:, list(bridge)]))
        pair_ranks[pair] = (rank, required, rank == required)
    overall = partition.overlap_graph_connected() and all(
        ok for (_, _, ok) in pair_ranks.values()
    )
    return CollectiveMotionReport(pair_ranks, partition.overlap_graph_connected(),
                                  bool(overall))


@dataclass(frozen=True)
class LeaderConditionReport:
    per_cluster: dict  # c -> (rank, required, ok)
    overall: bool


def leader_condition_check(config: Configuration, partition: ClusterPartition,
                           leaders: Sequence[int]) -> LeaderConditionReport:
    """Local affine-localizability test per cluster: the cluster's leaders
    together with its attached bridge nodes must affinely span the space."""
    leaders = set(int(i) for i in leaders)
    if any(i < 0 or i >= config.count for i in leaders):
        raise ValueError("leader index out of range")
    pbar = augment(config)
    required = config.dim + 1
    per_cluster = {}
    for c, nodes in enumerate(partition.clusters):
        anchor = sorted((leaders & set(nodes)) | set(partition.bridge_nodes_of(c)))
        rank = int(np.linalg.matrix_rank(pbar[:, anchor])) if anchor else 0
        per_cluster[c] = (rank, required, rank == required)
    overall = all(ok for (_, _, ok) in per_cluster.values())
    return LeaderConditionReport(per_cluster, bool(overall))


# ---------------------------------------------------------------------------
# ensemble convergence bound


@dataclass(frozen=True)
class LambdaBoundReport:
    """Upper bound on the ensemble's convergence eigenvalue.

    ``bound = min_c(lambda_{D+2}(Omega_c) + rho_c)`` with
    ``rho_c = beta * sum_{k != c} ||v_c restricted to B_ck||^2``.
    When the cluster eigenvalue is degenerate the bound is minimized over an
    orthonormal basis of the eigenspace and flagged.
    """

    bound: float
    per_cluster_lambda: tuple[float, ...]
    per_cluster_rho: tuple[float, ...]
    measured_lambda: float
    satisfied: bool
    degenerate_clusters: tuple[int, ...]
    within_hypotheses: bool


def ensemble_lambda_bound(
    config: Configuration,
    partition: ClusterPartition,
    cluster_omegas: Sequence[np.ndarray],
    beta: float,
    ensemble: EnsembleDesign | None = None,
    tol: float = 1e-6,
    degeneracy_rtol: float = 1e-8,
) -> LambdaBoundReport:
    """Evaluate the convergence-eigenvalue bound and compare with measurement.

    The bound is derived under the collective-motion conditions; when those
    fail the formula is still computed but flagged as outside hypotheses.
    """
    d = config.dim
    if ensemble is None:
        ensemble = ensemble_stress(cluster_omegas, partition, config,
                                   require_verified=False)
    lam_terms = []
    rho_terms = []
    degenerate = []
    for c, (omega_c, nodes) in enumerate(zip(cluster_omegas, partition.clusters)):
        omega_c = np.asarray(omega_c, float)
        eigs, vecs = np.linalg.eigh((omega_c + omega_c.T) / 2.0)
        lam = eigs[d + 1]
        scale = max(abs(eigs[-1]), 1e-30)
        space = np.flatnonzero(np.abs(eigs - lam) <= degeneracy_rtol * scale)
        if len(space) > 1:
            degenerate.append(c)
        local = {g: i for i, g in enumerate(nodes)}
        rho_best = np.inf
        for idx in space:
            v = vecs[:, idx]
            rho = 0.0
            for k in range(partition.n_clusters):
                if k == c:
                    continue
                bridge = partition.bridging(c, k)
                if bridge:
                    sub = np.array([local[g] for g in bridge])
                    rho += float(np.sum(v[sub] ** 2))
            rho_best = min(rho_best, beta * rho)
        lam_terms.append(float(lam))
        rho_terms.append(float(rho_best))
    candidates = [l + r for l, r in zip(lam_terms, rho_terms)]
    bound = float(min(candidates))
    measured = float(ensemble.spectral.lambda_d2)
    hypotheses = collective_motion_check(config, partition).overall
    return LambdaBoundReport(
        bound=bound,
        per_cluster_lambda=tuple(lam_terms),
        per_cluster_rho=tuple(rho_terms),
        measured_lambda=measured,
        satisfied=bool(measured <= bound + tol),
        degenerate_clusters=tuple(degenerate),
        within_hypotheses=bool(hypotheses),
    )
