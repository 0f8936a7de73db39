"""File formats shared by the CLI and the benchmark harness.

Every writer here has a matching reader so that outputs round-trip; the
formats themselves are documented in FORMATS.md.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .clusters import ClusterPartition
from .core import StressVector, Topology, assemble_stress, complete_incidence
from .design import DesignResult
from .sim import Keyframe, Trajectory


# -- design results ----------------------------------------------------------


def design_result_to_json(result: DesignResult, n: int, dim: int) -> str:
    from .core import spectral_efficiency

    eta = None
    if result.m >= 1 and result.spectral.lambda_max > 1e-12:
        eta = spectral_efficiency(result.spectral, result.m, n)
    edges = [[int(i), int(j), float(result.stress.weight(i, j))]
             for i, j in result.topology.edges]
    payload = {
        "kind": "design-result",
        "n": n,
        "dim": dim,
        "params": {
            "alpha": result.params.alpha,
            "beta": result.params.beta,
            "gamma": result.params.gamma,
            "eps_rel": result.params.eps_rel,
        },
        "status": result.status,
        "objective": result.objective,
        "solve_time_s": result.solve_time,
        "wall_time_s": result.wall_time,
        "critical_alpha": result.critical_alpha,
        "edges": edges,
        "m_edges": result.m,
        "avg_degree": result.topology.average_degree,
        "lambda_d2": result.spectral.lambda_d2,
        "lambda_max": result.spectral.lambda_max,
        "spectral_efficiency": eta,
        "eigenvalues": result.spectral.eigenvalues.tolist(),
        "verification": {
            "psd": result.verification.psd,
            "rank_ok": result.verification.rank_ok,
            "equilibrium_ok": result.verification.equilibrium_ok,
            "overall": result.verification.overall,
            "numeric_rank": result.verification.numeric_rank,
            "equilibrium_residual": result.verification.equilibrium_residual,
        },
    }
    if result.classification is not None:
        cls = result.classification
        payload["n_classes"] = cls.n_classes
        payload["reduction_ratio"] = result.reduction_ratio
        payload["classes"] = [
            {"squared_length": float(cls.class_sq_lengths[s]),
             "representative": list(cls.representatives[s]),
             "multiplicity": int(cls.multiplicities[s])}
            for s in range(cls.n_classes)
        ]
    return json.dumps(payload, indent=2)


@dataclass(frozen=True)
class DesignSummary:
    """Parsed design-result file: enough to rebuild the stress matrix."""

    n: int
    dim: int
    stress: StressVector
    topology: Topology
    payload: dict

    @property
    def omega(self) -> np.ndarray:
        return assemble_stress(complete_incidence(self.n), self.stress)


def parse_design_result(text: str) -> DesignSummary:
    payload = json.loads(text)
    if payload.get("kind") != "design-result":
        raise ValueError("not a design-result file")
    n = int(payload["n"])
    values = np.zeros(n * (n - 1) // 2)
    from .core import edge_index

    edges = []
    for i, j, w in payload["edges"]:
        values[edge_index(int(i), int(j), n)] = float(w)
        edges.append((int(i), int(j)))
    return DesignSummary(n, int(payload["dim"]), StressVector(n, values),
                         Topology(n, tuple(edges)), payload)


# -- keyframes ---------------------------------------------------------------
# [{"time": t, "maps": [{"A": [[...]], "b": [...]}, ...]}, ...]


def keyframes_to_json(frames: list[Keyframe]) -> str:
    return json.dumps([
        {"time": f.time,
         "maps": [{"A": np.asarray(a).tolist(), "b": np.asarray(b).tolist()}
                  for a, b in f.maps]}
        for f in frames
    ], indent=2)


def keyframes_from_json(text: str) -> list[Keyframe]:
    payload = json.loads(text)
    return [
        Keyframe(float(f["time"]),
                 tuple((np.asarray(m["A"], float), np.asarray(m["b"], float))
                       for m in f["maps"]))
        for f in payload
    ]


# -- trajectories ------------------------------------------------------------


def parse_trajectory_csv(text: str) -> Trajectory:
    lines = [l for l in text.strip().splitlines() if l]
    header = lines[0].split(",")
    has_target = header[-1] == "target_error"
    pos_cols = len(header) - 2 - (1 if has_target else 0)
    coord_names = [h for h in header[1:1 + pos_cols]]
    d = len({name[-1] for name in coord_names})
    n = pos_cols // d
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    times = rows[:, 0]
    positions = rows[:, 1:1 + pos_cols].reshape(len(rows), n, d)
    affine_error = rows[:, 1 + pos_cols]
    target_error = rows[:, 2 + pos_cols] if has_target else None
    return Trajectory(times, positions, affine_error, target_error=target_error)


# -- partition analysis report -----------------------------------------------


def partition_report_to_json(validation, motion, leaders_report=None,
                             ensemble=None, bound=None) -> str:
    payload: dict = {
        "kind": "partition-report",
        "validation": {
            "covered": validation.covered,
            "sizes_ok": validation.sizes_ok,
            "overlap_connected": validation.overlap_connected,
            "total_overlap": validation.total_overlap,
            "bridges": {f"{c}-{k}": list(b)
                        for (c, k), b in validation.pair_bridges.items()},
        },
        "collective_motion": {
            "overall": motion.overall,
            "pairs": {f"{c}-{k}": {"rank": r, "required": req, "ok": ok}
                      for (c, k), (r, req, ok) in motion.pair_ranks.items()},
        },
    }
    if leaders_report is not None:
        payload["leader_condition"] = {
            "overall": leaders_report.overall,
            "clusters": {str(c): {"rank": r, "required": req, "ok": ok}
                         for c, (r, req, ok) in leaders_report.per_cluster.items()},
        }
    if ensemble is not None:
        payload["ensemble"] = {
            "lambda_d2": ensemble.spectral.lambda_d2,
            "lambda_max": ensemble.spectral.lambda_max,
            "numeric_rank": ensemble.spectral.numeric_rank,
            "collective": ensemble.collective,
            "equilibrium_residual": ensemble.equilibrium_residual,
        }
    if bound is not None:
        payload["lambda_bound"] = {
            "bound": bound.bound,
            "measured": bound.measured_lambda,
            "satisfied": bound.satisfied,
            "per_cluster_lambda": list(bound.per_cluster_lambda),
            "per_cluster_rho": list(bound.per_cluster_rho),
            "degenerate_clusters": list(bound.degenerate_clusters),
            "within_hypotheses": bound.within_hypotheses,
        }
    return json.dumps(payload, indent=2)
