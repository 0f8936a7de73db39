"""Benchmark harness: runs design cases over hyperparameter sweeps and
reports runtime, sparsity, convergence and efficiency metrics as CSV/JSON.

Cases run in a process pool (``STRESSLAB_THREADS`` caps the size); every
row records the exact generator seed so it can be reproduced in isolation.
Failures are recorded as error rows and the suite continues.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .clusters import ClusterPartition, chain_partition, ensemble_stress, replicate_design
from .core import matrix_topology, spectral_efficiency
from .design import DesignParams, design_stress
from .generators import GeneratorSpec, generate, generate_with_segments
from .usi import design_stress_usi


@dataclass(frozen=True)
class BenchmarkCase:
    """One test case: a configuration source plus the methods to run on it.

    ``method`` is "p2", "p3" (symmetry-reduced) or "mc" (multicluster with
    ``n_clusters`` chain clusters sharing ``n_bridges`` nodes).  Random
    configurations are regenerated per repeat with ``seeds``; deterministic
    configurations reuse the same geometry and the repeats average timing.
    """

    name: str
    generator: GeneratorSpec
    method: str = "p2"
    alphas: tuple[float, ...] = (0.5, 1.5, 5.0)
    beta: float = 1.0
    gamma: float = 0.1
    repeats: int = 1
    seeds: tuple[int, ...] = (0,)
    n_clusters: int | None = None
    n_bridges: int | None = None
    reuse_segment_design: bool = False  # repeated-segment: design one cluster, reuse

    def __post_init__(self):
        if self.method not in ("p2", "p3", "mc"):
            raise ValueError("method must be p2, p3 or mc")
        if self.repeats < 1:
            raise ValueError("repeat count must be >= 1")
        if len(self.seeds) < self.repeats:
            object.__setattr__(self, "seeds",
                               tuple(self.seeds) + tuple(range(len(self.seeds), self.repeats)))


@dataclass(frozen=True)
class BenchmarkSuite:
    cases: tuple[BenchmarkCase, ...]

    def __post_init__(self):
        names = [c.name for c in self.cases]
        if len(set(names)) != len(names):
            raise ValueError("case names must be unique")


ROW_FIELDS = [
    "case", "method", "n", "dim", "alpha", "beta", "gamma", "seed", "repeat",
    "status", "runtime_s", "m_edges", "avg_degree", "lambda_d2", "lambda_max",
    "spectral_efficiency", "verified", "n_classes", "error",
]


def _run_case_point(case: BenchmarkCase, alpha: float, repeat: int) -> dict:
    """One (case, alpha, repeat) row; exceptions become error rows."""
    seed = case.seeds[repeat]
    row = {k: "" for k in ROW_FIELDS}
    row.update({"case": case.name, "method": case.method, "alpha": alpha,
                "beta": case.beta, "gamma": case.gamma, "seed": seed,
                "repeat": repeat, "verified": False})
    try:
        gen_spec = case.generator
        if gen_spec.kind == "random":
            gen_spec = GeneratorSpec(kind="random", n=gen_spec.n, dim=gen_spec.dim,
                                     seed=seed)
        params = DesignParams(alpha=alpha, beta=case.beta, gamma=case.gamma)
        if case.method == "mc":
            return _run_multicluster(case, gen_spec, params, seed, row)
        config = generate(gen_spec)
        t0 = time.perf_counter()
        if case.method == "p3":
            result = design_stress_usi(config, params, check=False)
            row["n_classes"] = (result.classification.n_classes
                                if result.classification is not None else "")
        else:
            result = design_stress(config, params, check=False)
        row.update({
            "n": config.count, "dim": config.dim,
            "runtime_s": time.perf_counter() - t0,
            "status": result.status,
            "m_edges": result.m,
            "avg_degree": result.topology.average_degree,
            "lambda_d2": result.spectral.lambda_d2,
            "lambda_max": result.spectral.lambda_max,
            "spectral_efficiency": spectral_efficiency(result.spectral, result.m,
                                                       config.count),
            "verified": result.verification.overall,
        })
        return row
    except Exception as exc:  # suite keeps going; the row records the failure
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row


def _run_multicluster(case: BenchmarkCase, gen_spec: GeneratorSpec,
                      params: DesignParams, seed: int, row: dict) -> dict:
    config, segments = generate_with_segments(gen_spec)
    t0 = time.perf_counter()
    if segments is not None and case.reuse_segment_design:
        # identical-up-to-affine segments: one design serves every cluster
        partition = ClusterPartition(config.count, tuple(tuple(s) for s in segments))
        base = design_stress(partition.subconfiguration(config, 0), params, check=False)
        cluster_omegas = replicate_design(base.omega, segments)
        statuses = [base.status]
        verified = [base.verification.overall] * partition.n_clusters
    else:
        if case.n_clusters is None or case.n_bridges is None:
            raise ValueError("multicluster cases need n_clusters and n_bridges")
        partition = chain_partition(config.count, case.n_clusters, case.n_bridges,
                                    seed=seed)
        cluster_omegas = []
        statuses = []
        verified = []
        for c in range(partition.n_clusters):
            res = design_stress(partition.subconfiguration(config, c), params,
                                check=False)
            cluster_omegas.append(res.omega)
            statuses.append(res.status)
            verified.append(res.verification.overall)
    ensemble = ensemble_stress(cluster_omegas, partition, config,
                               require_verified=False)
    runtime = time.perf_counter() - t0
    topo = matrix_topology(ensemble.omega, params.eps_rel)
    row.update({
        "n": config.count, "dim": config.dim,
        "runtime_s": runtime,
        "status": ";".join(sorted(set(statuses))),
        "m_edges": topo.m,
        "avg_degree": topo.average_degree,
        "lambda_d2": ensemble.spectral.lambda_d2,
        "lambda_max": ensemble.spectral.lambda_max,
        "spectral_efficiency": spectral_efficiency(ensemble.spectral, topo.m,
                                                   config.count),
        "verified": all(verified) and ensemble.equilibrium_ok,
    })
    return row


def run_benchmark(suite: BenchmarkSuite, output_dir: str | os.PathLike,
                  workers: int | None = None) -> list[dict]:
    """Run every (case, alpha, repeat) point; write results.csv/results.json."""
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    points = [(case, alpha, rep)
              for case in suite.cases
              for alpha in case.alphas
              for rep in range(case.repeats)]
    if workers is None:
        workers = int(os.environ.get("STRESSLAB_THREADS", "0")) or (os.cpu_count() or 1)
    workers = max(1, min(workers, len(points)))
    if workers == 1:
        rows = [_run_case_point(*p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_case_point, *zip(*points)))
    write_rows_csv(outdir / "results.csv", rows)
    (outdir / "results.json").write_text(json.dumps(rows, indent=2, default=_jsonable))
    return rows


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON-serializable: {type(x)}")


def write_rows_csv(path: str | os.PathLike, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ROW_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_rows_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(rows: list[dict]) -> list[dict]:
    """Mean/median runtime and mean metrics per (case, method, alpha)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row["status"] == "error":
            continue
        groups.setdefault((row["case"], row["method"], row["alpha"]), []).append(row)
    out = []
    for (case, method, alpha), grp in groups.items():
        runtimes = np.array([float(r["runtime_s"]) for r in grp])
        out.append({
            "case": case, "method": method, "alpha": alpha, "runs": len(grp),
            "runtime_mean_s": float(runtimes.mean()),
            "runtime_median_s": float(np.median(runtimes)),
            "avg_degree_mean": float(np.mean([float(r["avg_degree"]) for r in grp])),
            "lambda_d2_mean": float(np.mean([float(r["lambda_d2"]) for r in grp])),
            "spectral_efficiency_mean": float(
                np.mean([float(r["spectral_efficiency"]) for r in grp])),
            "verified_rate": float(np.mean([str(r["verified"]) == "True" for r in grp])),
        })
    return out


def table_benchmark_suite(repeats: int = 3, include_large: bool = False) -> BenchmarkSuite:
    """The benchmark roster: random configurations of several sizes plus the
    symmetric solids and the multicluster letter-W.

    Random-500 is gated behind ``include_large`` (ten-cluster chain design,
    several minutes of solver time).
    """
    alphas = (0.5, 1.5, 5.0)
    seeds = tuple(range(repeats))
    cases = [
        BenchmarkCase("Random-5", GeneratorSpec("random", n=5, dim=2, seed=0),
                      "p2", alphas, repeats=repeats, seeds=seeds),
        BenchmarkCase("Random-8", GeneratorSpec("random", n=8, dim=2, seed=0),
                      "p2", alphas, repeats=repeats, seeds=seeds),
        BenchmarkCase("Random-50", GeneratorSpec("random", n=50, dim=2, seed=0),
                      "p2", (0.5,), repeats=min(repeats, 2), seeds=seeds),
        BenchmarkCase("Random-100-mc", GeneratorSpec("random", n=100, dim=2, seed=0),
                      "mc", (0.5,), repeats=min(repeats, 2), seeds=seeds,
                      n_clusters=2, n_bridges=20),
        BenchmarkCase("Circular-10", GeneratorSpec("polygon", n=10), "p2",
                      alphas, repeats=repeats, seeds=seeds),
        BenchmarkCase("Circular-10-usi", GeneratorSpec("polygon", n=10), "p3",
                      alphas, repeats=repeats, seeds=seeds),
        BenchmarkCase("Cuboctahedron", GeneratorSpec("cuboctahedron"), "p2",
                      alphas, repeats=repeats, seeds=seeds),
        BenchmarkCase("Cuboctahedron-usi", GeneratorSpec("cuboctahedron"), "p3",
                      alphas, repeats=repeats, seeds=seeds),
        BenchmarkCase("TruncIcosa", GeneratorSpec("truncated-icosahedron"), "p2",
                      (0.5,), repeats=1, seeds=seeds),
        BenchmarkCase("TruncIcosa-usi", GeneratorSpec("truncated-icosahedron"), "p3",
                      (0.5,), repeats=min(repeats, 2), seeds=seeds),
    ]
    from .generators import letter_w_spec

    cases.append(BenchmarkCase("Letter-W-mc", letter_w_spec(), "mc", (0.5,),
                               repeats=1, seeds=seeds, reuse_segment_design=True))
    if include_large:
        cases.append(BenchmarkCase("Random-500-mc",
                                   GeneratorSpec("random", n=500, dim=2, seed=0),
                                   "mc", (0.5,), repeats=1, seeds=seeds,
                                   n_clusters=10, n_bridges=12))
    return BenchmarkSuite(tuple(cases))


# -- suite (de)serialization for the CLI ------------------------------------


def suite_to_json(suite: BenchmarkSuite) -> str:
    def case_dict(case: BenchmarkCase) -> dict:
        d = asdict(case)
        gen = d.pop("generator")
        gen = {k: v for k, v in gen.items() if v is not None}
        if "base" in gen:
            gen["base"] = np.asarray(gen["base"]).tolist()
        if "transforms" in gen:
            gen["transforms"] = [[np.asarray(a).tolist(), np.asarray(b).tolist()]
                                 for a, b in gen["transforms"]]
        d["generator"] = gen
        return d

    return json.dumps({"cases": [case_dict(c) for c in suite.cases]}, indent=2)


def suite_from_json(text: str) -> BenchmarkSuite:
    payload = json.loads(text)
    cases = []
    for d in payload["cases"]:
        gen = dict(d.pop("generator"))
        if "base" in gen and gen["base"] is not None:
            gen["base"] = np.asarray(gen["base"], float)
        if "transforms" in gen and gen["transforms"] is not None:
            gen["transforms"] = tuple((np.asarray(a, float), np.asarray(b, float))
                                      for a, b in gen["transforms"])
        d["generator"] = GeneratorSpec(**gen)
        for key in ("alphas", "seeds"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        cases.append(BenchmarkCase(**d))
    return BenchmarkSuite(tuple(cases))
