"""Command-line front end: gen | design | usi | partition | simulate | bench.

Each subcommand reads/writes the JSON and CSV formats described in
FORMATS.md.  Errors exit nonzero; pass --error-json for a machine-readable
error report on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import files
from .clusters import (
    ClusterPartition,
    chain_partition,
    collective_motion_check,
    ensemble_lambda_bound,
    ensemble_stress,
    leader_condition_check,
    validate_partition,
)
from .core import Configuration
from .design import DesignParams, design_stress
from .generators import GeneratorSpec, generate_with_segments, letter_w_spec
from .sim import SimConfig, simulate_leader_maneuver, simulate_multicluster, simulate_single, trajectory_svg
from .usi import design_stress_usi


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # uniform error reporting for scripting
        if getattr(args, "error_json", False):
            print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stresslab",
        description="Stress-matrix design and multicluster formation control toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a benchmark configuration")
    p_gen.add_argument("--kind", required=True,
                       choices=["random", "polygon", "octahedron", "cuboctahedron",
                                "truncated-icosahedron", "letter-w"])
    p_gen.add_argument("--n", type=int, help="node count (random/polygon)")
    p_gen.add_argument("--dim", type=int, default=2, help="dimension for random")
    p_gen.add_argument("--seed", type=int, help="rng seed (mandatory for random)")
    p_gen.add_argument("--radius", type=float, default=1.0)
    p_gen.add_argument("--nx", type=int, default=17, help="letter-w bar length (nodes)")
    p_gen.add_argument("-o", "--output", required=True)
    p_gen.add_argument("--segments-out", help="write the segment partition JSON (letter-w)")
    _common(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    for name, forced_usi in (("design", False), ("usi", True)):
        p = sub.add_parser(name, help="design a stress matrix"
                           + (" via the symmetry-reduced program" if forced_usi else ""))
        p.add_argument("-c", "--config", required=True)
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--beta", type=float, default=1.0)
        p.add_argument("--gamma", type=float, default=0.1)
        p.add_argument("--eps-rel", type=float, default=1e-6)
        p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
        p.add_argument("--solver", help="override the conic backend")
        if not forced_usi:
            p.add_argument("--usi", action="store_true",
                           help="use the symmetry-reduced program")
        p.add_argument("--tol-edm", type=float, default=1e-9,
                       help="edge-class length tolerance (usi)")
        p.add_argument("--no-check", action="store_true",
                       help="return results even when verification fails")
        p.add_argument("-o", "--output", required=True, help="result JSON path")
        p.add_argument("--stress-csv", help="also write the stress vector CSV")
        _common(p)
        p.set_defaults(func=cmd_design, forced_usi=forced_usi)

    p_part = sub.add_parser("partition", help="validate and analyze a cluster partition")
    p_part.add_argument("-c", "--config", required=True)
    p_part.add_argument("-p", "--partition", help="partition JSON file")
    p_part.add_argument("--chain", type=int, metavar="C",
                        help="build a chain partition with C clusters instead")
    p_part.add_argument("--bridges", type=int, default=4)
    p_part.add_argument("--seed", type=int, default=None)
    p_part.add_argument("--design", action="store_true",
                        help="design per-cluster stresses and analyze the ensemble")
    p_part.add_argument("--alpha", type=float, default=0.5)
    p_part.add_argument("--beta", type=float, default=1.0)
    p_part.add_argument("--gamma", type=float, default=0.1)
    p_part.add_argument("-o", "--output", required=True, help="report JSON path")
    p_part.add_argument("--partition-out", help="write the partition JSON (with --chain)")
    _common(p_part)
    p_part.set_defaults(func=cmd_partition)

    p_sim = sub.add_parser("simulate", help="simulate the controller")
    p_sim.add_argument("-c", "--config", required=True)
    p_sim.add_argument("-r", "--result", nargs="+",
                       help="design result JSON (one, or one per cluster)")
    p_sim.add_argument("-p", "--partition", help="partition JSON for multicluster runs")
    p_sim.add_argument("--design", action="store_true",
                       help="design stresses on the fly instead of loading results")
    p_sim.add_argument("--alpha", type=float, default=0.5)
    p_sim.add_argument("--beta", type=float, default=1.0)
    p_sim.add_argument("--gamma", type=float, default=0.1)
    p_sim.add_argument("--h", type=float, default=0.1)
    p_sim.add_argument("--horizon", type=float, default=50.0)
    p_sim.add_argument("--integrator", choices=["euler", "rk4"], default="euler")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--switching-period", type=int, default=1)
    p_sim.add_argument("--init-seed", type=int, default=1,
                       help="seed for the random initial positions")
    p_sim.add_argument("--init-scale", type=float, default=1.0)
    p_sim.add_argument("--leaders", type=int, nargs="+")
    p_sim.add_argument("--keyframes", help="keyframe JSON for leader maneuvers")
    p_sim.add_argument("-o", "--output", required=True, help="trajectory CSV path")
    p_sim.add_argument("--svg", help="write an SVG snapshot plot")
    p_sim.add_argument("--svg-times", default="",
                       help="comma-separated snapshot times for --svg")
    _common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("bench", help="run a benchmark suite")
    group = p_bench.add_mutually_exclusive_group(required=True)
    group.add_argument("--suite", help="suite JSON file")
    group.add_argument("--table1", action="store_true",
                       help="run the built-in benchmark roster")
    group.add_argument("--write-default-suite", metavar="PATH",
                       help="write the built-in roster as a suite JSON and exit")
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.add_argument("--include-large", action="store_true")
    p_bench.add_argument("--workers", type=int)
    p_bench.add_argument("-o", "--output", default="bench-out", help="output directory")
    _common(p_bench)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--error-json", action="store_true",
                   help="print errors as JSON on stdout")


# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.kind == "letter-w":
        spec = letter_w_spec(nx=args.nx)
    elif args.kind == "random":
        if args.seed is None:
            raise ValueError("--seed is mandatory for random configurations")
        spec = GeneratorSpec("random", n=args.n, dim=args.dim, seed=args.seed)
    elif args.kind == "polygon":
        spec = GeneratorSpec("polygon", n=args.n, radius=args.radius)
    else:
        spec = GeneratorSpec(args.kind, radius=args.radius)
    config, segments = generate_with_segments(spec)
    Path(args.output).write_text(config.to_json())
    if args.segments_out:
        if segments is None:
            raise ValueError("--segments-out only applies to segmented kinds")
        part = ClusterPartition(config.count, tuple(tuple(s) for s in segments))
        Path(args.segments_out).write_text(part.to_json())
    print(f"wrote {args.output} (N={config.count}, D={config.dim})")
    return 0


def cmd_design(args) -> int:
    config = Configuration.from_json(Path(args.config).read_text())
    params = DesignParams(alpha=args.alpha, beta=args.beta, gamma=args.gamma,
                          eps_rel=args.eps_rel, solver_tol=args.tol,
                          solver=args.solver)
    use_usi = args.forced_usi or getattr(args, "usi", False)
    if use_usi:
        result = design_stress_usi(config, params, tol_edm=args.tol_edm,
                                   check=not args.no_check)
    else:
        result = design_stress(config, params, check=not args.no_check)
    Path(args.output).write_text(files.design_result_to_json(result, config.count,
                                                             config.dim))
    if args.stress_csv:
        Path(args.stress_csv).write_text(result.stress.to_csv())
    print(f"wrote {args.output} (status={result.status}, M={result.m}, "
          f"lambda_d2={result.spectral.lambda_d2:.6g})")
    return 0


def cmd_partition(args) -> int:
    config = Configuration.from_json(Path(args.config).read_text())
    leaders: tuple[int, ...] = ()
    if args.partition:
        partition, leaders = ClusterPartition.from_json(
            Path(args.partition).read_text(), config.count)
    elif args.chain:
        partition = chain_partition(config.count, args.chain, args.bridges, args.seed)
        if args.partition_out:
            Path(args.partition_out).write_text(partition.to_json())
    else:
        raise ValueError("provide --partition FILE or --chain C")
    validation = validate_partition(config, partition)
    motion = collective_motion_check(config, partition)
    leaders_report = (leader_condition_check(config, partition, leaders)
                      if leaders else None)
    ensemble = bound = None
    if args.design:
        params = DesignParams(alpha=args.alpha, beta=args.beta, gamma=args.gamma)
        omegas = [design_stress(partition.subconfiguration(config, c), params).omega
                  for c in range(partition.n_clusters)]
        ensemble = ensemble_stress(omegas, partition, config)
        bound = ensemble_lambda_bound(config, partition, omegas, args.beta,
                                      ensemble=ensemble)
    Path(args.output).write_text(files.partition_report_to_json(
        validation, motion, leaders_report, ensemble, bound))
    print(f"wrote {args.output} (collective={motion.overall})")
    return 0


def cmd_simulate(args) -> int:
    config = Configuration.from_json(Path(args.config).read_text())
    sim = SimConfig(h=args.h, horizon=args.horizon, integrator=args.integrator,
                    seed=args.seed, switching_period=args.switching_period)
    rng = np.random.default_rng(args.init_seed)
    z0 = args.init_scale * rng.random((config.count, config.dim))

    partition = None
    leaders = tuple(args.leaders or ())
    if args.partition:
        partition, file_leaders = ClusterPartition.from_json(
            Path(args.partition).read_text(), config.count)
        leaders = leaders or file_leaders

    params = DesignParams(alpha=args.alpha, beta=args.beta, gamma=args.gamma)
    if partition is None:
        if args.design:
            omegas = [design_stress(config, params).omega]
        elif args.result:
            omegas = [files.parse_design_result(Path(args.result[0]).read_text()).omega]
        else:
            raise ValueError("provide -r RESULT or --design")
    else:
        if args.design:
            omegas = [design_stress(partition.subconfiguration(config, c), params).omega
                      for c in range(partition.n_clusters)]
        elif args.result and len(args.result) == partition.n_clusters:
            omegas = [files.parse_design_result(Path(p).read_text()).omega
                      for p in args.result]
        elif args.result and len(args.result) == 1:
            from .clusters import replicate_design

            seg_lists = [list(c) for c in partition.clusters]
            base = files.parse_design_result(Path(args.result[0]).read_text()).omega
            omegas = replicate_design(base, seg_lists)
        else:
            raise ValueError("provide --design, one result per cluster, or one "
                             "shared result for identical clusters")

    if args.keyframes:
        frames = files.keyframes_from_json(Path(args.keyframes).read_text())
        if not leaders:
            raise ValueError("leader maneuvers need --leaders")
        traj = simulate_leader_maneuver(omegas, partition, config, leaders,
                                        frames, z0, sim)
    elif partition is not None:
        traj = simulate_multicluster(omegas, partition, config, z0, sim)
    else:
        traj = simulate_single(omegas[0], config, z0, sim)

    Path(args.output).write_text(traj.to_csv())
    if args.svg:
        times = [float(t) for t in args.svg_times.split(",") if t.strip()] or \
            [0.0, float(traj.times[-1])]
        Path(args.svg).write_text(trajectory_svg(traj, times))
    final = traj.target_error[-1] if traj.target_error is not None else traj.affine_error[-1]
    print(f"wrote {args.output} ({traj.n_samples} samples, final error {final:.6g})")
    return 0


def cmd_bench(args) -> int:
    if args.write_default_suite:
        suite = bench_mod.table_benchmark_suite(repeats=args.repeats,
                                                include_large=args.include_large)
        Path(args.write_default_suite).write_text(bench_mod.suite_to_json(suite))
        print(f"wrote {args.write_default_suite}")
        return 0
    if args.table1:
        suite = bench_mod.table_benchmark_suite(repeats=args.repeats,
                                                include_large=args.include_large)
    else:
        suite = bench_mod.suite_from_json(Path(args.suite).read_text())
    rows = bench_mod.run_benchmark(suite, args.output, workers=args.workers)
    summary = bench_mod.summarize(rows)
    Path(args.output, "summary.json").write_text(json.dumps(summary, indent=2))
    failures = [r for r in rows if r["status"] == "error"]
    print(f"{len(rows)} rows -> {args.output} ({len(failures)} failures)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
