"""Sparse fast-converging stress matrix design and multicluster affine
formation control: convex design (generic and symmetry-reduced), cluster
partitioning with collective-motion analysis, and controller simulation."""

from .core import (
    Configuration,
    DegenerateConfigurationError,
    ExtractionResult,
    MetricError,
    SpectralReport,
    StressVector,
    Tolerances,
    Topology,
    VerificationReport,
    assemble_stress,
    augment,
    complete_incidence,
    edge_array,
    edge_count,
    edge_index,
    edge_list,
    edge_permutation,
    extract_topology,
    kernel_basis,
    permute_configuration,
    spectral_efficiency,
    spectral_report,
    stress_from_topology,
    verify_stabilizable,
)
from .generators import (
    GeneratorSpec,
    apply_affine,
    bar_segment,
    generate,
    generate_with_segments,
    letter_w_maneuver_maps,
    letter_w_spec,
)
from .design import (
    ConicProblem,
    DesignParams,
    DesignResult,
    DesignVerificationError,
    LmiBlock,
    StageError,
    assemble_p2,
    build_nullspace_operator,
    critical_alpha,
    design_stress,
    solve_design,
    trace_weights,
)
from .solvers import ConicSolution, SolverError, solve_conic
from .usi import (
    StressClassification,
    check_permutation_invariance,
    classify_configuration,
    classify_edges,
    design_stress_usi,
    edm,
    polygon_orbit_classes,
    reduce_p3,
)
from .clusters import (
    ClusterPartition,
    CollectiveMotionReport,
    EnsembleDesign,
    LambdaBoundReport,
    LeaderConditionReport,
    PartitionError,
    PartitionReport,
    collective_motion_check,
    embed_stress,
    ensemble_lambda_bound,
    ensemble_stress,
    leader_condition_check,
    validate_partition,
)
from .sim import (
    AffineFit,
    Keyframe,
    SimConfig,
    StabilityError,
    Trajectory,
    affine_fit_error,
    keyframe_targets,
    per_cluster_fits,
    simulate_leader_maneuver,
    simulate_multicluster,
    simulate_single,
    trajectory_svg,
)

__version__ = "0.1.0"
