"""Time-domain simulation of the stress-based controllers.

* single cluster: the linear time-invariant flow ``dZ/dt = -Omega Z``;
* multicluster: the randomized switching controller where every agent picks
  one of its clusters at each switching instant and applies that cluster's
  consensus law with gain equal to its membership count;
* leader maneuvers: leader positions are overridden to piecewise-affine
  keyframe targets (infinite-gain pinning) while followers run the
  applicable law.

All runs are deterministic given the seed; per-agent updates within a step
are synchronous (computed against the previous-step state).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .clusters import ClusterPartition, embed_stress, leader_condition_check
from .core import Configuration, augment

EULER_STABILITY = 2.0
RK4_STABILITY = 2.78


class StabilityError(ValueError):
    """Step size too large for the requested integrator."""


@dataclass(frozen=True)
class SimConfig:
    """Integration settings: step ``h`` [s], horizon [s], integrator,
    rng seed and the switching period (steps between cluster re-draws)."""

    h: float = 0.1
    horizon: float = 10.0
    integrator: str = "euler"
    seed: int = 0
    switching_period: int = 1

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size must be positive")
        if self.horizon < self.h:
            raise ValueError("horizon must cover at least one step")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError("integrator must be 'euler' or 'rk4'")
        if self.switching_period < 1:
            raise ValueError("switching period must be >= 1 step")

    @property
    def n_steps(self) -> int:
        return int(np.floor(self.horizon / self.h + 1e-12))


@dataclass(frozen=True)
class Trajectory:
    """Sampled run: times, positions (samples x N x D) and error series."""

    times: np.ndarray
    positions: np.ndarray
    affine_error: np.ndarray
    target_error: np.ndarray | None = None
    choices: np.ndarray | None = None  # per-sample cluster pick per agent
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("trajectory diverged: non-finite positions")

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def to_csv(self) -> str:
        """Columns: t, z_<i><axis>..., affine_error[, target_error]."""
        n, d = self.positions.shape[1:]
        axes = "xyz"[:d]
        header = ["t"]
        for i in range(n):
            header += [f"z_{i}{a}" for a in axes]
        header.append("affine_error")
        if self.target_error is not None:
            header.append("target_error")
        rows = [",".join(header)]
        for k in range(self.n_samples):
            vals = [f"{self.times[k]!r}"]
            vals += [f"{v!r}" for v in self.positions[k].reshape(-1)]
            vals.append(f"{self.affine_error[k]!r}")
            if self.target_error is not None:
                vals.append(f"{self.target_error[k]!r}")
            rows.append(",".join(vals))
        return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# affine fitting


@dataclass(frozen=True)
class AffineFit:
    error: float
    theta: np.ndarray  # D x D linear part
    offset: np.ndarray  # D translation


def affine_fit_error(z: np.ndarray, config_target: Configuration) -> AffineFit:
    """Best affine map of the target onto ``z`` and the residual RMS.

    Minimizes ``sum_i ||z_i - Theta p_i - t||^2``; the error is
    ``sqrt(residual / N)``, zero exactly when z is an affine image of the
    target.
    """
    z = _as_points(z, config_target.count, config_target.dim)
    pbar = augment(config_target)
    sol, *_ = np.linalg.lstsq(pbar.T, z, rcond=None)  # (D+1) x D
    fitted = pbar.T @ sol
    resid = float(np.linalg.norm(z - fitted) ** 2)
    theta = sol[:-1].T
    offset = sol[-1]
    return AffineFit(float(np.sqrt(resid / config_target.count)), theta, offset)


def per_cluster_fits(z: np.ndarray, config: Configuration,
                     partition: ClusterPartition) -> tuple[list[AffineFit], dict]:
    """Per-cluster affine fits plus the map differences across bridges.

    The map-difference norms (one per connected pair) vanish exactly when
    all clusters move under one global affine transformation.
    """
    z = _as_points(z, config.count, config.dim)
    fits = []
    for c in range(partition.n_clusters):
        sub = partition.subconfiguration(config, c)
        fits.append(affine_fit_error(z[list(partition.clusters[c])], sub))
    deltas = {}
    for c, k in partition.connected_pairs():
        da = np.hstack([fits[c].theta, fits[c].offset[:, None]])
        db = np.hstack([fits[k].theta, fits[k].offset[:, None]])
        deltas[(c, k)] = float(np.linalg.norm(da - db))
    return fits, deltas


def _as_points(z: np.ndarray, n: int, d: int) -> np.ndarray:
    z = np.asarray(z, float)
    if z.shape == (n, d):
        return z
    if z.shape == (n * d,):
        return z.reshape(n, d)
    if z.shape == (d, n):
        return z.T
    raise ValueError(f"cannot interpret state of shape {z.shape} as {n} x {d} points")


# ---------------------------------------------------------------------------
# single-cluster flow


def _check_step(omega: np.ndarray, sim: SimConfig) -> float:
    lam_max = float(np.linalg.eigvalsh((omega + omega.T) / 2.0)[-1])
    _check_rate(lam_max, sim)
    return lam_max


def _check_rate(rate: float, sim: SimConfig) -> None:
    limit = EULER_STABILITY if sim.integrator == "euler" else RK4_STABILITY
    if rate > 0 and sim.h * rate >= limit:
        raise StabilityError(
            f"h={sim.h} unstable for spectral bound {rate:.4g} with "
            f"{sim.integrator}; use h < {limit / rate:.4g}"
        )


def _check_switching_step(cluster_omegas, counts: np.ndarray, sim: SimConfig) -> None:
    # any instantaneous system matrix has rows drawn from C_i * Omega_c, so
    # its 2-norm is at most max(C_i) * max_c ||Omega_c||
    worst = max(
        float(np.linalg.eigvalsh((np.asarray(om, float) + np.asarray(om, float).T) / 2.0)[-1])
        for om in cluster_omegas
    )
    _check_rate(float(counts.max()) * worst, sim)


def simulate_single(omega: np.ndarray, config_target: Configuration,
                    z0: np.ndarray, sim: SimConfig) -> Trajectory:
    """Integrate the LTI consensus flow and record the affine-fit error."""
    omega = np.asarray(omega, float)
    n, d = config_target.count, config_target.dim
    z = _as_points(z0, n, d).copy()
    _check_step(omega, sim)
    steps = sim.n_steps
    times = np.arange(steps + 1) * sim.h
    positions = np.empty((steps + 1, n, d))
    errors = np.empty(steps + 1)
    positions[0] = z
    errors[0] = affine_fit_error(z, config_target).error

    def rhs(state: np.ndarray) -> np.ndarray:
        return -(omega @ state)

    for k in range(steps):
        z = _advance(rhs, z, sim.h, sim.integrator)
        positions[k + 1] = z
        errors[k + 1] = affine_fit_error(z, config_target).error
    return Trajectory(times, positions, errors, meta={"mode": "single"})


def _advance(rhs: Callable[[np.ndarray], np.ndarray], z: np.ndarray, h: float,
             integrator: str) -> np.ndarray:
    if integrator == "euler":
        return z + h * rhs(z)
    k1 = rhs(z)
    k2 = rhs(z + 0.5 * h * k1)
    k3 = rhs(z + 0.5 * h * k2)
    k4 = rhs(z + h * k3)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# randomized multicluster switching


def simulate_multicluster(cluster_omegas: Sequence[np.ndarray],
                          partition: ClusterPartition,
                          config_target: Configuration,
                          z0: np.ndarray, sim: SimConfig) -> Trajectory:
    """Randomized switching controller (deterministic per seed).

    At each switching instant every agent draws one of its clusters
    uniformly; until the next instant its velocity is the chosen cluster's
    consensus law scaled by the membership count (the inverse selection
    probability).  The cluster choice is frozen within an integration step.
    """
    n, d = config_target.count, config_target.dim
    z = _as_points(z0, n, d).copy()
    padded = [embed_stress(np.asarray(om, float), nodes, n)
              for om, nodes in zip(cluster_omegas, partition.clusters)]
    counts = partition.membership_counts()
    if np.any(counts == 0):
        raise ValueError("partition leaves nodes uncovered")
    memberships = partition.memberships()
    member_arr = [np.array(m, dtype=int) for m in memberships]
    _check_switching_step(cluster_omegas, counts, sim)

    rng = np.random.default_rng(sim.seed)
    steps = sim.n_steps
    times = np.arange(steps + 1) * sim.h
    positions = np.empty((steps + 1, n, d))
    errors = np.empty(steps + 1)
    choices = np.empty((steps + 1, n), dtype=int)
    positions[0] = z
    errors[0] = affine_fit_error(z, config_target).error
    gains = counts.astype(float)
    sigma = _draw_choices(rng, member_arr)
    choices[0] = sigma
    energy_up = 0

    def rhs(state: np.ndarray) -> np.ndarray:
        u = np.zeros_like(state)
        for c, pad in enumerate(padded):
            rows = np.flatnonzero(sigma == c)
            if rows.size:
                u[rows] = -gains[rows, None] * (pad[rows] @ state)
        return u

    for k in range(steps):
        if k % sim.switching_period == 0 and k > 0:
            sigma = _draw_choices(rng, member_arr)
        z_new = _advance(rhs, z, sim.h, sim.integrator)
        positions[k + 1] = z_new
        errors[k + 1] = affine_fit_error(z_new, config_target).error
        if errors[k + 1] > errors[k]:
            energy_up += 1
        choices[k + 1] = sigma
        z = z_new
    return Trajectory(times, positions, errors, choices=choices,
                      meta={"mode": "multicluster", "seed": sim.seed,
                            "error_increase_steps": energy_up})


def _draw_choices(rng: np.random.Generator, memberships: list[np.ndarray]) -> np.ndarray:
    sigma = np.empty(len(memberships), dtype=int)
    for i, options in enumerate(memberships):
        sigma[i] = options[0] if options.size == 1 else rng.choice(options)
    return sigma


# ---------------------------------------------------------------------------
# leader-guided maneuvers


@dataclass(frozen=True)
class Keyframe:
    """Affine target map(s) reached at ``time``: one (A, b) per cluster
    (a single pair applies to all clusters), relative to the nominal
    configuration."""

    time: float
    maps: tuple[tuple[np.ndarray, np.ndarray], ...]


def _normalize_keyframes(keyframes: Sequence[Keyframe], n_clusters: int):
    frames = sorted(keyframes, key=lambda f: f.time)
    out = []
    for f in frames:
        maps = f.maps
        if len(maps) == 1 and n_clusters > 1:
            maps = tuple(maps) * n_clusters
        if len(maps) != n_clusters:
            raise ValueError("keyframe must carry one affine map per cluster")
        out.append(Keyframe(f.time, tuple((np.asarray(a, float), np.asarray(b, float))
                                          for a, b in maps)))
    return out


def _interp_maps(frames: list[Keyframe], t: float):
    if t <= frames[0].time:
        return frames[0].maps
    if t >= frames[-1].time:
        return frames[-1].maps
    for lo, hi in zip(frames[:-1], frames[1:]):
        if lo.time <= t <= hi.time:
            w = (t - lo.time) / (hi.time - lo.time) if hi.time > lo.time else 1.0
            return tuple(
                ((1 - w) * a0 + w * a1, (1 - w) * b0 + w * b1)
                for (a0, b0), (a1, b1) in zip(lo.maps, hi.maps)
            )
    return frames[-1].maps


def keyframe_targets(config: Configuration, partition: ClusterPartition | None,
                     frames: list[Keyframe], t: float) -> np.ndarray:
    """Keyframe-implied node positions at time t (N x D).

    Shared bridge nodes take the first containing cluster's map; well-formed
    keyframes agree on bridges so the choice is immaterial.
    """
    maps = _interp_maps(frames, t)
    n, d = config.count, config.dim
    target = np.empty((n, d))
    if partition is None:
        a, b = maps[0]
        return (a @ config.coords + b[:, None]).T
    assigned = np.zeros(n, dtype=bool)
    for c in range(partition.n_clusters - 1, -1, -1):
        a, b = maps[c]
        idx = list(partition.clusters[c])
        target[idx] = (a @ config.coords[:, idx] + b[:, None]).T
        assigned[idx] = True
    if not assigned.all():
        raise ValueError("partition leaves nodes without a keyframe target")
    return target


def simulate_leader_maneuver(
    cluster_omegas: Sequence[np.ndarray],
    partition: ClusterPartition | None,
    config_target: Configuration,
    leaders: Sequence[int],
    keyframes: Sequence[Keyframe],
    z0: np.ndarray,
    sim: SimConfig,
) -> Trajectory:
    """Followers run the applicable control law; leader positions are
    overridden to the interpolated keyframe targets each step.

    A leader allocation violating the per-cluster localizability condition
    only warns (negative demonstrations are legitimate runs).
    """
    n, d = config_target.count, config_target.dim
    leaders = np.array(sorted(set(int(i) for i in leaders)), dtype=int)
    if leaders.size == 0:
        raise ValueError("leader maneuvers need a nonempty leader set")
    single = partition is None or partition.n_clusters == 1
    if partition is not None:
        check = leader_condition_check(config_target, partition, leaders)
        if not check.overall:
            warnings.warn(
                "leader set does not satisfy the per-cluster localizability "
                f"condition: {check.per_cluster}", stacklevel=2)
    frames = _normalize_keyframes(keyframes, 1 if single else partition.n_clusters)

    if single:
        omega = np.asarray(cluster_omegas[0], float)
        padded = [omega]
        part = ClusterPartition(n, (tuple(range(n)),))
    else:
        padded = [embed_stress(np.asarray(om, float), nodes, n)
                  for om, nodes in zip(cluster_omegas, partition.clusters)]
        part = partition
    counts = part.membership_counts()
    gains = counts.astype(float)
    member_arr = [np.array(m, dtype=int) for m in part.memberships()]
    _check_switching_step(padded if single else cluster_omegas, counts, sim)

    rng = np.random.default_rng(sim.seed)
    follower_mask = np.ones(n, dtype=bool)
    follower_mask[leaders] = False

    steps = sim.n_steps
    times = np.arange(steps + 1) * sim.h
    positions = np.empty((steps + 1, n, d))
    aff_err = np.empty(steps + 1)
    tgt_err = np.empty(steps + 1)
    z = _as_points(z0, n, d).copy()
    z[leaders] = keyframe_targets(config_target, None if single else part,
                                  frames, 0.0)[leaders]
    positions[0] = z
    aff_err[0] = affine_fit_error(z, config_target).error
    tgt_err[0] = _target_rms(z, keyframe_targets(config_target,
                                                 None if single else part, frames, 0.0))
    sigma = _draw_choices(rng, member_arr)

    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        pinned = state.copy()
        pinned[leaders] = keyframe_targets(config_target, None if single else part,
                                           frames, t)[leaders]
        u = np.zeros_like(state)
        for c, pad in enumerate(padded):
            rows = np.flatnonzero(sigma == c)
            if rows.size:
                u[rows] = -gains[rows, None] * (pad[rows] @ pinned)
        u[leaders] = 0.0
        return u

    for k in range(steps):
        if k % sim.switching_period == 0 and k > 0:
            sigma = _draw_choices(rng, member_arr)
        t = times[k]
        if sim.integrator == "euler":
            z = z + sim.h * rhs(t, z)
        else:
            h = sim.h
            k1 = rhs(t, z)
            k2 = rhs(t + h / 2, z + h / 2 * k1)
            k3 = rhs(t + h / 2, z + h / 2 * k2)
            k4 = rhs(t + h, z + h * k3)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        target = keyframe_targets(config_target, None if single else part,
                                  frames, times[k + 1])
        z[leaders] = target[leaders]
        positions[k + 1] = z
        aff_err[k + 1] = affine_fit_error(z, config_target).error
        tgt_err[k + 1] = _target_rms(z, target)
    return Trajectory(times, positions, aff_err, target_error=tgt_err,
                      meta={"mode": "leader", "seed": sim.seed,
                            "leaders": leaders.tolist()})


def _target_rms(z: np.ndarray, target: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum((z - target) ** 2, axis=1))))


# ---------------------------------------------------------------------------
# SVG snapshots (dependency-free plotting for the CLI)


def trajectory_svg(traj: Trajectory, snapshot_times: Sequence[float],
                   size: int = 480) -> str:
    """Minimal SVG: agent paths (2D projection of the first two axes) with
    markers at the requested snapshot times."""
    pos = traj.positions[:, :, :2]
    lo = pos.reshape(-1, 2).min(axis=0)
    hi = pos.reshape(-1, 2).max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * float(span.max())
    lo, span = lo - pad, span + 2 * pad

    def to_px(p):
        q = (p - lo) / span * (size - 20) + 10
        return q[0], size - q[1]

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    n = pos.shape[1]
    for i in range(n):
        pts = " ".join("%.2f,%.2f" % to_px(pos[k, i]) for k in range(traj.n_samples))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#8888cc" '
                     'stroke-width="0.6"/>')
    for t in snapshot_times:
        k = int(np.argmin(np.abs(traj.times - t)))
        for i in range(n):
            x, y = to_px(pos[k, i])
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.4" fill="#cc3333"/>')
    parts.append("</svg>")
    return "\n".join(parts)
