"""Deterministic benchmark configuration generators.

Kinds: ``random`` (seeded uniform in the unit hypercube), ``polygon``
(regular N-gon on a circle), the fixed solids ``octahedron`` /
``cuboctahedron`` / ``truncated-icosahedron`` (unit circumradius, standard
Cartesian constructions), and ``repeated-segment`` (a base configuration
replicated through per-segment affine maps, with coincident nodes merged
into shared bridge nodes).

The letter-"W" benchmark configuration is a canned repeated-segment spec:
four identical 3D bar segments (a 17 x 2 x 2 grid, 68 nodes each) laid out
as the strokes of a W by vertical-shear maps, adjacent strokes sharing the
4 coplanar nodes of their interface face.  Merged size: 4*68 - 3*4 = 260.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Configuration

SOLID_SIZES = {"octahedron": 6, "cuboctahedron": 12, "truncated-icosahedron": 60}
KINDS = ("random", "polygon", "octahedron", "cuboctahedron",
         "truncated-icosahedron", "repeated-segment")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters for one benchmark configuration.

    ``seed`` is mandatory for the random kind.  ``base`` / ``transforms`` /
    ``merge_tol`` apply to repeated-segment only: segment s places
    ``A_s @ base + b_s`` and nodes closer than ``merge_tol`` (relative to the
    bounding-box diagonal) are merged into single bridge nodes.
    """

    kind: str
    n: int | None = None
    dim: int | None = None
    seed: int | None = None
    radius: float = 1.0
    base: np.ndarray | None = None
    transforms: tuple[tuple[np.ndarray, np.ndarray], ...] | None = None
    merge_tol: float = 1e-9

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")


def generate(spec: GeneratorSpec) -> Configuration:
    """Build the configuration for ``spec``; bitwise deterministic."""
    config, _ = generate_with_segments(spec)
    return config


def generate_with_segments(spec: GeneratorSpec) -> tuple[Configuration, list[list[int]] | None]:
    """Like ``generate`` but also returns per-segment global node indices
    (repeated-segment only; None otherwise)."""
    if spec.kind == "random":
        if spec.seed is None:
            raise ValueError("seed is mandatory for random configurations")
        d = spec.dim if spec.dim is not None else 2
        if spec.n is None:
            raise ValueError("random configurations need n")
        rng = np.random.default_rng(spec.seed)
        return Configuration(rng.random((d, spec.n))), None
    if spec.kind == "polygon":
        if spec.n is None or spec.n < 3:
            raise ValueError("polygon needs n >= 3")
        theta = 2.0 * np.pi * np.arange(spec.n) / spec.n
        coords = spec.radius * np.vstack([np.cos(theta), np.sin(theta)])
        return Configuration(coords), None
    if spec.kind in SOLID_SIZES:
        expected = SOLID_SIZES[spec.kind]
        if spec.n is not None and spec.n != expected:
            raise ValueError(f"{spec.kind} has exactly {expected} vertices")
        coords = spec.radius * _solid_vertices(spec.kind)
        return Configuration(coords), None
    # repeated-segment
    if spec.base is None or spec.transforms is None:
        raise ValueError("repeated-segment needs base coordinates and transforms")
    return _merge_segments(np.asarray(spec.base, float), spec.transforms, spec.merge_tol)


def _solid_vertices(kind: str) -> np.ndarray:
    """Unit-circumradius vertex coordinates, deterministically ordered."""
    if kind == "octahedron":
        verts = []
        for axis in range(3):
            for sign in (1.0, -1.0):
                v = [0.0, 0.0, 0.0]
                v[axis] = sign
                verts.append(tuple(v))
    elif kind == "cuboctahedron":
        verts = set()
        for a in (1.0, -1.0):
            for b in (1.0, -1.0):
                verts.update({(a, b, 0.0), (a, 0.0, b), (0.0, a, b)})
    else:  # truncated icosahedron: even permutations of three golden-ratio triples
        phi = (1.0 + np.sqrt(5.0)) / 2.0
        seeds = [(0.0, 1.0, 3.0 * phi), (1.0, 2.0 + phi, 2.0 * phi), (phi, 2.0, 2.0 * phi + 1.0)]
        verts = set()
        for a, b, c in seeds:
            for perm in ((a, b, c), (b, c, a), (c, a, b)):
                for sx in (1.0, -1.0):
                    for sy in (1.0, -1.0):
                        for sz in (1.0, -1.0):
                            verts.add((sx * perm[0], sy * perm[1], sz * perm[2]))
    arr = np.array(sorted(set(verts))).T
    # duplicate sign flips of zero entries collapse in the set; normalize radius
    return arr / np.linalg.norm(arr[:, 0])


def _merge_segments(base, transforms, merge_tol):
    if base.ndim != 2:
        raise ValueError("base must be a D x n coordinate matrix")
    d = base.shape[0]
    placed = []
    for a_mat, b_vec in transforms:
        a_mat = np.asarray(a_mat, float)
        b_vec = np.asarray(b_vec, float)
        if a_mat.shape != (d, d) or b_vec.shape != (d,):
            raise ValueError("transform dimensions do not match the base configuration")
        if abs(np.linalg.det(a_mat)) < 1e-12:
            raise ValueError("segment transform is not invertible")
        placed.append(a_mat @ base + b_vec[:, None])
    stacked = np.hstack(placed)
    span = stacked.max(axis=1) - stacked.min(axis=1)
    tol = merge_tol * max(float(np.linalg.norm(span)), 1.0)
    # merge coincident nodes, keeping first-seen order
    coords: list[np.ndarray] = []
    segments: list[list[int]] = []
    for s, block in enumerate(placed):
        ids = []
        for k in range(block.shape[1]):
            p = block[:, k]
            hit = None
            for gi, q in enumerate(coords):
                if np.linalg.norm(p - q) <= tol:
                    hit = gi
                    break
            if hit is None:
                coords.append(p)
                hit = len(coords) - 1
            ids.append(hit)
        segments.append(ids)
    return Configuration(np.array(coords).T), segments


def apply_affine(config: Configuration, a_mat: np.ndarray, b_vec: np.ndarray) -> Configuration:
    """Transformed configuration ``A @ P + b 1^T``.

    A non-invertible map is allowed (with a warning) since it can still be
    analyzed, but it destroys design validity.
    """
    a_mat = np.asarray(a_mat, float)
    b_vec = np.asarray(b_vec, float).reshape(-1)
    d = config.dim
    if a_mat.shape != (d, d) or b_vec.shape != (d,):
        raise ValueError("affine map dimensions do not match the configuration")
    if abs(np.linalg.det(a_mat)) < 1e-12:
        warnings.warn("affine map is numerically singular; result is degenerate",
                      stacklevel=2)
    return Configuration(a_mat @ config.coords + b_vec[:, None], config.labels)


# ---------------------------------------------------------------------------
# letter-W construction


#: stroke joints of the nominal W in the x-z plane (x, z), unit horizontal run
W_JOINTS = ((0.0, 2.0), (1.0, 0.0), (2.0, 1.2), (3.0, 0.0), (4.0, 2.0))
BAR_JOINTS = ((0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0))
V_JOINTS = ((0.0, 2.0), (1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 2.0))


def bar_segment(nx: int = 17, width: float = 0.2) -> np.ndarray:
    """3D bar: an ``nx x 2 x 2`` grid spanning [0,1] x {0,width} x {0,width}."""
    if nx < 2:
        raise ValueError("bar needs nx >= 2")
    xs = np.linspace(0.0, 1.0, nx)
    pts = [(x, y, z) for x in xs for y in (0.0, width) for z in (0.0, width)]
    return np.array(pts).T


def stroke_transforms(joints=W_JOINTS) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Vertical-shear maps placing the unit bar along consecutive joints.

    Stroke s maps (x, y, z) to (Jx_s + x*dx, y, Jz_s + x*dz + z), so the end
    face of stroke s and the start face of stroke s+1 land on the same four
    points; those become the shared bridge nodes after merging.
    """
    out = []
    for (x0, z0), (x1, z1) in zip(joints[:-1], joints[1:]):
        a_mat = np.array([[x1 - x0, 0.0, 0.0],
                          [0.0, 1.0, 0.0],
                          [z1 - z0, 0.0, 1.0]])
        out.append((a_mat, np.array([x0, 0.0, z0])))
    return tuple(out)


def letter_w_spec(nx: int = 17, width: float = 0.2) -> GeneratorSpec:
    """Repeated-segment spec for the letter-W benchmark (N = 4*4*nx - 12)."""
    return GeneratorSpec(kind="repeated-segment", base=bar_segment(nx, width),
                         transforms=stroke_transforms(W_JOINTS))


def letter_w_maneuver_maps(joints) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-stroke affine maps taking the nominal W strokes onto ``joints``.

    Returns one (A, b) per stroke, expressed relative to the nominal
    configuration, and consistent on the shared bridge faces by
    construction (every shape uses the same vertical-shear family).
    """
    nominal = stroke_transforms(W_JOINTS)
    target = stroke_transforms(joints)
    maps = []
    for (a_w, b_w), (a_t, b_t) in zip(nominal, target):
        a_w_inv = np.linalg.inv(a_w)
        a_rel = a_t @ a_w_inv
        b_rel = b_t - a_rel @ b_w
        maps.append((a_rel, b_rel))
    return maps
