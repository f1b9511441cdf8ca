"""Synthetic shapes, Hausdorff noise, distance fields, and convex baselines.

Shapes live in R^d for d in {1, 2, 3}.  Convex kinds (ball, box, segment)
carry closed-form Steiner polynomials used as ground truth by the estimator
tests; annulus and union-of-balls exist for sampling only.

Sampling conventions: ball, box and annulus are sampled uniformly in their
interior (area/volume measure), segments uniformly along their length,
union-of-balls uniformly over the union via multiplicity rejection.  Balls
are centered at the origin, boxes span [0, a_k] per axis, segments run from
the origin along the first axis.
"""

from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, CoverageError, UnsupportedBaselineError
from .steiner import unit_ball_volume

__all__ = [
    "ShapeSpec",
    "PointCloud",
    "ScalarGrid",
    "generate_shape",
    "perturb_hausdorff",
    "distance_field",
    "point_distance_field",
    "exact_intrinsic_volumes",
    "exact_steiner_value",
    "grid_for_cloud",
]

CONVEX_KINDS = ("ball", "box", "segment")
ALL_KINDS = CONVEX_KINDS + ("annulus", "union-of-balls")


@dataclass(frozen=True)
class ShapeSpec:
    """Parametric description of a compact reference shape.

    params by kind: ball (radius,); box (side_1..side_d); segment (length,);
    annulus (inner_radius, outer_radius), d in {2, 3}; union-of-balls
    (c_1..c_d, radius) repeated per ball.
    """

    kind: str
    params: tuple[float, ...]
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in ALL_KINDS:
            raise ConfigurationError(f"unknown shape kind {self.kind!r}")
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"ambient dimension must be 1, 2 or 3, got {self.dim}")
        self._check_params()

    def _check_params(self):
        k, p, d = self.kind, self.params, self.dim
        if k == "ball":
            if len(p) != 1:
                raise ConfigurationError("ball expects a single radius parameter")
            if p[0] <= 0:
                raise ConfigurationError(f"ball radius must be positive, got {p[0]}")
        elif k == "box":
            if len(p) != d:
                raise ConfigurationError(f"box in dimension {d} expects {d} side lengths")
            if any(s <= 0 for s in p):
                raise ConfigurationError("box side lengths must be positive")
        elif k == "segment":
            if len(p) != 1:
                raise ConfigurationError("segment expects a single length parameter")
            if p[0] <= 0:
                raise ConfigurationError(f"segment length must be positive, got {p[0]}")
        elif k == "annulus":
            if d == 1:
                raise ConfigurationError("annulus needs ambient dimension 2 or 3")
            if len(p) != 2:
                raise ConfigurationError("annulus expects (inner_radius, outer_radius)")
            if not 0 < p[0] < p[1]:
                raise ConfigurationError("annulus needs 0 < inner_radius < outer_radius")
        elif k == "union-of-balls":
            if len(p) == 0 or len(p) % (d + 1) != 0:
                raise ConfigurationError(
                    f"union-of-balls expects groups of {d + 1} values (center, radius)"
                )
            for r in p[d :: d + 1]:
                if r <= 0:
                    raise ConfigurationError("union-of-balls radii must be positive")

    @property
    def convex(self) -> bool:
        return self.kind in CONVEX_KINDS

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params), "dim": self.dim}

    @classmethod
    def from_dict(cls, data: dict) -> "ShapeSpec":
        return cls(data["kind"], tuple(data["params"]), int(data["dim"]))


@dataclass(frozen=True)
class PointCloud:
    """Finite point sample in R^dim, with optional provenance metadata."""

    dim: int
    points: np.ndarray
    provenance: dict | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ConfigurationError(
                f"points must have shape (n, {self.dim}), got {pts.shape}"
            )
        if pts.shape[0] < 1:
            raise ConfigurationError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for row in self.points:
            buf.write(",".join(repr(float(x)) for x in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, dim: int | None = None) -> "PointCloud":
        rows = [
            [float(x) for x in line.split(",")]
            for line in text.strip().splitlines()
            if line.strip()
        ]
        if not rows:
            raise ConfigurationError("empty CSV point cloud")
        return cls(dim if dim is not None else len(rows[0]), np.array(rows))

    def to_json(self) -> str:
        data = {"dim": self.dim, "points": self.points.tolist()}
        if self.provenance is not None:
            data["provenance"] = self.provenance
        return json.dumps(data)

    @classmethod
    def from_json(cls, text: str) -> "PointCloud":
        data = json.loads(text)
        return cls(int(data["dim"]), np.array(data["points"]), data.get("provenance"))


@dataclass(frozen=True)
class ScalarGrid:
    """Axis-aligned regular grid of vertex values (row-major storage).

    ``values`` may be None for a geometry-only grid that has not been filled
    by a distance-field evaluation yet.
    """

    dim: int
    origin: tuple[float, ...]
    spacing: float
    extents: tuple[int, ...]
    values: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        if len(self.origin) != self.dim or len(self.extents) != self.dim:
            raise ConfigurationError("origin/extents arity must match dim")
        if self.spacing <= 0:
            raise ConfigurationError(f"grid spacing must be positive, got {self.spacing}")
        if any(n < 2 for n in self.extents):
            raise ConfigurationError("each axis needs at least 2 vertices")
        if self.values is not None:
            vals = np.ascontiguousarray(self.values, dtype=float).reshape(self.extents)
            if not np.all(np.isfinite(vals)):
                raise ConfigurationError("grid values must be finite")
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)

    @property
    def vertex_count(self) -> int:
        return int(np.prod(self.extents))

    def axes(self) -> list[np.ndarray]:
        return [
            self.origin[k] + self.spacing * np.arange(self.extents[k])
            for k in range(self.dim)
        ]

    def max_corner(self) -> tuple[float, ...]:
        return tuple(
            self.origin[k] + self.spacing * (self.extents[k] - 1) for k in range(self.dim)
        )

    def with_values(self, values: np.ndarray) -> "ScalarGrid":
        return ScalarGrid(self.dim, self.origin, self.spacing, self.extents, values)

    def same_geometry(self, other: "ScalarGrid") -> bool:
        return (
            self.dim == other.dim
            and self.extents == other.extents
            and self.spacing == other.spacing
            and self.origin == other.origin
        )

    def to_bytes(self) -> bytes:
        """Single-blob serialization: JSON header line then raw float64."""
        if self.values is None:
            raise ConfigurationError("cannot serialize a grid without values")
        header = json.dumps(
            {
                "dim": self.dim,
                "origin": list(self.origin),
                "spacing": self.spacing,
                "extents": list(self.extents),
                "order": "row-major",
                "dtype": "float64",
            }
        )
        return header.encode() + b"\n" + np.ascontiguousarray(self.values).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ScalarGrid":
        head, _, raw = blob.partition(b"\n")
        meta = json.loads(head.decode())
        values = np.frombuffer(raw, dtype=np.float64).reshape(meta["extents"])
        return cls(
            meta["dim"], tuple(meta["origin"]), meta["spacing"], tuple(meta["extents"]), values
        )


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _sample_unit_ball(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    direction = rng.normal(size=(n, dim))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = rng.random(n) ** (1.0 / dim)
    return direction / norms * radii[:, None]


def generate_shape(spec: ShapeSpec, n: int, seed: int) -> PointCloud:
    """Draw n points from the shape's uniform measure, reproducibly."""
    if n < 1:
        raise ConfigurationError(f"sample size must be at least 1, got {n}")
    rng = _rng(seed)
    d = spec.dim
    if spec.kind == "ball":
        pts = spec.params[0] * _sample_unit_ball(rng, n, d)
    elif spec.kind == "box":
        pts = rng.random((n, d)) * np.asarray(spec.params)
    elif spec.kind == "segment":
        pts = np.zeros((n, d))
        pts[:, 0] = rng.random(n) * spec.params[0]
    elif spec.kind == "annulus":
        r_in, r_out = spec.params
        u = rng.random(n)
        radii = (u * (r_out**d - r_in**d) + r_in**d) ** (1.0 / d)
        direction = rng.normal(size=(n, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        pts = direction * radii[:, None]
    else:  # union-of-balls, uniform over the union via multiplicity rejection
        groups = np.asarray(spec.params).reshape(-1, d + 1)
        centers, radii = groups[:, :d], groups[:, d]
        weights = radii**d / np.sum(radii**d)
        out = np.empty((n, d))
        filled = 0
        while filled < n:
            k = rng.choice(len(radii), p=weights)
            p = centers[k] + radii[k] * _sample_unit_ball(rng, 1, d)[0]
            multiplicity = int(np.sum(np.linalg.norm(centers - p, axis=1) <= radii))
            if rng.random() < 1.0 / multiplicity:
                out[filled] = p
                filled += 1
        pts = out
    provenance = {"shape": spec.to_dict(), "n": n, "seed": seed}
    return PointCloud(d, pts, provenance)


def perturb_hausdorff(cloud: PointCloud, eps: float, seed: int) -> PointCloud:
    """Displace every point uniformly within its eps-ball.

    The output stays within Hausdorff distance eps of the input.
    """
    if eps < 0:
        raise ConfigurationError(f"perturbation radius must be non-negative, got {eps}")
    if eps == 0:
        return cloud
    rng = _rng(seed)
    shift = eps * _sample_unit_ball(rng, cloud.size, cloud.dim)
    provenance = dict(cloud.provenance or {})
    provenance["perturbation"] = {"eps": eps, "seed": seed}
    return PointCloud(cloud.dim, cloud.points + shift, provenance)


def grid_for_cloud(cloud: PointCloud, margin: float, spacing: float) -> ScalarGrid:
    """Geometry-only grid covering the cloud's bounding box inflated by margin."""
    if spacing <= 0:
        raise ConfigurationError(f"spacing must be positive, got {spacing}")
    if margin < 0:
        raise ConfigurationError(f"margin must be non-negative, got {margin}")
    lo, hi = cloud.bounding_box()
    origin = lo - margin
    extents = tuple(
        max(2, int(math.ceil((hi[k] + margin - origin[k]) / spacing)) + 1)
        for k in range(cloud.dim)
    )
    return ScalarGrid(cloud.dim, tuple(origin), spacing, extents)


def _check_coverage(cloud: PointCloud, grid: ScalarGrid, margin: float):
    lo, hi = cloud.bounding_box()
    corner = grid.max_corner()
    bad = []
    for k in range(grid.dim):
        if grid.origin[k] > lo[k] - margin + 1e-12 * grid.spacing or corner[k] < hi[
            k
        ] + margin - 1e-12 * grid.spacing:
            needed = int(math.ceil((hi[k] + margin - (lo[k] - margin)) / grid.spacing)) + 1
            bad.append((k, needed))
    if bad:
        detail = ", ".join(
            f"axis {k}: needs origin <= {lo[k] - margin:.6g} and >= {n} vertices"
            for k, n in bad
        )
        raise CoverageError(
            f"grid does not cover the cloud bounding box inflated by {margin}: {detail}"
        )


def _vertex_chunks(grid: ScalarGrid, chunk: int = 1 << 17):
    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    for start in range(0, coords.shape[0], chunk):
        yield start, coords[start : start + chunk]


def distance_field(
    cloud: PointCloud,
    grid: ScalarGrid,
    min_margin: float | None = None,
    method: str = "kdtree",
) -> ScalarGrid:
    """Exact Euclidean distance from every grid vertex to the cloud.

    ``method="kdtree"`` uses a spatial index; ``method="brute"`` is the
    exhaustive fallback and correctness oracle.  When min_margin is given the
    grid must cover the cloud's bounding box inflated by that much per side.
    """
    if grid.dim != cloud.dim:
        raise ConfigurationError(
            f"grid dimension {grid.dim} does not match cloud dimension {cloud.dim}"
        )
    if min_margin is not None:
        _check_coverage(cloud, grid, min_margin)
    out = np.empty(grid.vertex_count)
    if method == "kdtree":
        tree = cKDTree(cloud.points)
        for start, coords in _vertex_chunks(grid):
            out[start : start + coords.shape[0]] = tree.query(coords, k=1)[0]
    elif method == "brute":
        pts = cloud.points
        for start, coords in _vertex_chunks(grid, chunk=1 << 12):
            diff = coords[:, None, :] - pts[None, :, :]
            out[start : start + coords.shape[0]] = np.sqrt(
                np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1)
            )
    else:
        raise ConfigurationError(f"unknown distance method {method!r}")
    return grid.with_values(out.reshape(grid.extents))


def point_distance_field(x, grid: ScalarGrid) -> ScalarGrid:
    """Distance field of a single point, i.e. d_x on the grid vertices."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != grid.dim:
        raise ConfigurationError(f"point has dim {x.shape[0]}, grid has dim {grid.dim}")
    axes = grid.axes()
    sq = np.zeros(grid.extents)
    for k in range(grid.dim):
        shape = [1] * grid.dim
        shape[k] = grid.extents[k]
        sq = sq + ((axes[k] - x[k]) ** 2).reshape(shape)
    return grid.with_values(np.sqrt(sq))


def _base_intrinsic_volumes(spec: ShapeSpec) -> list[float]:
    d = spec.dim
    if spec.kind == "ball":
        rho = spec.params[0]
        return [
            math.comb(d, i) * unit_ball_volume(d) / unit_ball_volume(d - i) * rho**i
            for i in range(d + 1)
        ]
    if spec.kind == "box":
        # Elementary symmetric polynomials of the side lengths.
        sides = spec.params
        return [
            sum(math.prod(combo) for combo in itertools.combinations(sides, i))
            if i
            else 1.0
            for i in range(d + 1)
        ]
    if spec.kind == "segment":
        vols = [0.0] * (d + 1)
        vols[0] = 1.0
        vols[1] = spec.params[0]
        return vols
    raise UnsupportedBaselineError(
        f"no closed-form intrinsic volumes for non-convex kind {spec.kind!r}"
    )


def exact_intrinsic_volumes(spec: ShapeSpec, t: float = 0.0) -> tuple[float, ...]:
    """Closed-form intrinsic volumes of the t-offset of a convex shape.

    Uses the tube-formula shift: the Steiner polynomial of the offset is the
    base polynomial evaluated at r + t, re-expanded in r.
    """
    if t < 0:
        raise ConfigurationError(f"offset must be non-negative, got {t}")
    base = _base_intrinsic_volumes(spec)
    d = spec.dim
    # c_k = omega_k V_{d-k}; shift by t and read back.
    c = [unit_ball_volume(k) * base[d - k] for k in range(d + 1)]
    shifted = [
        sum(c[m] * math.comb(m, k) * t ** (m - k) for m in range(k, d + 1))
        for k in range(d + 1)
    ]
    return tuple(shifted[d - i] / unit_ball_volume(d - i) for i in range(d + 1))


def exact_steiner_value(spec: ShapeSpec, r: float) -> float:
    """Offset volume Vol(X^r) of a convex shape, in closed form."""
    if r < 0:
        raise ConfigurationError(f"offset must be non-negative, got {r}")
    base = _base_intrinsic_volumes(spec)
    d = spec.dim
    return sum(unit_ball_volume(i) * base[d - i] * r**i for i in range(d + 1))
