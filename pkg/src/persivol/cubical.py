"""Cubical pair complexes on regular grids.

A full cubical complex on a grid with n_k vertices per axis is indexed by the
doubled grid with 2*n_k - 1 positions per axis: a position is a vertex where
every coordinate is even, and in general a cell's dimension is its number of
odd coordinates.  Faces differ by +-1 in one odd coordinate, which makes face
enumeration pure index arithmetic.

The pair structure (membership flags A within B plus a secondary filtration
value per cell) is built from two vertex fields by max-aggregation over each
cell's vertices, which keeps both closure and filtration monotonicity true by
construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, StructuralError
from .geometry import ScalarGrid

__all__ = [
    "Cell",
    "FilteredPairComplex",
    "ValidationReport",
    "build_pair_complex",
    "validate_pair",
    "restrict_to_ball",
    "doubled_max",
    "random_pair_complex",
]


def doubled_max(values: np.ndarray) -> np.ndarray:
    """Interleave per-axis neighbour maxima: vertex field -> cell field.

    Output axis k has 2*n_k - 1 entries; even positions copy the input, odd
    positions take the max of the two neighbours, so the value at a cell is
    the max over that cell's vertices.
    """
    out = np.asarray(values, dtype=float)
    nd = out.ndim
    for axis in range(nd):
        n = out.shape[axis]
        shape = list(out.shape)
        shape[axis] = 2 * n - 1
        res = np.empty(shape, dtype=float)
        even = [slice(None)] * nd
        even[axis] = slice(0, 2 * n - 1, 2)
        res[tuple(even)] = out
        odd = [slice(None)] * nd
        odd[axis] = slice(1, 2 * n - 1, 2)
        lo = [slice(None)] * nd
        lo[axis] = slice(0, n - 1)
        hi = [slice(None)] * nd
        hi[axis] = slice(1, n)
        res[tuple(odd)] = np.maximum(out[tuple(lo)], out[tuple(hi)])
        out = res
    return out


def _doubled_dims(doubled_shape: tuple[int, ...]) -> np.ndarray:
    nd = len(doubled_shape)
    out = np.zeros(doubled_shape, dtype=np.uint8)
    for k, m in enumerate(doubled_shape):
        parity = (np.arange(m) % 2).astype(np.uint8)
        shape = [1] * nd
        shape[k] = m
        out = out + parity.reshape(shape)
    return out


@dataclass(frozen=True)
class Cell:
    """One cube of the complex: dense id, dimension, spanning grid vertices."""

    id: int
    dim: int
    vertex_ids: tuple[int, ...]


class FilteredPairComplex:
    """Cubical complex with A-within-B membership flags and a filtration.

    Cells are identified by dense ids 0..n_cells-1 mapping to sorted global
    doubled-grid positions (``active``); a full complex keeps all positions.
    Arrays ``f``, ``in_a``, ``in_b`` are indexed by dense id.
    """

    def __init__(self, doubled_shape, active, f, in_a, in_b):
        self.doubled_shape = tuple(int(m) for m in doubled_shape)
        if any(m < 1 or m % 2 == 0 for m in self.doubled_shape):
            raise ConfigurationError("doubled extents must be odd and positive")
        total = int(np.prod(self.doubled_shape))
        if active is None:
            active = np.arange(total, dtype=np.int64)
        else:
            active = np.asarray(active, dtype=np.int64)
            if active.size and (
                active[0] < 0
                or active[-1] >= total
                or np.any(np.diff(active) <= 0)
            ):
                raise ConfigurationError("active cell ids must be sorted, unique, in range")
        self.active = active
        self.f = np.ascontiguousarray(f, dtype=float).reshape(-1)
        self.in_a = np.ascontiguousarray(in_a, dtype=np.uint8).reshape(-1)
        self.in_b = np.ascontiguousarray(in_b, dtype=np.uint8).reshape(-1)
        if not (self.f.size == self.in_a.size == self.in_b.size == active.size):
            raise ConfigurationError("cell attribute arrays must match the active set")
        nd = len(self.doubled_shape)
        strides = np.empty(nd, dtype=np.int64)
        acc = 1
        for k in range(nd - 1, -1, -1):
            strides[k] = acc
            acc *= self.doubled_shape[k]
        self.strides = strides
        coords = np.unravel_index(self.active, self.doubled_shape)
        self.cell_dims = sum((c % 2).astype(np.uint8) for c in coords)
        self._lookup = None

    def dense_lookup(self) -> np.ndarray:
        """Global doubled-grid position -> dense cell id (-1 when inactive)."""
        if self._lookup is None:
            lookup = np.full(int(np.prod(self.doubled_shape)), -1, dtype=np.int32)
            lookup[self.active] = np.arange(self.active.size, dtype=np.int32)
            self._lookup = lookup
        return self._lookup

    @property
    def dim(self) -> int:
        return len(self.doubled_shape)

    @property
    def n_cells(self) -> int:
        return int(self.active.size)

    @property
    def vertex_extents(self) -> tuple[int, ...]:
        return tuple((m + 1) // 2 for m in self.doubled_shape)

    def cell(self, dense_id: int) -> Cell:
        flat = int(self.active[dense_id])
        coords = np.unravel_index(flat, self.doubled_shape)
        spans = []
        for c in coords:
            c = int(c)
            spans.append((c // 2,) if c % 2 == 0 else (c // 2, c // 2 + 1))
        extents = self.vertex_extents
        vids = tuple(
            int(np.ravel_multi_index(v, extents)) for v in itertools.product(*spans)
        )
        return Cell(dense_id, int(self.cell_dims[dense_id]), vids)

    def cells(self):
        return (self.cell(i) for i in range(self.n_cells))

    def face_ids(self, dense_id: int) -> tuple[int, ...]:
        """Dense ids of the codimension-1 faces of a cell."""
        flat = int(self.active[dense_id])
        coords = np.unravel_index(flat, self.doubled_shape)
        out = []
        for k, c in enumerate(coords):
            if int(c) % 2 == 1:
                for delta in (-int(self.strides[k]), int(self.strides[k])):
                    j = int(np.searchsorted(self.active, flat + delta))
                    if j >= self.n_cells or self.active[j] != flat + delta:
                        raise StructuralError(
                            f"cell {dense_id} is missing a face in the active set"
                        )
                    out.append(j)
        return tuple(out)

    def euler_characteristic(self) -> int:
        signs = np.where(self.cell_dims % 2 == 0, 1, -1)
        return int(signs.sum())

    def dump(self) -> str:
        """Debug text: one cell per line ``id dim inA inB f vertex-ids``."""
        lines = []
        for c in self.cells():
            lines.append(
                f"{c.id} {c.dim} {int(self.in_a[c.id])} {int(self.in_b[c.id])} "
                f"{float(self.f[c.id])!r} {' '.join(str(v) for v in c.vertex_ids)}"
            )
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    code: int = 0
    message: str = ""
    cell_id: int = -1
    face_id: int = -1


_VIOLATIONS = {
    1: "face missing from the active cell set",
    2: "filtration value decreases from cell to face",
    3: "face of an A-cell is not in A",
    4: "face of a B-cell is not in B",
    5: "A-cell is not a B-cell",
}


def validate_pair(c: FilteredPairComplex) -> ValidationReport:
    """Exhaustive check of closure, containment and filtration monotonicity."""
    code, cell, face = _kernels.validate_cells(
        c.active,
        c.f,
        c.in_a,
        c.in_b,
        np.asarray(c.doubled_shape, dtype=np.int64),
        c.strides,
    )
    code = int(code)
    if code == 0:
        return ValidationReport(True)
    return ValidationReport(
        False,
        code,
        f"{_VIOLATIONS[code]} (cell {cell}, face {face})",
        int(cell),
        int(face),
    )


def build_pair_complex(
    d_y: ScalarGrid, d_x: ScalarGrid, eps: float
) -> FilteredPairComplex:
    """Full cubical complex of the grid, flagged by the two distance fields.

    A cell joins A when the max of d_y over its vertices is at most eps, B at
    3*eps, and its filtration value is the max of d_x over its vertices
    (exact for a point-distance field, whose max over a cube sits at a
    vertex).
    """
    if eps <= 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    if d_y.values is None or d_x.values is None:
        raise StructuralError("both grids must carry values")
    if not d_y.same_geometry(d_x):
        raise StructuralError("d_y and d_x grids must share identical geometry")
    dyd = doubled_max(d_y.values)
    dxd = doubled_max(d_x.values)
    return FilteredPairComplex(
        dyd.shape,
        None,
        dxd.reshape(-1),
        (dyd <= eps).reshape(-1),
        (dyd <= 3 * eps).reshape(-1),
    )


def restrict_to_ball(
    c: FilteredPairComplex, center, radius: float
) -> FilteredPairComplex:
    """Subcomplex of cells with filtration value at most radius.

    The filtration is the distance to ``center``, so this keeps the cells
    inside that ball; it is closed under faces because f is monotone.  Bars
    whose death lies beyond the radius come out with an infinite death
    sentinel, which is harmless for integrals truncated below the radius.
    """
    if center is not None:
        center = np.asarray(center, dtype=float).reshape(-1)
        if center.size != c.dim:
            raise ConfigurationError(
                f"center has dim {center.size}, complex has dim {c.dim}"
            )
    keep = np.flatnonzero(c.f <= radius)
    return FilteredPairComplex(
        c.doubled_shape, c.active[keep], c.f[keep], c.in_a[keep], c.in_b[keep]
    )


def random_pair_complex(
    seed: int, max_cells: int = 100, dim: int = 2
) -> FilteredPairComplex:
    """Seeded random pair complex for differential tests and oracle checks."""
    rng = np.random.default_rng(seed)
    while True:
        extents = tuple(int(rng.integers(2, 6)) for _ in range(dim))
        if np.prod([2 * n - 1 for n in extents]) <= max_cells:
            break
    grid = ScalarGrid(dim, (0.0,) * dim, 1.0, extents)
    style = rng.integers(0, 5)
    if style == 0:
        dy = np.zeros(extents)
    elif style == 1:
        dy = np.full(extents, 10.0)
    else:
        dy = rng.random(extents) * 2.0
    dx = rng.random(extents) * 3.0
    eps = float(rng.uniform(0.1, 0.8))
    return build_pair_complex(grid.with_values(dy), grid.with_values(dx), eps)
