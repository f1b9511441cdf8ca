"""Image persistence diagrams of pair complexes, with an independent oracle.

The fast path reduces one boundary matrix per homology degree: degree 0 runs
through union-find with an elder rule keyed by the oldest A-vertex of each
component, and degree p >= 1 pairs A-born p-cycles against (p+1)-cell columns
reduced with A-rows ordered first.  With rows grouped A-block first, a reduced
column whose pivot sits in the A block is supported entirely on A-cells, which
is exactly the event that kills an A-born class inside B.

``rank_oracle``/``diagram_from_ranks`` recompute everything from explicit
boundary matrices over the two-element field (bitmask Gaussian elimination)
and serve as the binding correctness reference for the fast path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cubical import FilteredPairComplex, validate_pair
from .errors import OracleScopeError, StructuralError

__all__ = [
    "Bar",
    "PersistenceDiagram",
    "RankFunction",
    "image_persistence",
    "ordinary_persistence",
    "rank_oracle",
    "rank_function",
    "diagram_from_ranks",
    "count_bars",
    "euler_characteristic",
    "bottleneck_distance",
]

INF = math.inf
ORACLE_CELL_LIMIT = 2000


@dataclass(frozen=True, order=True)
class Bar:
    """Single bar: homology degree, birth, death (math.inf when essential)."""

    dim: int
    birth: float
    death: float

    def __post_init__(self):
        if self.death < self.birth:
            raise StructuralError(f"bar death {self.death} precedes birth {self.birth}")

    @property
    def essential(self) -> bool:
        return math.isinf(self.death)


@dataclass(frozen=True)
class PersistenceDiagram:
    """Canonically sorted multiset of bars plus a source descriptor."""

    bars: tuple[Bar, ...]
    meta: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(sorted(self.bars)))

    def __len__(self) -> int:
        return len(self.bars)

    def in_degree(self, j: int) -> tuple[Bar, ...]:
        return tuple(b for b in self.bars if b.dim == j)

    def to_json(self) -> str:
        return json.dumps(
            [
                {
                    "dim": b.dim,
                    "birth": b.birth,
                    "death": "inf" if b.essential else b.death,
                }
                for b in self.bars
            ]
        )

    @classmethod
    def from_json(cls, text: str, meta: str = "") -> "PersistenceDiagram":
        bars = tuple(
            Bar(
                int(item["dim"]),
                float(item["birth"]),
                INF if item["death"] == "inf" else float(item["death"]),
            )
            for item in json.loads(text)
        )
        return cls(bars, meta)

    def to_text(self) -> str:
        lines = [
            f"{b.dim} {b.birth!r} {'inf' if b.essential else repr(b.death)}"
            for b in self.bars
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, meta: str = "") -> "PersistenceDiagram":
        bars = []
        for line in text.strip().splitlines():
            if not line.strip():
                continue
            j, b, d = line.split()
            bars.append(Bar(int(j), float(b), INF if d == "inf" else float(d)))
        return cls(tuple(bars), meta)


def _sorted_stream(ids, f, dims):
    # Filtration order: f first, faces before cofaces at ties, id last.
    return ids[np.lexsort((ids, dims, f))]


def _vertex_edge_stream(c, ids, a_flags):
    """Event arrays for the union-find kernels over cells of dimension <= 1.

    ``ids`` are dense cell ids restricted to some subcomplex; vertex events
    carry (vertex number, flag), edge events carry endpoint vertex numbers.
    """
    dims = c.cell_dims[ids]
    keep = ids[dims <= 1]
    order = _sorted_stream(keep, c.f[keep], c.cell_dims[keep])
    kinds = c.cell_dims[order].astype(np.uint8)
    fstream = c.f[order]
    vert_ids = keep[c.cell_dims[keep] == 0]
    vpos = np.full(c.n_cells, -1, dtype=np.int32)
    vpos[vert_ids] = np.arange(vert_ids.size, dtype=np.int32)
    a = np.zeros(order.size, dtype=np.int64)
    b = np.zeros(order.size, dtype=np.int64)
    is_vert = kinds == 0
    a[is_vert] = vpos[order[is_vert]]
    b[is_vert] = a_flags[order[is_vert]]
    is_edge = ~is_vert
    if is_edge.any():
        lookup = c.dense_lookup()
        eflats = c.active[order[is_edge]]
        coords = np.unravel_index(eflats, c.doubled_shape)
        stride = np.zeros(eflats.size, dtype=np.int64)
        for k in range(c.dim):
            odd = (coords[k] % 2) == 1
            stride[odd] = c.strides[k]
        lu = lookup[eflats - stride]
        lv = lookup[eflats + stride]
        if lu.size and (lu.min() < 0 or lv.min() < 0):
            raise StructuralError("edge endpoint missing from the complex")
        u = vpos[lu]
        v = vpos[lv]
        if u.size and (u.min() < 0 or v.min() < 0):
            raise StructuralError("edge endpoint outside the vertex subset")
        a[is_edge] = u
        b[is_edge] = v
    return kinds, fstream, a, b, order, int(vert_ids.size)


def _face_columns(c, q_ids, p_ids):
    """Row positions (into the p-cell list) of every face of each q-cell."""
    nq = q_ids.size
    if nq == 0:
        return np.zeros(0, dtype=np.int64), 0
    flats = c.active[q_ids]
    coords = np.unravel_index(flats, c.doubled_shape)
    width = int(c.cell_dims[q_ids[0]]) * 2
    out = np.empty((nq, width), dtype=np.int64)
    fill = np.zeros(nq, dtype=np.int64)
    for k in range(c.dim):
        odd = (coords[k] % 2) == 1
        idx = np.flatnonzero(odd)
        if idx.size == 0:
            continue
        pos = fill[idx]
        out[idx, pos] = flats[idx] - c.strides[k]
        out[idx, pos + 1] = flats[idx] + c.strides[k]
        fill[idx] += 2
    dense = c.dense_lookup()[out.ravel()]
    if dense.size and dense.min() < 0:
        raise StructuralError("cell face missing from the complex")
    p_pos = np.full(c.n_cells, -1, dtype=np.int32)
    p_pos[p_ids] = np.arange(p_ids.size, dtype=np.int32)
    positions = p_pos[dense]
    if positions.size and positions.min() < 0:
        raise StructuralError("cell face outside the expected row subset")
    return positions.astype(np.int64), width


def image_persistence(
    c: FilteredPairComplex, meta: str = "", validate: bool = True
) -> PersistenceDiagram:
    """Diagram of the image of H(A-filtration) inside H(B-filtration).

    Bars are half-open: a class born and killed at the same filtration value
    contributes nothing and is dropped.  Deaths that never happen within the
    complex are reported as the infinity sentinel.  ``validate=False`` skips
    the invariant sweep for complexes that are valid by construction.
    """
    if validate:
        report = validate_pair(c)
        if not report.ok:
            raise StructuralError(f"invalid pair complex: {report.message}")
    bars: list[Bar] = []
    b_ids = np.flatnonzero(c.in_b).astype(np.int64)
    if b_ids.size == 0:
        return PersistenceDiagram((), meta)

    # Degree 0: elder-rule union-find over the B-complex, tracking the oldest
    # A-vertex value of each component.
    kinds, fs, a, b, _, nv = _vertex_edge_stream(c, b_ids, c.in_a)
    births, deaths, ess = _kernels.image_h0_pairs(kinds, fs, a, b, nv)
    bars.extend(Bar(0, float(bb), float(dd)) for bb, dd in zip(births, deaths))
    bars.extend(Bar(0, float(bb), INF) for bb in ess)

    for p in range(1, c.dim):
        positive_ids, positive_births = _positive_p_cells(c, p)
        if positive_ids.size == 0:
            continue
        death_ids, death_vals = _mixed_deaths(c, b_ids, p)
        death_of = np.full(c.n_cells, INF)
        death_of[death_ids] = death_vals
        creates = np.zeros(c.n_cells, dtype=bool)
        creates[positive_ids] = True
        if death_ids.size and not np.all(creates[death_ids]):
            raise StructuralError(
                "image reduction paired a death with a non-creating cell"
            )
        deaths = death_of[positive_ids]
        keep = deaths > positive_births
        for birth, death in zip(positive_births[keep], deaths[keep]):
            bars.append(Bar(p, float(birth), float(death)))
    return PersistenceDiagram(tuple(bars), meta)


def _positive_p_cells(c, p):
    """A-cells of dimension p that create a cycle in the A-filtration."""
    a_ids = np.flatnonzero(c.in_a).astype(np.int64)
    if a_ids.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    if p == 1:
        kinds, _, a, b, order, nv = _vertex_edge_stream(c, a_ids, c.in_a)
        flags = _kernels.positive_edges(kinds, a, b, nv)
        hit = order[(kinds == 1) & (flags == 1)]
        return hit, c.f[hit]
    # p >= 2: reduce the A-boundary of p-cells over (p-1)-rows, A-order.
    dims_a = c.cell_dims[a_ids]
    p_ids = a_ids[dims_a == p]
    r_ids = a_ids[dims_a == p - 1]
    if p_ids.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    order = _sorted_stream(p_ids, c.f[p_ids], c.cell_dims[p_ids])
    row_sorted = _sorted_stream(r_ids, c.f[r_ids], c.cell_dims[r_ids])
    row_of_pos = np.empty(r_ids.size, dtype=np.int64)
    row_of_pos[np.searchsorted(r_ids, row_sorted)] = np.arange(r_ids.size)
    positions, width = _face_columns(c, order, r_ids)
    col_rows = row_of_pos[positions]
    col_ptr = np.arange(order.size + 1, dtype=np.int64) * width
    lows = _kernels.reduce_columns(col_ptr, col_rows, r_ids.size)
    hit = order[lows == -1]
    return hit, c.f[hit]


def _mixed_deaths(c, b_ids, p):
    """Deaths of A-born degree-p classes from the (p+1)-column reduction."""
    dims_b = c.cell_dims[b_ids]
    p_ids = b_ids[dims_b == p]
    q_ids = b_ids[dims_b == p + 1]
    if p_ids.size == 0 or q_ids.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    # Rows: A-cells first (by f then id), then the rest (by f then id).
    a_key = 1 - c.in_a[p_ids]
    row_order = np.lexsort((p_ids, c.f[p_ids], a_key))
    row_of_pos = np.empty(p_ids.size, dtype=np.int64)
    row_of_pos[row_order] = np.arange(p_ids.size)
    n_a_rows = int(np.sum(c.in_a[p_ids] != 0))
    col_order = _sorted_stream(q_ids, c.f[q_ids], c.cell_dims[q_ids])
    positions, width = _face_columns(c, col_order, p_ids)
    col_rows = row_of_pos[positions]
    col_ptr = np.arange(col_order.size + 1, dtype=np.int64) * width
    lows = _kernels.reduce_columns(col_ptr, col_rows, p_ids.size)
    killed = np.flatnonzero((lows >= 0) & (lows < n_a_rows))
    dead_cells = p_ids[row_order[lows[killed]]]
    death_vals = c.f[col_order[killed]]
    return dead_cells, death_vals


def ordinary_persistence(c: FilteredPairComplex, meta: str = "") -> PersistenceDiagram:
    """Sublevel persistence of the filtration on B alone (pair with A = B)."""
    full = FilteredPairComplex(c.doubled_shape, c.active, c.f, c.in_b, c.in_b)
    return image_persistence(full, meta)


def count_bars(diagram: PersistenceDiagram, a: float, b: float) -> int:
    """Number of bars whose closed interval [birth, death] meets [a, b]."""
    if a >= b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    return sum(1 for bar in diagram.bars if bar.birth <= b and bar.death >= a)


def euler_characteristic(diagram: PersistenceDiagram, r: float) -> int:
    """Alternating count of bars alive at r, with half-open [birth, death)."""
    total = 0
    for bar in diagram.bars:
        if bar.birth <= r < bar.death:
            total += -1 if bar.dim % 2 else 1
    return total


# ---------------------------------------------------------------------------
# Rank oracle: explicit boundary matrices over F2, bitmask elimination.
# ---------------------------------------------------------------------------


def _guard_oracle(c: FilteredPairComplex):
    if c.n_cells > ORACLE_CELL_LIMIT:
        raise OracleScopeError(
            f"oracle limited to {ORACLE_CELL_LIMIT} cells, got {c.n_cells}"
        )


class _F2Span:
    """Growable row-echelon basis of F2 vectors stored as python ints."""

    def __init__(self):
        self.pivots: dict[int, int] = {}

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, vec: int) -> int:
        while vec:
            low = vec.bit_length() - 1
            if low not in self.pivots:
                return vec
            vec ^= self.pivots[low]
        return 0

    def add(self, vec: int) -> bool:
        vec = self.reduce(vec)
        if vec == 0:
            return False
        self.pivots[vec.bit_length() - 1] = vec
        return True


def _boundary_bit(c, dense_id, index_of):
    bits = 0
    for fid in c.face_ids(dense_id):
        pos = index_of.get(fid)
        if pos is None:
            raise StructuralError("face escapes the oracle cell indexing")
        bits ^= 1 << pos
    return bits


def _kernel_basis(columns: list[int], n_cols: int) -> list[int]:
    """Kernel of the column family, as combination bitmasks over columns."""
    span = _F2Span()
    combos: dict[int, int] = {}
    kernel = []
    for j, col in enumerate(columns):
        vec, combo = col, 1 << j
        while vec:
            low = vec.bit_length() - 1
            if low not in span.pivots:
                break
            vec ^= span.pivots[low]
            combo ^= combos[low]
        if vec == 0:
            kernel.append(combo)
        else:
            low = vec.bit_length() - 1
            span.pivots[low] = vec
            combos[low] = combo
    return kernel


def _oracle_parts(c, j):
    """Shared indexing for degree-j rank computations over the B-cells."""
    b_ids = np.flatnonzero(c.in_b)
    dims = c.cell_dims[b_ids]
    j_cells = [int(i) for i in b_ids[dims == j]]
    below = {int(i): pos for pos, i in enumerate(b_ids[dims == j - 1])} if j else {}
    j_index = {cid: pos for pos, cid in enumerate(j_cells)}
    q_cells = [int(i) for i in b_ids[dims == j + 1]]
    return j_cells, j_index, below, q_cells


def rank_oracle(c: FilteredPairComplex, s: float, t: float, j: int) -> int:
    """Rank of H_j(A at s) -> H_j(B at t) by explicit linear algebra.

    Computed as dim(Z + B) - dim B where Z is the cycle space of the A-part
    at level s and B the boundary space of the B-part at level t.
    """
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    _guard_oracle(c)
    if j < 0 or j > c.dim:
        return 0
    j_cells, j_index, below, q_cells = _oracle_parts(c, j)

    a_cols = []
    a_positions = []
    for cid in j_cells:
        if c.in_a[cid] and c.f[cid] <= s:
            col = _boundary_bit(c, cid, below) if j > 0 else 0
            a_cols.append(col)
            a_positions.append(j_index[cid])
    combos = _kernel_basis(a_cols, len(a_cols))
    cycles = []
    for combo in combos:
        vec = 0
        k = 0
        while combo:
            if combo & 1:
                vec ^= 1 << a_positions[k]
            combo >>= 1
            k += 1
        cycles.append(vec)

    boundary_span = _F2Span()
    for qid in q_cells:
        if c.f[qid] <= t:
            boundary_span.add(_boundary_bit(c, qid, j_index))
    rank_b = boundary_span.rank
    total = _F2Span()
    total.pivots = dict(boundary_span.pivots)
    for z in cycles:
        total.add(z)
    return total.rank - rank_b


@dataclass(frozen=True)
class RankFunction:
    """Full rank data of the image maps over the critical-value grid.

    ``ranks[j][si, ti]`` is the rank of the degree-j map from level
    ``critical_values[si]`` into level ``critical_values[ti]`` (si <= ti);
    entries below the diagonal are unused.
    """

    critical_values: tuple[float, ...]
    ranks: dict[int, np.ndarray]

    def rank(self, s: float, t: float, j: int) -> int:
        if s > t:
            raise ValueError(f"need s <= t, got s={s}, t={t}")
        if j not in self.ranks:
            return 0
        crit = self.critical_values
        si = int(np.searchsorted(crit, s, side="right")) - 1
        ti = int(np.searchsorted(crit, t, side="right")) - 1
        if si < 0 or ti < 0:
            return 0
        return int(self.ranks[j][si, ti])


def rank_function(c: FilteredPairComplex) -> RankFunction:
    """Rank of every image map on the critical grid, by explicit elimination.

    For each degree and each start level this seeds an elimination with the
    cycle basis of the A-part and then absorbs the B-boundary columns in
    filtration order, reading off dim(Z + B) - dim B along the way.
    """
    _guard_oracle(c)
    b_ids = np.flatnonzero(c.in_b)
    if b_ids.size == 0:
        return RankFunction((), {})
    crit = np.unique(c.f[b_ids])
    m = crit.size
    out: dict[int, np.ndarray] = {}
    for j in range(0, c.dim + 1):
        j_cells, j_index, below, q_cells = _oracle_parts(c, j)
        if not j_cells:
            continue

        # Boundary columns of (j+1)-cells sorted by filtration value.
        q_sorted = sorted(q_cells, key=lambda cid: (c.f[cid], cid))
        q_vals = [c.f[cid] for cid in q_sorted]
        q_cols = [_boundary_bit(c, cid, j_index) for cid in q_sorted]

        # dim B at every critical value, by incremental elimination.
        rank_b_at = []
        span = _F2Span()
        qi = 0
        for cv in crit:
            while qi < len(q_cols) and q_vals[qi] <= cv:
                span.add(q_cols[qi])
                qi += 1
            rank_b_at.append(span.rank)

        # A-side j-cells sorted by value, for incremental kernel bases.
        a_sorted = sorted(
            (cid for cid in j_cells if c.in_a[cid]), key=lambda cid: (c.f[cid], cid)
        )
        a_vals = [c.f[cid] for cid in a_sorted]
        a_cols = [(_boundary_bit(c, cid, below) if j > 0 else 0) for cid in a_sorted]
        a_pos = [j_index[cid] for cid in a_sorted]

        r = np.zeros((m, m), dtype=np.int64)
        for si in range(m):
            n_a = 0
            while n_a < len(a_vals) and a_vals[n_a] <= crit[si]:
                n_a += 1
            combos = _kernel_basis(a_cols[:n_a], n_a)
            cycles = []
            for combo in combos:
                vec = 0
                k = 0
                while combo:
                    if combo & 1:
                        vec ^= 1 << a_pos[k]
                    combo >>= 1
                    k += 1
                cycles.append(vec)
            span = _F2Span()
            qi = 0
            for ti in range(si, m):
                while qi < len(q_cols) and q_vals[qi] <= crit[ti]:
                    span.add(q_cols[qi])
                    qi += 1
                total = _F2Span()
                total.pivots = dict(span.pivots)
                for z in cycles:
                    total.add(z)
                r[si, ti] = total.rank - rank_b_at[ti]
        out[j] = r
    return RankFunction(tuple(float(v) for v in crit), out)


def diagram_from_ranks(c: FilteredPairComplex, meta: str = "") -> PersistenceDiagram:
    """Diagram recovered from the full rank function by inclusion-exclusion.

    Multiplicity of a bar [crit_a, crit_b) in degree j is
    r(a, b-) - r(a, b) - r(a-, b-) + r(a-, b) over consecutive critical
    values; survivors at the last critical value are essential.
    """
    rf = rank_function(c)
    crit = rf.critical_values
    m = len(crit)
    bars: list[Bar] = []
    for j, r in rf.ranks.items():

        def rr(si, ti):
            return int(r[si, ti]) if si >= 0 else 0

        for si in range(m):
            for ti in range(si + 1, m):
                mult = (
                    rr(si, ti - 1)
                    - rr(si, ti)
                    - rr(si - 1, ti - 1)
                    + rr(si - 1, ti)
                )
                bars.extend([Bar(j, crit[si], crit[ti])] * mult)
            mult_inf = rr(si, m - 1) - rr(si - 1, m - 1)
            bars.extend([Bar(j, crit[si], INF)] * mult_inf)
    return PersistenceDiagram(tuple(bars), meta)


# ---------------------------------------------------------------------------
# Bottleneck distance by binary search over candidate radii.
# ---------------------------------------------------------------------------


def _match_feasible(pts1, pts2, delta):
    """Perfect matching in the diagonal-augmented bipartite graph at radius delta.

    One side holds the first diagram's points plus a diagonal slot per point
    of the second; the other side mirrors this.  Diagonal slots pair with
    their own point when its half-persistence fits, and freely with each
    other.
    """
    slack = 1e-12 + 1e-9 * delta
    n1, n2 = len(pts1), len(pts2)
    size = n1 + n2
    adj = [[] for _ in range(size)]
    for i, (b1, d1) in enumerate(pts1):
        for k, (b2, d2) in enumerate(pts2):
            if max(abs(b1 - b2), abs(d1 - d2)) <= delta + slack:
                adj[i].append(k)
        if (d1 - b1) / 2 <= delta + slack:
            adj[i].append(n2 + i)
    for k, (b2, d2) in enumerate(pts2):
        u = n1 + k
        if (d2 - b2) / 2 <= delta + slack:
            adj[u].append(k)
        adj[u].extend(range(n2, n2 + n1))
    match_v = [-1] * size

    def augment(u, seen):
        for v in adj[u]:
            if seen[v]:
                continue
            seen[v] = True
            if match_v[v] == -1 or augment(match_v[v], seen):
                match_v[v] = u
                return True
        return False

    for u in range(size):
        if not augment(u, [False] * size):
            return False
    return True


def _bottleneck_degree(bars1, bars2) -> float:
    inf1 = sorted(b.birth for b in bars1 if b.essential)
    inf2 = sorted(b.birth for b in bars2 if b.essential)
    if len(inf1) != len(inf2):
        return INF
    base = max((abs(x - y) for x, y in zip(inf1, inf2)), default=0.0)
    pts1 = [(b.birth, b.death) for b in bars1 if not b.essential]
    pts2 = [(b.birth, b.death) for b in bars2 if not b.essential]
    if not pts1 and not pts2:
        return base
    candidates = {base}
    for b, d in pts1:
        candidates.add((d - b) / 2)
    for b, d in pts2:
        candidates.add((d - b) / 2)
    for b1, d1 in pts1:
        for b2, d2 in pts2:
            candidates.add(max(abs(b1 - b2), abs(d1 - d2)))
    ordered = sorted(x for x in candidates if x >= base)
    lo, hi = 0, len(ordered) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _match_feasible(pts1, pts2, ordered[mid]):
            hi = mid
        else:
            lo = mid + 1
    return ordered[lo]


def bottleneck_distance(d1: PersistenceDiagram, d2: PersistenceDiagram) -> float:
    """Exact bottleneck distance, degree by degree (diagonal absorption allowed).

    Bars with infinite death only match bars with infinite death, at cost
    equal to the birth difference.
    """
    degrees = {b.dim for b in d1.bars} | {b.dim for b in d2.bars}
    return max(
        (_bottleneck_degree(d1.in_degree(j), d2.in_degree(j)) for j in degrees),
        default=0.0,
    )
