"""Monte-Carlo estimator of persistent intrinsic volumes.

Sample points x uniformly in a box that provably contains the support of the
integrand, compute the image persistence diagram of the distance-to-x
filtration on the pair of offsets of the input cloud, integrate its Euler
characteristic against the orthonormal polynomial basis, and average with the
box volume as importance weight.  Estimates are reproducible bit for bit for
a fixed seed regardless of worker count: every sample draws from its own RNG
stream derived from (seed, sample index) and the reduction runs in canonical
sample order.
"""

from __future__ import annotations

import csv
import math
import multiprocessing
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cubical import FilteredPairComplex, doubled_max
from .errors import ConfigurationError, StructuralError
from .geometry import PointCloud, distance_field, grid_for_cloud
from .persistence import PersistenceDiagram, image_persistence
from .steiner import chi_profile, extraction_matrix, integrate_chi_poly, legendre_basis

__all__ = [
    "EstimatorConfig",
    "EstimatorContext",
    "VolumeEstimate",
    "SamplingDomain",
    "sampling_domain",
    "per_sample",
    "sample_diagram",
    "estimate_volumes",
    "steiner_function_probe",
]


@dataclass(frozen=True)
class EstimatorConfig:
    """All knobs of one estimation run; everything an estimate depends on."""

    eps: float
    spacing: float
    mc_samples: int
    seed: int
    dim: int
    R: float = 1.0
    declared_mu: float | None = None
    declared_reach: float | None = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if self.R <= 0:
            raise ConfigurationError(f"R must be positive, got {self.R}")
        if self.spacing <= 0:
            raise ConfigurationError(f"grid spacing must be positive, got {self.spacing}")
        if self.mc_samples < 1:
            raise ConfigurationError(
                f"sample count must be at least 1, got {self.mc_samples}"
            )
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        if self.declared_mu is not None and not 0 < self.declared_mu <= 1:
            raise ConfigurationError(f"mu must lie in (0, 1], got {self.declared_mu}")
        if (
            self.declared_mu is not None
            and self.declared_reach is not None
            and 4 * self.eps > self.declared_reach
        ):
            warnings.warn(
                f"4*eps = {4 * self.eps} exceeds the declared regularity scale "
                f"{self.declared_reach}; the convergence guarantee does not apply",
                stacklevel=2,
            )

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "spacing": self.spacing,
            "mcSamples": self.mc_samples,
            "seed": self.seed,
            "dim": self.dim,
            "R": self.R,
            "declaredMu": self.declared_mu,
            "declaredReach": self.declared_reach,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EstimatorConfig":
        return cls(
            eps=data["eps"],
            spacing=data["spacing"],
            mc_samples=data["mcSamples"],
            seed=data["seed"],
            dim=data["dim"],
            R=data.get("R", 1.0),
            declared_mu=data.get("declaredMu"),
            declared_reach=data.get("declaredReach"),
        )


@dataclass(frozen=True)
class SamplingDomain:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    volume: float


def sampling_domain(cloud: PointCloud, eps: float, R: float) -> SamplingDomain:
    """Axis box outside which the integrand vanishes, with its volume.

    The profile of a point x is identically zero on [0, R] unless some cell
    of the outer offset comes within R of x, which forces
    d(x, cloud) <= R + 3*eps; inflating the bounding box by that much keeps
    uniform box sampling unbiased with the box volume as weight.
    """
    lo, hi = cloud.bounding_box()
    pad = R + 3 * eps
    lo = lo - pad
    hi = hi + pad
    volume = float(np.prod(hi - lo))
    if volume <= 0:
        raise ConfigurationError("degenerate sampling domain; R must be positive")
    return SamplingDomain(
        tuple(float(v) for v in lo), tuple(float(v) for v in hi), volume
    )


class EstimatorContext:
    """Per-(cloud, config) precomputation shared by all samples.

    Holds the global distance field of the cloud (doubled onto cells once)
    and hands out per-x window complexes, diagrams and basis inner products.
    """

    def __init__(self, cloud: PointCloud, config: EstimatorConfig):
        if cloud.dim != config.dim:
            raise ConfigurationError(
                f"cloud dim {cloud.dim} does not match config dim {config.dim}"
            )
        self.cloud = cloud
        self.config = config
        eps, R, h = config.eps, config.R, config.spacing
        margin = 3 * eps + R + 2 * h
        self.grid = grid_for_cloud(cloud, margin, h)
        dy = distance_field(cloud, self.grid, min_margin=3 * eps + R)
        dyd = doubled_max(dy.values)
        self.in_a_d = dyd <= eps
        self.in_b_d = dyd <= 3 * eps
        self.domain = sampling_domain(cloud, eps, R)
        self.tree = cKDTree(cloud.points)
        self.basis = legendre_basis(config.dim, R)
        self.extraction = extraction_matrix(config.dim, R)

    def sample_point(self, index: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence((self.config.seed, index)))
        lo = np.asarray(self.domain.lo)
        hi = np.asarray(self.domain.hi)
        return lo + rng.random(self.config.dim) * (hi - lo)

    def window_complex(self, x: np.ndarray, radius: float) -> FilteredPairComplex | None:
        """Pair complex of the grid cells within ``radius`` of x (by max d_x)."""
        g = self.grid
        origin = np.asarray(g.origin)
        # Any finite radius beyond the grid extent selects the whole grid;
        # this also keeps the index arithmetic finite for radius=inf.
        span = float(np.max(np.asarray(g.max_corner()) - origin))
        reach = min(radius, span + g.spacing + float(np.max(np.abs(x - origin))))
        # A cell with max-vertex distance <= radius has all vertices in the
        # closed coordinate range; the epsilon guards index rounding at exact
        # boundary hits.
        i_min = np.maximum(
            0, np.ceil((x - reach - origin) / g.spacing - 1e-9).astype(int)
        )
        i_max = np.minimum(
            np.asarray(g.extents) - 1,
            np.floor((x + reach - origin) / g.spacing + 1e-9).astype(int),
        )
        if np.any(i_min + 1 > i_max):  # need >= 2 vertices per axis for a cell
            return None
        window = tuple(slice(2 * a, 2 * b + 1) for a, b in zip(i_min, i_max))
        sq = np.zeros(tuple(b - a + 1 for a, b in zip(i_min, i_max)))
        for k in range(g.dim):
            ax = origin[k] + g.spacing * np.arange(i_min[k], i_max[k] + 1)
            shape = [1] * g.dim
            shape[k] = ax.size
            sq = sq + ((ax - x[k]) ** 2).reshape(shape)
        fw = doubled_max(np.sqrt(sq)).reshape(-1)
        active = np.flatnonzero(fw <= radius)
        if active.size == 0:
            return None
        aw = self.in_a_d[window].reshape(-1)
        bw = self.in_b_d[window].reshape(-1)
        shape_d = tuple(2 * (b - a) + 1 for a, b in zip(i_min, i_max))
        return FilteredPairComplex(
            shape_d, active, fw[active], aw[active], bw[active]
        )

    def diagram(self, x: np.ndarray, radius: float | None = None) -> PersistenceDiagram:
        r = self.config.R if radius is None else radius
        c = self.window_complex(np.asarray(x, dtype=float), r)
        if c is None:
            return PersistenceDiagram((), meta=f"x={list(map(float, x))}")
        # Window complexes are max-aggregated sublevel restrictions, valid by
        # construction; skip the per-sample invariant sweep.
        return image_persistence(c, meta=f"x={list(map(float, x))}", validate=False)

    def evaluate(self, x: np.ndarray):
        """Inner products of the profile of x with the basis, plus bar count."""
        diag = self.diagram(x)
        profile = chi_profile(diag, self.config.R)
        v = np.array([integrate_chi_poly(profile, p) for p in self.basis])
        support = self.config.R + 3 * self.config.eps
        if self.tree.query(x, k=1)[0] > support + 1e-9 and np.any(v != 0.0):
            raise StructuralError(
                f"sample at distance > R + 3*eps produced a nonzero profile: x={x}"
            )
        nbars = len(diag)
        return v, nbars, profile


# Worker-side state inherited through fork; set before the pool is created.
_WORKER_CTX: EstimatorContext | None = None
_WORKER_RVALS: np.ndarray | None = None


def _worker_rows(span):
    start, stop = span
    ctx = _WORKER_CTX
    d = ctx.config.dim
    rows = np.empty((stop - start, d + 1))
    bars = np.empty(stop - start, dtype=np.int64)
    for k in range(start, stop):
        v, nb, _ = ctx.evaluate(ctx.sample_point(k))
        rows[k - start] = v
        bars[k - start] = nb
    return start, rows, bars


def _worker_chi(span):
    start, stop = span
    ctx = _WORKER_CTX
    rvals = _WORKER_RVALS
    out = np.empty((stop - start, rvals.size))
    for k in range(start, stop):
        _, _, profile = ctx.evaluate(ctx.sample_point(k))
        out[k - start] = [profile(r) for r in rvals]
    return start, out, None


def _run_samples(ctx, worker_fn, n, workers, width):
    global _WORKER_CTX
    rows = np.empty((n, width))
    extra = np.empty(n, dtype=np.int64)
    if workers is None:
        workers = multiprocessing.cpu_count()
    workers = max(1, min(workers, n))
    spans = []
    chunk = max(1, math.ceil(n / (workers * 4)))
    for start in range(0, n, chunk):
        spans.append((start, min(n, start + chunk)))
    _WORKER_CTX = ctx
    try:
        if workers == 1:
            results = map(worker_fn, spans)
            for start, chunk_rows, chunk_extra in results:
                rows[start : start + chunk_rows.shape[0]] = chunk_rows
                if chunk_extra is not None:
                    extra[start : start + chunk_rows.shape[0]] = chunk_extra
        else:
            # Children inherit the context through fork; only spans travel.
            mp = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=mp) as pool:
                for start, chunk_rows, chunk_extra in pool.map(worker_fn, spans):
                    rows[start : start + chunk_rows.shape[0]] = chunk_rows
                    if chunk_extra is not None:
                        extra[start : start + chunk_rows.shape[0]] = chunk_extra
    finally:
        _WORKER_CTX = None
    return rows, extra


def per_sample(x, cloud: PointCloud, config: EstimatorConfig) -> tuple[float, ...]:
    """Basis inner products of the profile of a single point x.

    Builds the shared distance-field context from scratch; inside
    estimate_volumes the context is reused across samples instead.
    """
    ctx = EstimatorContext(cloud, config)
    v, _, _ = ctx.evaluate(np.asarray(x, dtype=float))
    return tuple(float(t) for t in v)


def sample_diagram(
    cloud: PointCloud, config: EstimatorConfig, x, radius: float | None = None
) -> PersistenceDiagram:
    """Image diagram of the distance filtration at x (window of given radius).

    Deaths beyond the window radius surface as the infinity sentinel; pass a
    radius above R when honest death values past R matter.
    """
    ctx = EstimatorContext(cloud, config)
    return ctx.diagram(np.asarray(x, dtype=float), radius)


@dataclass(frozen=True)
class VolumeEstimate:
    """Estimated intrinsic volumes with their Monte-Carlo standard errors."""

    values: tuple[float, ...]
    stderr: tuple[float, ...]
    inner_products: tuple[float, ...]
    inner_cov: tuple[tuple[float, ...], ...]
    samples_used: int
    domain_volume: float
    config: EstimatorConfig
    theoretical_bounds: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "values": list(self.values),
            "stderr": ["inf" if math.isinf(s) else s for s in self.stderr],
            "innerProducts": list(self.inner_products),
            "innerCovariance": [
                ["inf" if math.isinf(c) else c for c in row] for row in self.inner_cov
            ],
            "samplesUsed": self.samples_used,
            "domainVolume": self.domain_volume,
            "config": self.config.to_dict(),
            "theoreticalBounds": (
                list(self.theoretical_bounds)
                if self.theoretical_bounds is not None
                else None
            ),
        }


def estimate_volumes(
    cloud: PointCloud,
    config: EstimatorConfig,
    workers: int | None = 1,
    trace_path: str | None = None,
    theoretical_bounds: tuple[float, ...] | None = None,
) -> VolumeEstimate:
    """Monte-Carlo estimate of the persistent intrinsic volumes of the cloud.

    The estimate is domain_volume times the sample mean of the per-sample
    inner products, pushed through the linear extraction map; standard errors
    propagate the sample covariance through the same map.
    """
    ctx = EstimatorContext(cloud, config)
    n = config.mc_samples
    d = config.dim
    rows, bars = _run_samples(ctx, _worker_rows, n, workers, d + 1)
    vol = ctx.domain.volume
    a_hat = vol * rows.mean(axis=0)
    values = ctx.extraction @ a_hat
    if n >= 2:
        cov_v = np.cov(rows, rowvar=False, ddof=1).reshape(d + 1, d + 1)
        cov_a = vol * vol * cov_v / n
        stderr = np.sqrt(np.diag(ctx.extraction @ cov_a @ ctx.extraction.T))
    else:
        cov_a = np.full((d + 1, d + 1), math.inf)
        stderr = np.full(d + 1, math.inf)
    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["sampleIndex"]
                + [f"x{k}" for k in range(d)]
                + [f"v{j}" for j in range(d + 1)]
                + ["barsInWindow"]
            )
            for k in range(n):
                x = ctx.sample_point(k)
                writer.writerow(
                    [k]
                    + [repr(float(c)) for c in x]
                    + [repr(float(v)) for v in rows[k]]
                    + [int(bars[k])]
                )
    return VolumeEstimate(
        values=tuple(float(v) for v in values),
        stderr=tuple(float(s) for s in stderr),
        inner_products=tuple(float(a) for a in a_hat),
        inner_cov=tuple(tuple(float(c) for c in row) for row in cov_a),
        samples_used=n,
        domain_volume=vol,
        config=config,
        theoretical_bounds=theoretical_bounds,
    )


def steiner_function_probe(
    cloud: PointCloud,
    config: EstimatorConfig,
    r_values,
    workers: int | None = 1,
) -> list[tuple[float, float, float]]:
    """Monte-Carlo values of the integrated Euler characteristic at given radii.

    Returns (r, estimate, stderr) per requested radius, reusing one profile
    per sample across all radii.  Cell filtration values aggregate by max
    over vertices, so every sublevel set lags the continuum by up to
    spacing*sqrt(dim); profiles are read at r plus that lag (clipped to R) to
    stay within an O(spacing) band of the continuum value, including at r=0.
    """
    global _WORKER_RVALS
    rvals = np.asarray(sorted(float(r) for r in r_values))
    if rvals.size == 0:
        raise ConfigurationError("need at least one probe radius")
    if rvals[0] < 0 or rvals[-1] > config.R:
        raise ConfigurationError(f"probe radii must lie in [0, {config.R}]")
    ctx = EstimatorContext(cloud, config)
    lag = config.spacing * math.sqrt(config.dim)
    _WORKER_RVALS = np.minimum(rvals + lag, config.R)
    try:
        rows, _ = _run_samples(ctx, _worker_chi, config.mc_samples, workers, rvals.size)
    finally:
        _WORKER_RVALS = None
    vol = ctx.domain.volume
    n = config.mc_samples
    est = vol * rows.mean(axis=0)
    if n >= 2:
        se = vol * rows.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        se = np.full(rvals.size, math.inf)
    return [(float(r), float(e), float(s)) for r, e, s in zip(rvals, est, se)]
