"""Batch command-line tool: estimate, sweep, oracle-check, baseline.

Exit codes are a stable contract: 0 success, 1 check failure, 2 configuration
error, 3 internal/structural error.  All randomness funnels through the one
seed in the config (flag-overridable); the base sample uses the seed itself
and the noise stage uses seed + 1, so a report's embedded config reproduces
it bit for bit.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .cubical import random_pair_complex
from .errors import ConfigurationError, PersivolError, StructuralError
from .geometry import (
    ShapeSpec,
    exact_intrinsic_volumes,
    exact_steiner_value,
    generate_shape,
    perturb_hausdorff,
)
from .montecarlo import EstimatorConfig, estimate_volumes
from .persistence import diagram_from_ranks, image_persistence
from .steiner import error_constant, unit_ball_volume

SPEC_VERSION = 1

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


@dataclass(frozen=True)
class ExperimentSpec:
    """Resolved experiment description (config file plus flag overrides)."""

    shape: ShapeSpec
    sample_size: int
    eps_list: tuple[float, ...]
    spacing: float
    mc_samples: int
    seed: int
    R: float = 1.0
    declared_mu: float | None = None
    declared_reach: float | None = None

    @classmethod
    def from_file(cls, path: str) -> "ExperimentSpec":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        if data.get("specVersion") != SPEC_VERSION:
            raise ConfigurationError(
                f"config specVersion must be {SPEC_VERSION}, got {data.get('specVersion')!r}"
            )
        try:
            eps = data["eps"]
            eps_list = tuple(float(e) for e in (eps if isinstance(eps, list) else [eps]))
            return cls(
                shape=ShapeSpec.from_dict(data["shape"]),
                sample_size=int(data["sampleSize"]),
                eps_list=eps_list,
                spacing=float(data["spacing"]),
                mc_samples=int(data["mcSamples"]),
                seed=int(data["seed"]),
                R=float(data.get("R", 1.0)),
                declared_mu=data.get("declaredMu"),
                declared_reach=data.get("declaredReach"),
            )
        except KeyError as exc:
            raise ConfigurationError(f"config {path} is missing field {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "specVersion": SPEC_VERSION,
            "shape": self.shape.to_dict(),
            "sampleSize": self.sample_size,
            "eps": list(self.eps_list) if len(self.eps_list) > 1 else self.eps_list[0],
            "spacing": self.spacing,
            "mcSamples": self.mc_samples,
            "seed": self.seed,
            "R": self.R,
            "declaredMu": self.declared_mu,
            "declaredReach": self.declared_reach,
        }

    def estimator_config(self, eps: float) -> EstimatorConfig:
        return EstimatorConfig(
            eps=eps,
            spacing=self.spacing,
            mc_samples=self.mc_samples,
            seed=self.seed,
            dim=self.shape.dim,
            R=self.R,
            declared_mu=self.declared_mu,
            declared_reach=self.declared_reach,
        )


def _make_cloud(spec: ExperimentSpec, eps: float):
    base = generate_shape(spec.shape, spec.sample_size, spec.seed)
    return perturb_hausdorff(base, eps, spec.seed + 1)


def _convex_mass_term(shape: ShapeSpec, offset: float, R: float) -> float:
    # For convex bodies the curvature mass up to R is the tube-formula tail.
    vols = exact_intrinsic_volumes(shape, offset)
    d = shape.dim
    return sum(R**i * unit_ball_volume(i) * vols[d - i] for i in range(1, d + 1))


def _bounds_for(spec: ExperimentSpec, eps: float) -> tuple[float, ...] | None:
    if spec.declared_mu is None or not spec.shape.convex:
        return None
    d = spec.shape.dim
    vols = exact_intrinsic_volumes(spec.shape, 2 * eps)
    vol_term = vols[d]
    mass_term = _convex_mass_term(spec.shape, 2 * eps, spec.R)
    return tuple(
        eps
        * error_constant(i, d)
        / (spec.declared_mu * spec.R ** (i + 1))
        * (vol_term + mass_term)
        for i in range(d + 1)
    )


def _estimate_once(spec: ExperimentSpec, eps: float, workers: int | None):
    cloud = _make_cloud(spec, eps)
    config = spec.estimator_config(eps)
    return estimate_volumes(
        cloud, config, workers=workers, theoretical_bounds=_bounds_for(spec, eps)
    )


def _truth_block(spec: ExperimentSpec, eps: float, estimate) -> dict | None:
    if not spec.shape.convex:
        return None
    truth = exact_intrinsic_volumes(spec.shape, 2 * eps)
    return {
        "targetOffset": 2 * eps,
        "values": list(truth),
        "absError": [abs(v - t) for v, t in zip(estimate.values, truth)],
    }


def _write_text(path: str, text: str):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigurationError(f"cannot write output {path}: {exc}") from exc


def cmd_estimate(args) -> int:
    spec = _resolved_spec(args)
    if len(spec.eps_list) != 1:
        raise ConfigurationError("estimate expects a single eps (use sweep for lists)")
    eps = spec.eps_list[0]
    estimate = _estimate_once(spec, eps, args.workers)
    report = {
        "specVersion": SPEC_VERSION,
        "tool": "persivol",
        "version": __version__,
        "mode": "estimate",
        "config": spec.to_dict(),
        "estimate": estimate.to_dict(),
        "truth": _truth_block(spec, eps, estimate),
    }
    _write_text(args.out, json.dumps(report, indent=2) + "\n")
    print(f"estimate written to {args.out}")
    return EXIT_OK


def _noise_floor(spec: ExperimentSpec, eps: float, stderr) -> list[float]:
    """3-sigma Monte-Carlo noise plus the first-order grid sensitivity.

    The grid displaces effective offsets by at most spacing*sqrt(d); for
    convex truth the induced shift of each V_i is its offset derivative times
    that length.
    """
    d = spec.shape.dim
    floors = []
    grid_shift = spec.spacing * math.sqrt(d)
    if spec.shape.convex:
        delta = 1e-6
        v0 = exact_intrinsic_volumes(spec.shape, 2 * eps)
        v1 = exact_intrinsic_volumes(spec.shape, 2 * eps + delta)
        sens = [(b - a) / delta for a, b in zip(v0, v1)]
    else:
        sens = [0.0] * (d + 1)
    for i in range(d + 1):
        floors.append(3 * stderr[i] + abs(sens[i]) * grid_shift)
    return floors


def cmd_sweep(args) -> int:
    spec = _resolved_spec(args)
    if len(spec.eps_list) < 3:
        raise ConfigurationError(
            f"sweep needs at least 3 eps values, got {len(spec.eps_list)}"
        )
    d = spec.shape.dim
    rows = []
    for eps in spec.eps_list:
        est = _estimate_once(spec, eps, args.workers)
        truth = (
            exact_intrinsic_volumes(spec.shape, 2 * eps) if spec.shape.convex else None
        )
        rows.append((eps, est, truth, _noise_floor(spec, eps, est.stderr)))
    # Per-index log-log slope of |error| vs eps (needs convex truth).
    slopes: list[float | None] = [None] * (d + 1)
    if spec.shape.convex:
        logs_eps = np.log([r[0] for r in rows])
        for i in range(d + 1):
            errs = [abs(r[1].values[i] - r[2][i]) for r in rows]
            if all(e > 0 for e in errs):
                slopes[i] = float(np.polyfit(logs_eps, np.log(errs), 1)[0])
    header = ["eps"]
    for i in range(d + 1):
        header += [f"V{i}", f"stderr{i}", f"truth{i}", f"absError{i}", f"bound{i}", f"noiseFloor{i}", f"slope{i}"]
    lines = [",".join(header)]
    for eps, est, truth, floors in rows:
        cells = [repr(eps)]
        for i in range(d + 1):
            bound = est.theoretical_bounds[i] if est.theoretical_bounds else ""
            cells += [
                repr(est.values[i]),
                repr(est.stderr[i]),
                repr(truth[i]) if truth else "",
                repr(abs(est.values[i] - truth[i])) if truth else "",
                repr(bound) if bound != "" else "",
                repr(floors[i]),
                repr(slopes[i]) if slopes[i] is not None else "",
            ]
        lines.append(",".join(cells))
    _write_text(args.out, "\n".join(lines) + "\n")
    shown = {f"V{i}": slopes[i] for i in range(d + 1)}
    print(f"sweep written to {args.out}; log-log slopes: {shown}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    if args.max_cells > 2000:
        raise ConfigurationError(
            f"--max-cells is capped at 2000 (oracle is cubic), got {args.max_cells}"
        )
    if args.count < 1:
        raise ConfigurationError("--count must be positive")
    for k in range(args.count):
        c = random_pair_complex(args.seed + k, max_cells=args.max_cells)
        fast = image_persistence(c)
        oracle = diagram_from_ranks(c)
        if fast.bars != oracle.bars:
            print(f"MISMATCH on complex {k} (seed {args.seed + k}):")
            print("  reduction:", [(b.dim, b.birth, b.death) for b in fast.bars])
            print("  oracle:   ", [(b.dim, b.birth, b.death) for b in oracle.bars])
            return EXIT_CHECK_FAILED
    print(f"oracle check passed on {args.count} complexes (<= {args.max_cells} cells)")
    return EXIT_OK


def _shape_from_flags(args) -> ShapeSpec:
    if args.shape == "ball":
        if args.radius is None:
            raise ConfigurationError("--radius is required for ball")
        return ShapeSpec("ball", (args.radius,), args.dim)
    if args.shape == "box":
        if not args.sides:
            raise ConfigurationError("--sides is required for box")
        sides = tuple(float(s) for s in args.sides.split(","))
        return ShapeSpec("box", sides, args.dim)
    if args.shape == "segment":
        if args.length is None:
            raise ConfigurationError("--length is required for segment")
        return ShapeSpec("segment", (args.length,), args.dim)
    raise ConfigurationError(f"no closed-form baseline for shape {args.shape!r}")


def cmd_baseline(args) -> int:
    shape = _shape_from_flags(args)
    t = args.offset
    if t < 0:
        raise ConfigurationError(f"--offset must be non-negative, got {t}")
    vols = exact_intrinsic_volumes(shape, t)
    out = {
        "tool": "persivol",
        "version": __version__,
        "shape": shape.to_dict(),
        "offset": t,
        "intrinsicVolumes": list(vols),
        "steinerValue": exact_steiner_value(shape, t),
    }
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _resolved_spec(args) -> ExperimentSpec:
    spec = ExperimentSpec.from_file(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "eps", None):
        updates["eps_list"] = tuple(float(e) for e in args.eps.split(","))
    if updates:
        spec = ExperimentSpec(
            shape=spec.shape,
            sample_size=spec.sample_size,
            eps_list=updates.get("eps_list", spec.eps_list),
            spacing=spec.spacing,
            mc_samples=spec.mc_samples,
            seed=updates.get("seed", spec.seed),
            R=spec.R,
            declared_mu=spec.declared_mu,
            declared_reach=spec.declared_reach,
        )
    return spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="persivol",
        description="Estimate intrinsic volumes of a shape from a noisy point sample.",
    )
    parser.add_argument("--version", action="version", version=f"persivol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="run one estimation and write a JSON report")
    p_est.add_argument("--config", required=True)
    p_est.add_argument("--seed", type=int, default=None)
    p_est.add_argument("--workers", type=int, default=None)
    p_est.add_argument("--out", required=True)
    p_est.set_defaults(func=cmd_estimate)

    p_sw = sub.add_parser("sweep", help="estimate across a noise sweep, write a CSV table")
    p_sw.add_argument("--config", required=True)
    p_sw.add_argument("--eps", default=None, help="comma-separated noise levels")
    p_sw.add_argument("--seed", type=int, default=None)
    p_sw.add_argument("--workers", type=int, default=None)
    p_sw.add_argument("--out", required=True)
    p_sw.set_defaults(func=cmd_sweep)

    p_or = sub.add_parser("oracle-check", help="differential-test the reduction core")
    p_or.add_argument("--count", type=int, default=50)
    p_or.add_argument("--max-cells", type=int, default=100)
    p_or.add_argument("--seed", type=int, default=1)
    p_or.set_defaults(func=cmd_oracle_check)

    p_bl = sub.add_parser("baseline", help="closed-form volumes of a convex shape")
    p_bl.add_argument("--shape", required=True, choices=["ball", "box", "segment"])
    p_bl.add_argument("--dim", type=int, required=True)
    p_bl.add_argument("--radius", type=float, default=None)
    p_bl.add_argument("--sides", default=None)
    p_bl.add_argument("--length", type=float, default=None)
    p_bl.add_argument("--offset", type=float, default=0.0)
    p_bl.add_argument("--out", default=None)
    p_bl.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StructuralError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except PersivolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
