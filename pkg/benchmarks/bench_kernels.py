"""Compare the numba and pure-Python kernel backends on a realistic workload.

Builds the distance-field context of a noisy disk sample at production
resolution, then times the full per-sample diagram pipeline and the two hot
kernels in isolation under each backend.

Run:  python3 benchmarks/bench_kernels.py [n_samples]
"""

import sys
import time

import numpy as np

from persivol import _kernels
from persivol.geometry import ShapeSpec, generate_shape, perturb_hausdorff
from persivol.montecarlo import EstimatorConfig, EstimatorContext


def build_context():
    spec = ShapeSpec("ball", (1.0,), 2)
    cloud = perturb_hausdorff(generate_shape(spec, 4000, seed=7), 0.02, seed=8)
    config = EstimatorConfig(eps=0.02, spacing=0.01, mc_samples=1, seed=7, dim=2)
    return EstimatorContext(cloud, config)


def time_pipeline(ctx, backend, n_samples):
    impl = _kernels.IMPLEMENTATIONS[backend]
    saved = {name: getattr(_kernels, name) for name in impl}
    for name, fn in impl.items():
        setattr(_kernels, name, fn)
    try:
        ctx.evaluate(ctx.sample_point(0))  # warm-up (JIT compile on numba)
        t0 = time.perf_counter()
        for k in range(n_samples):
            ctx.evaluate(ctx.sample_point(k))
        elapsed = time.perf_counter() - t0
    finally:
        for name, fn in saved.items():
            setattr(_kernels, name, fn)
    return elapsed / n_samples


def time_kernels(ctx, backend, n_samples):
    """Isolate reduce_columns and image_h0_pairs on captured inputs."""
    from persivol.persistence import _face_columns, _sorted_stream, _vertex_edge_stream

    impl = _kernels.IMPLEMENTATIONS[backend]
    reduce_total = 0.0
    h0_total = 0.0
    for k in range(n_samples):
        c = ctx.window_complex(ctx.sample_point(k), ctx.config.R)
        if c is None:
            continue
        b_ids = np.flatnonzero(c.in_b).astype(np.int64)
        if b_ids.size == 0:
            continue
        kinds, fs, a, b, _, nv = _vertex_edge_stream(c, b_ids, c.in_a)
        t0 = time.perf_counter()
        impl["image_h0_pairs"](kinds, fs, a, b, nv)
        h0_total += time.perf_counter() - t0
        dims_b = c.cell_dims[b_ids]
        p_ids = b_ids[dims_b == 1]
        q_ids = b_ids[dims_b == 2]
        if p_ids.size == 0 or q_ids.size == 0:
            continue
        a_key = 1 - c.in_a[p_ids]
        row_order = np.lexsort((p_ids, c.f[p_ids], a_key))
        row_of_pos = np.empty(p_ids.size, dtype=np.int64)
        row_of_pos[row_order] = np.arange(p_ids.size)
        col_order = _sorted_stream(q_ids, c.f[q_ids], c.cell_dims[q_ids])
        positions, width = _face_columns(c, col_order, p_ids)
        col_rows = row_of_pos[positions]
        col_ptr = np.arange(col_order.size + 1, dtype=np.int64) * width
        t0 = time.perf_counter()
        impl["reduce_columns"](col_ptr, col_rows, p_ids.size)
        reduce_total += time.perf_counter() - t0
    return reduce_total / n_samples, h0_total / n_samples


def main():
    n_samples = int(sys.argv[1]) if len(sys.argv) > 1 else 25
    print("building context (4000-point disk, eps=0.02, h=0.01) ...")
    ctx = build_context()
    backends = list(_kernels.IMPLEMENTATIONS)
    print(f"available backends: {backends}; timing {n_samples} samples each\n")
    rows = []
    for backend in backends:
        per_sample = time_pipeline(ctx, backend, n_samples)
        red, h0 = time_kernels(ctx, backend, n_samples)
        rows.append((backend, per_sample, red, h0))
    print(f"{'backend':<10} {'pipeline/sample':>16} {'reduction':>12} {'union-find':>12}")
    for backend, per_sample, red, h0 in rows:
        print(
            f"{backend:<10} {per_sample * 1e3:>13.2f} ms {red * 1e3:>9.2f} ms"
            f" {h0 * 1e3:>9.2f} ms"
        )
    if len(rows) == 2:
        speed = rows[0][1] / rows[1][1]
        faster = rows[1][0] if speed > 1 else rows[0][0]
        print(f"\n{faster} pipeline is {max(speed, 1 / speed):.1f}x faster")


if __name__ == "__main__":
    main()
