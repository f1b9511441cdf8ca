"""Differential tests between the numba and pure-Python kernel backends."""

import numpy as np
import pytest

from persivol import _kernels
from persivol.cubical import random_pair_complex
from persivol.persistence import image_persistence


def _random_columns(rng, n_rows, n_cols):
    ptr = [0]
    rows = []
    for _ in range(n_cols):
        k = int(rng.integers(0, min(6, n_rows) + 1))
        rows.extend(sorted(rng.choice(n_rows, size=k, replace=False).tolist()))
        ptr.append(len(rows))
    return np.asarray(ptr, dtype=np.int64), np.asarray(rows, dtype=np.int64)


def test_python_backend_always_available():
    assert "python" in _kernels.IMPLEMENTATIONS


has_both = len(_kernels.IMPLEMENTATIONS) >= 2
needs_both = pytest.mark.skipif(not has_both, reason="numba backend unavailable")


@needs_both
def test_reduce_columns_backend_parity():
    rng = np.random.default_rng(51)
    py = _kernels.IMPLEMENTATIONS["python"]["reduce_columns"]
    nb = _kernels.IMPLEMENTATIONS["numba"]["reduce_columns"]
    for _ in range(30):
        n_rows = int(rng.integers(1, 40))
        n_cols = int(rng.integers(0, 60))
        ptr, rows = _random_columns(rng, n_rows, n_cols)
        assert np.array_equal(py(ptr, rows, n_rows), nb(ptr, rows, n_rows))


@needs_both
def test_union_find_backend_parity():
    rng = np.random.default_rng(52)
    py_h0 = _kernels.IMPLEMENTATIONS["python"]["image_h0_pairs"]
    nb_h0 = _kernels.IMPLEMENTATIONS["numba"]["image_h0_pairs"]
    py_pe = _kernels.IMPLEMENTATIONS["python"]["positive_edges"]
    nb_pe = _kernels.IMPLEMENTATIONS["numba"]["positive_edges"]
    for _ in range(25):
        nv = int(rng.integers(1, 25))
        events = [(0, float(rng.random()), v, int(rng.random() < 0.5)) for v in range(nv)]
        for _ in range(int(rng.integers(0, 40))):
            u, v = rng.integers(0, nv, size=2)
            events.append((1, float(1.0 + rng.random()), int(u), int(v)))
        events.sort(key=lambda e: e[1])
        kind = np.array([e[0] for e in events], dtype=np.uint8)
        f = np.array([e[1] for e in events])
        a = np.array([e[2] for e in events], dtype=np.int64)
        b = np.array([e[3] for e in events], dtype=np.int64)
        r1 = py_h0(kind, f, a, b, nv)
        r2 = nb_h0(kind, f, a, b, nv)
        for x, y in zip(r1, r2):
            assert np.array_equal(np.sort(x), np.sort(y))
        assert np.array_equal(py_pe(kind, a, b, nv), nb_pe(kind, a, b, nv))


@needs_both
def test_image_persistence_identical_across_backends(monkeypatch):
    diagrams = {}
    for backend in ("python", "numba"):
        impl = _kernels.IMPLEMENTATIONS[backend]
        for name, fn in impl.items():
            monkeypatch.setattr(_kernels, name, fn)
        bars = []
        for seed in range(15):
            c = random_pair_complex(seed + 600, max_cells=120)
            bars.append(image_persistence(c).bars)
        diagrams[backend] = bars
    assert diagrams["python"] == diagrams["numba"]


def test_reduce_columns_known_case():
    # Columns: c0 = {0,1}, c1 = {1,2}, c2 = {0,2} (dependent: reduces to 0).
    ptr = np.array([0, 2, 4, 6], dtype=np.int64)
    rows = np.array([0, 1, 1, 2, 0, 2], dtype=np.int64)
    lows = _kernels.reduce_columns(ptr, rows, 3)
    assert lows.tolist() == [1, 2, -1]


def test_validate_cells_clean_and_dirty():
    c = random_pair_complex(53, max_cells=80)
    code, _, _ = _kernels.validate_cells(
        c.active, c.f, c.in_a, c.in_b, np.asarray(c.doubled_shape, np.int64), c.strides
    )
    assert code == 0
    bad_f = c.f.copy()
    bad_f[c.cell_dims == 0] = 100.0
    if np.any(c.cell_dims > 0):
        code, _, _ = _kernels.validate_cells(
            c.active, bad_f, c.in_a, c.in_b, np.asarray(c.doubled_shape, np.int64), c.strides
        )
        assert code == 2
