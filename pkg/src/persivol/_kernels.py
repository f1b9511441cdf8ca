"""Hot inner loops: F2 column reduction, union-find pairing, pair validation.

Every kernel has a pure-Python reference implementation and a numba-compiled
variant.  The active backend is chosen at import time from the environment
variable ``PERSIVOL_BACKEND`` ("numba" or "python"); default is numba when it
imports, python otherwise.  ``IMPLEMENTATIONS`` keeps both variants reachable
for differential tests and the benchmark script.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "IMPLEMENTATIONS",
    "reduce_columns",
    "image_h0_pairs",
    "positive_edges",
    "validate_cells",
]

_INF = np.inf


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def _reduce_columns(col_ptr, col_rows, n_rows):
    """Left-to-right F2 column reduction.

    Columns arrive in filtration order; ``col_rows[col_ptr[j]:col_ptr[j+1]]``
    holds the distinct row indices of column j.  Returns the pivot row of
    every reduced column (-1 for columns that reduce to zero).
    """
    n_cols = col_ptr.shape[0] - 1
    lows = np.full(n_cols, -1, np.int64)
    if n_rows == 0 or n_cols == 0:
        return lows
    low_to_col = np.full(n_rows, -1, np.int64)
    bitmap = np.zeros(n_rows, np.uint8)
    listed = np.zeros(n_rows, np.uint8)
    touched = np.empty(n_rows, np.int64)
    cap = max(16, 2 * col_rows.shape[0])
    store_rows = np.empty(cap, np.int64)
    store_ptr = np.zeros(n_cols + 1, np.int64)

    for j in range(n_cols):
        cnt = 0
        ntouch = 0
        maxrow = -1
        for idx in range(col_ptr[j], col_ptr[j + 1]):
            r = col_rows[idx]
            bitmap[r] = 1
            cnt += 1
            listed[r] = 1
            touched[ntouch] = r
            ntouch += 1
            if r > maxrow:
                maxrow = r
        while maxrow >= 0:
            k = low_to_col[maxrow]
            if k < 0:
                break
            for idx in range(store_ptr[k], store_ptr[k + 1]):
                r = store_rows[idx]
                if bitmap[r]:
                    bitmap[r] = 0
                    cnt -= 1
                else:
                    bitmap[r] = 1
                    cnt += 1
                    if not listed[r]:
                        listed[r] = 1
                        touched[ntouch] = r
                        ntouch += 1
            while maxrow >= 0 and bitmap[maxrow] == 0:
                maxrow -= 1
        if maxrow >= 0:
            lows[j] = maxrow
            low_to_col[maxrow] = j
            pos = store_ptr[j]
            if pos + cnt > store_rows.shape[0]:
                newcap = 2 * store_rows.shape[0] + cnt
                grown = np.empty(newcap, np.int64)
                grown[:pos] = store_rows[:pos]
                store_rows = grown
            for t in range(ntouch):
                r = touched[t]
                listed[r] = 0
                if bitmap[r]:
                    store_rows[pos] = r
                    pos += 1
                    bitmap[r] = 0
            store_ptr[j + 1] = pos
        else:
            for t in range(ntouch):
                listed[touched[t]] = 0
            store_ptr[j + 1] = store_ptr[j]
    return lows


def _image_h0_pairs(kind, f, a, b, n_vertices):
    """Degree-0 image pairing over a merged vertex/edge event stream.

    ``kind`` is 0 for a vertex event (a = dense vertex id, b = in-A flag) and
    1 for an edge event (a, b = endpoint vertex ids); the stream must be
    sorted by (f, dim, id).  Tracks, per component, the oldest f-value of a
    vertex belonging to the subspace; a merge of two such components kills
    the younger value.  Returns finite bars, plus the survivors' births.
    """
    n_events = kind.shape[0]
    parent = np.full(n_vertices, -1, np.int64)
    urank = np.zeros(n_vertices, np.int64)
    abirth = np.full(n_vertices, _INF)
    births = np.empty(n_events)
    deaths = np.empty(n_events)
    nbars = 0
    for i in range(n_events):
        if kind[i] == 0:
            v = a[i]
            parent[v] = v
            if b[i] != 0:
                abirth[v] = f[i]
        else:
            ru = _find(parent, a[i])
            rv = _find(parent, b[i])
            if ru == rv:
                continue
            bu = abirth[ru]
            bv = abirth[rv]
            young = bu if bu > bv else bv
            old = bu if bu < bv else bv
            if young < _INF and f[i] > young:
                births[nbars] = young
                deaths[nbars] = f[i]
                nbars += 1
            if urank[ru] < urank[rv]:
                ru, rv = rv, ru
            parent[rv] = ru
            if urank[ru] == urank[rv]:
                urank[ru] += 1
            abirth[ru] = old
    ess = np.empty(n_vertices)
    ness = 0
    for v in range(n_vertices):
        if parent[v] >= 0:
            root = _find(parent, v)
            if root == v and abirth[root] < _INF:
                ess[ness] = abirth[root]
                ness += 1
    return births[:nbars], deaths[:nbars], ess[:ness]


def _positive_edges(kind, a, b, n_vertices):
    """Flag edges of a sorted vertex/edge stream that close a cycle."""
    n_events = kind.shape[0]
    parent = np.full(n_vertices, -1, np.int64)
    urank = np.zeros(n_vertices, np.int64)
    out = np.zeros(n_events, np.uint8)
    for i in range(n_events):
        if kind[i] == 0:
            parent[a[i]] = a[i]
        else:
            ru = _find(parent, a[i])
            rv = _find(parent, b[i])
            if ru == rv:
                out[i] = 1
            else:
                if urank[ru] < urank[rv]:
                    ru, rv = rv, ru
                parent[rv] = ru
                if urank[ru] == urank[rv]:
                    urank[ru] += 1
    return out


def _validate_cells(active, f, in_a, in_b, shape, strides):
    """Check pair-complex invariants cell by cell.

    Returns (code, cell, face): 0 ok, 1 missing face, 2 filtration not
    monotone, 3 A not closed, 4 B not closed, 5 A not contained in B.
    """
    d = shape.shape[0]
    n = active.shape[0]
    for i in range(n):
        flat = active[i]
        if in_a[i] != 0 and in_b[i] == 0:
            return 5, i, -1
        rem = flat
        for k in range(d):
            c = rem // strides[k]
            rem -= c * strides[k]
            if c % 2 == 1:
                for s in range(2):
                    nf = flat - strides[k] if s == 0 else flat + strides[k]
                    j = np.searchsorted(active, nf)
                    if j >= n or active[j] != nf:
                        return 1, i, -1
                    if f[j] > f[i]:
                        return 2, i, j
                    if in_a[i] != 0 and in_a[j] == 0:
                        return 3, i, j
                    if in_b[i] != 0 and in_b[j] == 0:
                        return 4, i, j
    return 0, -1, -1


_PY_FUNCS = {
    "reduce_columns": _reduce_columns,
    "image_h0_pairs": _image_h0_pairs,
    "positive_edges": _positive_edges,
    "validate_cells": _validate_cells,
}

def _clone_with_globals(fn, overrides):
    # The numba variants must resolve ``_find`` to the jitted helper; cloning
    # the code object with patched globals keeps a single source of truth.
    import types

    g = dict(fn.__globals__)
    g.update(overrides)
    return types.FunctionType(fn.__code__, g, fn.__name__, fn.__defaults__, fn.__closure__)


_forced = os.environ.get("PERSIVOL_BACKEND", "").strip().lower()
if _forced not in ("", "numba", "python"):
    raise RuntimeError(
        f"PERSIVOL_BACKEND must be 'numba' or 'python', got {_forced!r}"
    )

_NB_FUNCS = {}
if _forced != "python":
    try:
        from numba import njit

        _find_nb = njit(cache=True)(_clone_with_globals(_find, {}))
        _NB_FUNCS = {
            name: njit(cache=True)(_clone_with_globals(fn, {"_find": _find_nb}))
            for name, fn in _PY_FUNCS.items()
        }
    except ImportError:
        _NB_FUNCS = {}

if _NB_FUNCS and _forced != "python":
    BACKEND = "numba"
    _ACTIVE = _NB_FUNCS
else:
    if _forced == "numba" and not _NB_FUNCS:
        raise RuntimeError("PERSIVOL_BACKEND=numba requested but numba is unavailable")
    BACKEND = "python"
    _ACTIVE = _PY_FUNCS

IMPLEMENTATIONS = {"python": _PY_FUNCS}
if _NB_FUNCS:
    IMPLEMENTATIONS["numba"] = _NB_FUNCS

reduce_columns = _ACTIVE["reduce_columns"]
image_h0_pairs = _ACTIVE["image_h0_pairs"]
positive_edges = _ACTIVE["positive_edges"]
validate_cells = _ACTIVE["validate_cells"]
