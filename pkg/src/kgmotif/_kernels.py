"""Inner loops with two interchangeable backends.

``KGMOTIF_BACKEND=numba`` (the default when numba imports) compiles the loops
with ``@njit``; ``KGMOTIF_BACKEND=numpy`` uses vectorised numpy. Both backends
perform floating-point additions in the same sequential order, so results are
reproducible within a backend; across backends they agree to rounding.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - depends on the environment
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _requested_backend() -> str:
    name = os.environ.get("KGMOTIF_BACKEND", "").strip().lower()
    if name in ("", "auto"):
        return "numba" if numba is not None else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"KGMOTIF_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and numba is None:
        raise ImportError("KGMOTIF_BACKEND=numba but numba is not installed")
    return name


BACKEND = _requested_backend()


# numpy implementations

def _csr_expand_np(indptr: np.ndarray, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    starts = indptr[keys]
    counts = indptr[keys + 1] - starts
    parent = np.repeat(np.arange(len(keys), dtype=np.int64), counts)
    if len(parent) == 0:
        return parent, parent.copy()
    # offset of each output slot within its parent's block
    block_start = np.repeat(np.cumsum(counts) - counts, counts)
    edge = np.repeat(starts, counts) + (np.arange(len(parent), dtype=np.int64) - block_start)
    return parent, edge


def _segment_sum_np(values: np.ndarray, segments: np.ndarray, n_segments: int) -> np.ndarray:
    out = np.zeros((n_segments, values.shape[1]), dtype=values.dtype)
    # ufunc.at is unbuffered and applies the rows in order
    np.add.at(out, segments, values)
    return out


def _affine_np(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.broadcast_to(b, (x.shape[0], w.shape[0])).copy()
    for j in range(w.shape[1]):
        out += x[:, j:j + 1] * w[:, j]
    return out


# numba implementations

if numba is not None:
    @numba.njit(cache=True)
    def _csr_expand_nb(indptr, keys):
        total = 0
        for i in range(keys.shape[0]):
            total += indptr[keys[i] + 1] - indptr[keys[i]]
        parent = np.empty(total, np.int64)
        edge = np.empty(total, np.int64)
        pos = 0
        for i in range(keys.shape[0]):
            for e in range(indptr[keys[i]], indptr[keys[i] + 1]):
                parent[pos] = i
                edge[pos] = e
                pos += 1
        return parent, edge

    @numba.njit(cache=True)
    def _segment_sum_nb(values, segments, n_segments):
        out = np.zeros((n_segments, values.shape[1]), values.dtype)
        for i in range(values.shape[0]):
            s = segments[i]
            for c in range(values.shape[1]):
                out[s, c] += values[i, c]
        return out

    @numba.njit(cache=True)
    def _affine_nb(x, w, b):
        n, d_out = x.shape[0], w.shape[0]
        out = np.empty((n, d_out), np.float64)
        for i in range(n):
            for o in range(d_out):
                acc = b[o]
                for j in range(w.shape[1]):
                    acc += x[i, j] * w[o, j]
                out[i, o] = acc
        return out


def csr_expand(indptr: np.ndarray, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each ``keys[i]`` list the CSR slots ``indptr[k]:indptr[k+1]``.

    Returns ``(parent, slot)``: output row ``j`` came from input row
    ``parent[j]`` and refers to CSR entry ``slot[j]``.
    """
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    if BACKEND == "numba":
        return _csr_expand_nb(indptr, keys)
    return _csr_expand_np(indptr, keys)


def segment_sum(values: np.ndarray, segments: np.ndarray, n_segments: int) -> np.ndarray:
    """Row sums per segment, accumulated strictly in row order."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    segments = np.ascontiguousarray(segments, dtype=np.int64)
    if BACKEND == "numba":
        return _segment_sum_nb(values, segments, int(n_segments))
    return _segment_sum_np(values, segments, int(n_segments))


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``x @ w.T + b`` with a fixed per-entry summation order (no BLAS).

    Every output entry is ``b[o] + x[i,0]*w[o,0] + x[i,1]*w[o,1] + ...``
    added left to right, so equal input rows give bit-identical output rows
    no matter which batch they sit in.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if BACKEND == "numba":
        return _affine_nb(x, w, b)
    return _affine_np(x, w, b)
