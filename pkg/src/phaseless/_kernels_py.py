"""Pure-numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is not available.
Both backends implement the same counter-based sampling scheme (splitmix64
words indexed by draw number, geometric gaps via inverse CDF), so a given
(key, shape, density) produces the same sparse pattern under either one.

The three kernels:

``sample_bernoulli``
    Draw an i.i.d. Bernoulli(p) +/-1 sign pattern over an ``n_rows x n_cols``
    grid, returned in CSR form. Gaps between hits are geometric, sampled by
    walking the row-major flattened grid, so cost is O(nnz) not O(cells).

``apply_signed``
    y[r] = sum over row r of sign * v[col] (the caller takes magnitudes).

``sort_by_col``
    Counting sort of CSR entries into column-major order, giving the
    inverted index (column -> rows) used by the sublinear decoder.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(key: int, start: int, count: int) -> np.ndarray:
    """Counter-mode splitmix64: word i depends only on (key, i)."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    return _mix64(np.uint64(key) + idx * _GOLDEN)


def sample_bernoulli(key: int, n_rows: int, n_cols: int, p: float):
    n_cells = n_rows * n_cols
    if not 0.0 < p < 1.0:
        raise ValueError(f"density must be in (0, 1), got {p}")
    inv = 1.0 / np.log1p(-p)
    pos = -1
    ctr = 0
    exp_n = int(n_cells * p * 1.08) + 64
    flat_chunks, sign_chunks = [], []
    while True:
        u = splitmix64(key, ctr, exp_n)
        ctr += exp_n
        uf = (u >> np.uint64(11)) * _U53
        gaps = 1 + np.floor(np.log1p(-uf) * inv).astype(np.int64)
        flat = pos + np.cumsum(gaps)
        flat_chunks.append(flat)
        sign_chunks.append((u & np.uint64(1)).astype(np.int8) * 2 - 1)
        if flat[-1] >= n_cells:
            break
        pos = int(flat[-1])
        exp_n = max(64, int((n_cells - pos) * p * 1.2) + 64)
    flat = np.concatenate(flat_chunks)
    signs = np.concatenate(sign_chunks)
    keep = flat < n_cells
    flat = flat[keep]
    signs = signs[keep]
    rows = flat // n_cols
    cols = (flat - rows * n_cols).astype(np.int32)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
    return indptr, cols, signs


def apply_signed(indptr: np.ndarray, cols: np.ndarray, signs: np.ndarray,
                 v: np.ndarray) -> np.ndarray:
    n_rows = indptr.shape[0] - 1
    if cols.size == 0:
        return np.zeros(n_rows)
    rows = np.repeat(np.arange(n_rows), np.diff(indptr))
    return np.bincount(rows, weights=signs * v[cols], minlength=n_rows)


def sort_by_col(indptr: np.ndarray, cols: np.ndarray, signs: np.ndarray,
                n_cols: int):
    n_rows = indptr.shape[0] - 1
    col_indptr = np.zeros(n_cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=n_cols), out=col_indptr[1:])
    order = np.argsort(cols, kind="stable")
    rows = np.repeat(np.arange(n_rows, dtype=np.int32), np.diff(indptr))
    return col_indptr, rows[order], signs[order]
