"""Sparse +/-1 sign matrices stored in CSR form with a lazy column index.

Every measurement block in the sensing ensemble is one of these. Rows hold
(column, sign) pairs with signs in {-1, +1}; densities run as low as a few
parts in ten thousand, so dense storage is never built. The column index
(CSC ordering of the same entries) is what the decoder uses to answer
"which rows touch coordinate j" without scanning the whole block; it is
built on first use and cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import apply_signed, sample_bernoulli, sort_by_col


@dataclass
class SparseSignMatrix:
    n_rows: int
    n_cols: int
    indptr: np.ndarray   # int64, length n_rows + 1
    cols: np.ndarray     # int32, length nnz
    signs: np.ndarray    # int8, entries in {-1, +1}
    _col_view: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def nnz(self) -> int:
        return int(self.cols.shape[0])

    @classmethod
    def bernoulli(cls, key: int, n_rows: int, n_cols: int, p: float) -> "SparseSignMatrix":
        """i.i.d. pattern: each cell nonzero w.p. p, sign uniform +/-1.

        p = 1 (every cell occupied, e.g. the unit-sparsity energy blocks) is
        handled directly; the geometric-gap walk needs p < 1.
        """
        if p >= 1.0:
            from ._backend import splitmix64

            n_cells = n_rows * n_cols
            u = splitmix64(int(key), 0, n_cells)
            signs = (u & np.uint64(1)).astype(np.int8) * 2 - 1
            cols = np.tile(np.arange(n_cols, dtype=np.int32), n_rows)
            indptr = np.arange(n_rows + 1, dtype=np.int64) * n_cols
            return cls(n_rows, n_cols, indptr, cols, signs)
        indptr, cols, signs = sample_bernoulli(int(key), n_rows, n_cols, p)
        return cls(n_rows, n_cols, indptr, cols, signs)

    @classmethod
    def from_coo(cls, rows: np.ndarray, cols: np.ndarray, signs: np.ndarray,
                 n_rows: int, n_cols: int) -> "SparseSignMatrix":
        order = np.argsort(rows, kind="stable")
        rows = rows[order]
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
        return cls(n_rows, n_cols, indptr,
                   cols[order].astype(np.int32), signs[order].astype(np.int8))

    def row(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        """(columns, signs) of row q, as views."""
        s, e = self.indptr[q], self.indptr[q + 1]
        return self.cols[s:e], self.signs[s:e]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Signed row sums: out[q] = sum_j sign * v[col]."""
        if v.shape[0] != self.n_cols:
            raise ValueError(f"vector length {v.shape[0]} != n_cols {self.n_cols}")
        return apply_signed(self.indptr, self.cols, self.signs, v)

    # -- column (inverted) index ------------------------------------------

    def _ensure_col_view(self) -> tuple:
        if self._col_view is None:
            self._col_view = sort_by_col(self.indptr, self.cols, self.signs,
                                         self.n_cols)
        return self._col_view

    def rows_of(self, col: int) -> tuple[np.ndarray, np.ndarray]:
        """(row ids, signs) of all entries in a column, as views."""
        col_indptr, rows, signs = self._ensure_col_view()
        s, e = col_indptr[col], col_indptr[col + 1]
        return rows[s:e], signs[s:e]

    def rows_of_many(self, columns: np.ndarray):
        """Concatenated (row ids, signs, owning column) over several columns.

        Cost is the number of returned entries, not the block size.
        """
        col_indptr, rows, signs = self._ensure_col_view()
        columns = np.asarray(columns, dtype=np.int64)
        starts = col_indptr[columns]
        counts = col_indptr[columns + 1] - starts
        take = _ranges(starts, counts)
        return rows[take], signs[take], np.repeat(columns, counts)

    def validate(self) -> None:
        """Check structural invariants; raises ValueError on violation."""
        if self.indptr.shape[0] != self.n_rows + 1 or self.indptr[0] != 0:
            raise ValueError("malformed indptr")
        if self.indptr[-1] != self.nnz or np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr does not partition entries")
        if self.nnz:
            if self.cols.min() < 0 or self.cols.max() >= self.n_cols:
                raise ValueError("column index out of range")
            if not np.all(np.abs(self.signs) == 1):
                raise ValueError("signs must be exactly -1 or +1")
        for q in range(self.n_rows):
            c, _ = self.row(q)
            if c.size != np.unique(c).size:
                raise ValueError(f"duplicate column in row {q}")


def _ranges(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Indices [s0, s0+1, ..., s0+c0-1, s1, ...] without a Python loop."""
    keep = counts > 0
    starts = starts[keep]
    counts = counts[keep]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    out = np.ones(total, dtype=np.int64)
    out[0] = starts[0]
    boundaries = np.cumsum(counts)[:-1]
    out[boundaries] = starts[1:] - (starts[:-1] + counts[:-1] - 1)
    np.cumsum(out, out=out)
    return out
