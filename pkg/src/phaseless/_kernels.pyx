# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Bernoulli sign-pattern sampling, signed sparse
apply, and the counting sort that builds the column inverted index.

Mirrors _kernels_py exactly (same counter-based splitmix64 stream, same
geometric-gap recurrence), so both backends produce identical patterns.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log1p, floor

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t phl_mix64(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    """
    unsigned long long phl_mix64(unsigned long long z) nogil

DEF GOLDEN = 0x9E3779B97F4A7C15


def sample_bernoulli(unsigned long long key, long n_rows, long n_cols, double p):
    if not (0.0 < p < 1.0):
        raise ValueError(f"density must be in (0, 1), got {p}")
    cdef long n_cells = n_rows * n_cols
    cdef double inv = 1.0 / log1p(-p)
    cdef long cap = <long> (n_cells * p + 6.0 * (n_cells * p * (1.0 - p)) ** 0.5) + 64
    cdef cnp.ndarray[cnp.int64_t, ndim=1] indptr = np.zeros(n_rows + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cols = np.empty(cap, dtype=np.int32)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] signs = np.empty(cap, dtype=np.int8)
    cdef long* ip = <long*> cnp.PyArray_DATA(indptr)
    cdef int* cp = <int*> cnp.PyArray_DATA(cols)
    cdef signed char* sp = <signed char*> cnp.PyArray_DATA(signs)
    cdef long pos = -1, cnt = 0, row
    cdef unsigned long long ctr = 0, u
    cdef double uf
    cdef bint overflow = 0
    with nogil:
        while True:
            u = phl_mix64(key + ctr * <unsigned long long> GOLDEN)
            ctr += 1
            uf = (u >> 11) * (1.0 / 9007199254740992.0)
            pos += 1 + <long> floor(log1p(-uf) * inv)
            if pos >= n_cells:
                break
            if cnt >= cap:
                overflow = 1
                break
            row = pos / n_cols
            cp[cnt] = <int> (pos - row * n_cols)
            sp[cnt] = 1 if (u & 1) else -1
            ip[row + 1] += 1
            cnt += 1
    if overflow:
        # 6-sigma headroom exceeded; fall back to the (identical) numpy path
        from . import _kernels_py
        return _kernels_py.sample_bernoulli(key, n_rows, n_cols, p)
    cdef long r
    for r in range(n_rows):
        ip[r + 1] += ip[r]
    return indptr, cols[:cnt].copy(), signs[:cnt].copy()


def apply_signed(cnp.ndarray[cnp.int64_t, ndim=1] indptr,
                 cnp.ndarray[cnp.int32_t, ndim=1] cols,
                 cnp.ndarray[cnp.int8_t, ndim=1] signs,
                 cnp.ndarray[cnp.float64_t, ndim=1] v):
    cdef long n_rows = indptr.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_rows, dtype=np.float64)
    cdef long r, j
    cdef double acc
    with nogil:
        for r in range(n_rows):
            acc = 0.0
            for j in range(indptr[r], indptr[r + 1]):
                acc += signs[j] * v[cols[j]]
            out[r] = acc
    return out


def sort_by_col(cnp.ndarray[cnp.int64_t, ndim=1] indptr,
                cnp.ndarray[cnp.int32_t, ndim=1] cols,
                cnp.ndarray[cnp.int8_t, ndim=1] signs,
                long n_cols):
    cdef long n_rows = indptr.shape[0] - 1
    cdef long nnz = cols.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] col_indptr = np.zeros(n_cols + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] out_rows = np.empty(nnz, dtype=np.int32)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] out_signs = np.empty(nnz, dtype=np.int8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cursor = np.empty(n_cols, dtype=np.int64)
    cdef long* cip = <long*> cnp.PyArray_DATA(col_indptr)
    cdef long* cur = <long*> cnp.PyArray_DATA(cursor)
    cdef int* orp = <int*> cnp.PyArray_DATA(out_rows)
    cdef signed char* osp = <signed char*> cnp.PyArray_DATA(out_signs)
    cdef long r, j, c, dst
    with nogil:
        for j in range(nnz):
            cip[cols[j] + 1] += 1
        for c in range(n_cols):
            cip[c + 1] += cip[c]
            cur[c] = cip[c]
        for r in range(n_rows):
            for j in range(indptr[r], indptr[r + 1]):
                c = cols[j]
                dst = cur[c]
                cur[c] = dst + 1
                orp[dst] = <int> r
                osp[dst] = signs[j]
    return col_indptr, out_rows, out_signs
