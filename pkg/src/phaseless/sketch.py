"""Heavy-hitter identification and magnitude estimation from magnitudes only.

Identification block (A). For each repetition, every coordinate is hashed
into a bucket and given a random sign. A bucket contributes 2b+1 measurement
rows (b = index bits): one over all its members, and for each bit position
one over members with that bit 0 and one with that bit 1. When a single
coordinate dominates its bucket, each bit of its index is recovered by
comparing the two sub-bucket magnitudes, so identification never looks at
signs - which is what makes the scheme usable when only |Phi x| is observed.
A candidate is kept only if its assembled index actually hashes back to the
bucket it was decoded from; survivors are ranked by the median over
repetitions of their whole-bucket magnitudes and capped at 2K.

Estimation block (B). Plain bucket/sign hashing, several repetitions; the
estimate of |x_i| is the median over repetitions of the magnitude of i's
bucket. The median of magnitudes (rather than of signed values) is the
phaseless-compatible variant and estimates |x_i| rather than x_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels_py import splitmix64
from .sparse import SparseSignMatrix

__all__ = [
    "HeavyHitterSketch",
    "MagnitudeEstimates",
    "SketchError",
    "build_hh_block",
    "build_countsketch_block",
    "identify_heavy",
    "estimate_magnitude",
    "estimate_magnitudes",
]

CANDIDATE_CAP_FACTOR = 2  # |S0| <= this * K


class SketchError(ValueError):
    pass


def _bucket_hash(key: int, n: int, reps: int, n_buckets: int):
    """(reps, n) bucket assignment and sign arrays from one stream key."""
    u = splitmix64(key, 0, reps * n).reshape(reps, n)
    buckets = (u % np.uint64(n_buckets)).astype(np.int64)
    signs = ((u >> np.uint64(1)) & np.uint64(1)).astype(np.int8) * 2 - 1
    return buckets, signs


def build_hh_block(key: int, n: int, n_buckets: int, n_bits: int,
                   reps: int) -> SparseSignMatrix:
    """Rows per repetition r and bucket h, laid out contiguously:
    [whole bucket, bit0=0, bit0=1, bit1=0, bit1=1, ...]."""
    buckets, signs = _bucket_hash(key, n, reps, n_buckets)
    stride = 2 * n_bits + 1
    rows_per_rep = n_buckets * stride
    idx = np.arange(n, dtype=np.int64)
    row_chunks, col_chunks, sign_chunks = [], [], []
    for r in range(reps):
        base = r * rows_per_rep + buckets[r] * stride
        row_chunks.append(base)
        for t in range(n_bits):
            bit = (idx >> t) & 1
            row_chunks.append(base + 1 + 2 * t + bit)
        cols = np.tile(idx, n_bits + 1)
        col_chunks.append(cols)
        sign_chunks.append(np.tile(signs[r], n_bits + 1))
    return SparseSignMatrix.from_coo(
        np.concatenate(row_chunks), np.concatenate(col_chunks),
        np.concatenate(sign_chunks), rows_per_rep * reps, n)


def build_countsketch_block(key: int, n: int, n_buckets: int,
                            reps: int) -> SparseSignMatrix:
    buckets, signs = _bucket_hash(key, n, reps, n_buckets)
    idx = np.arange(n, dtype=np.int64)
    rows = (np.arange(reps, dtype=np.int64)[:, None] * n_buckets + buckets).ravel()
    return SparseSignMatrix.from_coo(rows, np.tile(idx, reps), signs.ravel(),
                                     reps * n_buckets, n)


@dataclass
class MagnitudeEstimates:
    """Nonnegative per-coordinate magnitude estimates |x_i|."""

    entries: dict[int, float]

    def __getitem__(self, i: int) -> float:
        return self.entries[i]

    def __contains__(self, i: int) -> bool:
        return i in self.entries

    def array_for(self, indices: np.ndarray) -> np.ndarray:
        return np.array([self.entries[int(i)] for i in indices], dtype=np.float64)


@dataclass
class HeavyHitterSketch:
    """Decoder-side view over the A block."""

    K: int
    n: int
    n_buckets: int
    n_bits: int
    reps: int
    block: SparseSignMatrix
    _buckets_cache: np.ndarray | None = field(default=None, repr=False)

    @property
    def stride(self) -> int:
        return 2 * self.n_bits + 1

    def buckets_of(self, indices: np.ndarray) -> np.ndarray:
        """(len(indices), reps) bucket ids, recovered from the block itself."""
        indices = np.asarray(indices, dtype=np.int64)
        rows, _, owners = self.block.rows_of_many(indices)
        # whole-bucket rows are those at offset 0 within a bucket's group
        local = rows % self.stride
        whole = local == 0
        rows = rows[whole]
        owners = owners[whole]
        rep = rows // (self.n_buckets * self.stride)
        bucket = (rows % (self.n_buckets * self.stride)) // self.stride
        out = np.empty((indices.size, self.reps), dtype=np.int64)
        pos = {int(ix): j for j, ix in enumerate(indices)}
        out[[pos[int(o)] for o in owners], rep] = bucket
        return out

    def whole_bucket_rows(self, indices: np.ndarray) -> np.ndarray:
        """(len(indices), reps) global-in-block row ids of whole-bucket rows."""
        buckets = self.buckets_of(indices)
        rep_base = np.arange(self.reps, dtype=np.int64) * self.n_buckets * self.stride
        return rep_base[None, :] + buckets * self.stride


def hh_sketch_from_ensemble(ensemble) -> HeavyHitterSketch:
    buckets, bits, reps = ensemble.hh_geometry()
    return HeavyHitterSketch(K=ensemble.config.heavy_K, n=ensemble.n,
                             n_buckets=buckets, n_bits=bits, reps=reps,
                             block=ensemble.blocks["A"])


def identify_heavy(sketch: HeavyHitterSketch, yA: np.ndarray) -> np.ndarray:
    """Candidate superset of the heavy coordinates, from the A measurements.

    Returns a sorted index array of size <= 2K. Reads the whole (K polylog)
    A block and nothing else.
    """
    expected = sketch.reps * sketch.n_buckets * sketch.stride
    if yA.shape != (expected,):
        raise SketchError(f"A-block slice has {yA.shape}, expected ({expected},)")
    y = yA.reshape(sketch.reps, sketch.n_buckets, sketch.stride)
    totals = y[:, :, 0]
    low = y[:, :, 1::2]   # bit = 0 sub-buckets
    high = y[:, :, 2::2]  # bit = 1 sub-buckets
    bits = (high > low).astype(np.int64)
    weights = 1 << np.arange(sketch.n_bits, dtype=np.int64)
    decoded = bits @ weights                      # (reps, n_buckets)
    live = (totals > 0) & (decoded < sketch.n)
    candidates = np.unique(decoded[live])
    if candidates.size == 0:
        return candidates
    # keep only candidates whose index hashes back to a bucket that decoded it
    buckets = sketch.buckets_of(candidates)       # (m, reps)
    rep_idx = np.arange(sketch.reps)[None, :]
    decoded_here = decoded[rep_idx, buckets] == candidates[:, None]
    alive_here = live[rep_idx, buckets]
    confirmed = np.any(decoded_here & alive_here, axis=1)
    candidates = candidates[confirmed]
    if candidates.size == 0:
        return candidates
    est = np.median(totals[rep_idx, sketch.buckets_of(candidates)], axis=1)
    cap = CANDIDATE_CAP_FACTOR * sketch.K
    if candidates.size > cap:
        keep = np.argsort(-est, kind="stable")[:cap]
        candidates = np.sort(candidates[keep])
    return candidates


def _bucket_values(block: SparseSignMatrix, yB: np.ndarray,
                   indices: np.ndarray) -> np.ndarray:
    """(len(indices), reps) magnitudes of each index's bucket per repetition.

    rows_of_many returns each column's rows contiguously, in the order the
    columns were given, and every column sits in exactly one bucket per
    repetition, so a plain reshape lines rows up with (index, repetition).
    """
    rows, _, _ = block.rows_of_many(np.asarray(indices, dtype=np.int64))
    reps = rows.size // len(indices)
    return yB[rows].reshape(len(indices), reps)


def estimate_magnitude(B_block: SparseSignMatrix, yB: np.ndarray, i: int) -> float:
    """Median over repetitions of |bucket containing i|."""
    if not 0 <= i < B_block.n_cols:
        raise SketchError(f"index {i} out of range [0, {B_block.n_cols})")
    rows, _ = B_block.rows_of(i)
    return float(np.median(yB[rows]))


def estimate_magnitudes(B_block: SparseSignMatrix, yB: np.ndarray,
                        indices: np.ndarray) -> MagnitudeEstimates:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return MagnitudeEstimates({})
    med = np.median(_bucket_values(B_block, yB, indices), axis=1)
    return MagnitudeEstimates({int(i): float(v) for i, v in zip(indices, med)})
