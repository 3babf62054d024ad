"""The end-to-end sublinear decoder for phaseless sparse recovery.

Stages, in order:

1. identification    - candidate superset S0 from the A block.
2. estimation        - magnitude estimates on S0 from the B block;
                       S1 = largest ``top_select`` of them.
3. tail energy       - L, a guarded estimate of (1/k) * energy outside S1,
                       from E-block rows whose support misses S1 entirely.
4. pruning           - S2 = members of S1 whose estimated magnitude clears a
                       level-dependent threshold built from L; keeps the
                       relative-sign tests above the interference floor.
5. relative signs    - sign-class bisection of S2 (signs.py).
6. assembly          - signed magnitudes on S2, un-flipping the ensemble's
                       D at the very end.

Every stage reads measurements through block slices and the column inverted
index, so the work after sensing is polynomial in k and log n, not in n;
the diagnostics counters record exactly how much was touched.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ensemble import Measurements, SensingEnsemble
from .signs import ClusterLabels, SignGraph, assign_signs, build_sign_graph, \
    recover_communities
from .sketch import MagnitudeEstimates, estimate_magnitudes, \
    hh_sketch_from_ensemble, identify_heavy

__all__ = [
    "TailEnergyEstimate",
    "TailEstimationError",
    "DecodeDiagnostics",
    "RecoveryResult",
    "estimate_tail_energy",
    "prune",
    "decode",
    "decode_amplified",
]


class TailEstimationError(RuntimeError):
    """Every E sub-block was hit by S1; the E row budget is misconfigured."""


@dataclass
class TailEnergyEstimate:
    L: float
    per_rep: np.ndarray          # kept sub-block values, median of which is L
    n_excluded: int = 0          # sub-blocks with no disjoint row

    def __float__(self) -> float:
        return self.L


@dataclass
class DecodeDiagnostics:
    """Logical access counters for the decoding stages (not the sensing)."""

    y_reads: int = 0             # measurement entries read
    index_reads: int = 0         # inverted-index entries touched
    rows_touched: int = 0        # measurement rows used in some estimate/test
    edges_sampled: int = 0       # F rows meeting S2 in exactly two spots

    def total_touches(self) -> int:
        return self.y_reads + self.index_reads

    def as_dict(self) -> dict:
        return {"y_reads": self.y_reads, "index_reads": self.index_reads,
                "rows_touched": self.rows_touched,
                "edges_sampled": self.edges_sampled}


@dataclass
class RecoveryResult:
    n: int
    indices: np.ndarray          # support of the estimate (= S2), sorted
    values: np.ndarray           # signed estimates on the support
    S0: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    tail_energy: TailEnergyEstimate | None
    labels: ClusterLabels | None
    signs_failed: bool
    diagnostics: DecodeDiagnostics = field(default_factory=DecodeDiagnostics)

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.indices] = self.values
        return x

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "estimate": [[int(i), float(v)] for i, v in
                         zip(self.indices, self.values)],
            "S0": [int(i) for i in self.S0],
            "S1": [int(i) for i in self.S1],
            "S2": [int(i) for i in self.S2],
            "L": None if self.tail_energy is None else self.tail_energy.L,
            "L_per_rep": None if self.tail_energy is None else
                         [float(v) for v in self.tail_energy.per_rep],
            "signs_failed": self.signs_failed,
            "diagnostics": self.diagnostics.as_dict(),
        }, indent=2)


def estimate_tail_energy(ensemble: SensingEnsemble, measurements: Measurements,
                         S1: np.ndarray,
                         diagnostics: DecodeDiagnostics | None = None
                         ) -> TailEnergyEstimate:
    """Median over E sub-blocks of the scaled mean squared measurement of
    rows disjoint from S1.

    Conditioned on missing S1, a row's squared measurement has expectation
    density * (energy outside S1), so the c1-scaled mean tracks
    (1/k) * ||x restricted off S1||^2. Sub-blocks with no disjoint row are
    dropped from the median; if all of them drop, construction constants
    were too small for this S1 and estimation fails.
    """
    cfg = ensemble.config
    S1 = np.asarray(S1, dtype=np.int64)
    kept = []
    excluded = 0
    for name in ensemble.e_block_names:
        block = ensemble.blocks[name]
        yE = measurements.block(name)
        if S1.size:
            hit_rows, _, _ = block.rows_of_many(S1)
            if diagnostics is not None:
                diagnostics.index_reads += int(hit_rows.size)
            disjoint = np.ones(block.n_rows, dtype=bool)
            disjoint[hit_rows] = False
        else:
            disjoint = np.ones(block.n_rows, dtype=bool)
        count = int(disjoint.sum())
        if count == 0:
            excluded += 1
            continue
        if diagnostics is not None:
            diagnostics.y_reads += count
            diagnostics.rows_touched += count
        kept.append(cfg.c1 * float(np.mean(yE[disjoint] ** 2)))
    if not kept:
        raise TailEstimationError(
            f"no E sub-block had a row disjoint from S1 (|S1|={S1.size}); "
            "increase C1 or rep_log_n")
    per_rep = np.array(kept)
    return TailEnergyEstimate(L=float(np.median(per_rep)), per_rep=per_rep,
                              n_excluded=excluded)


def prune(S1: np.ndarray, estimates: MagnitudeEstimates, L: float, k: int,
          C0: float) -> np.ndarray:
    """Keep the largest prefix of S1 (by estimated magnitude) that clears the
    level-dependent threshold  k*L / (C0 * 2^l0 * (log2(5k) - l0 + 2)^2),
    where 2^l0 < m <= 2^(l0+1) for prefix length m. Ties at the cut are all
    kept. Empty result is legal and means the zero vector."""
    S1 = np.asarray(S1, dtype=np.int64)
    if S1.size == 0:
        return S1
    z = estimates.array_for(S1)
    order = np.argsort(-z, kind="stable")
    z_sorted = z[order]
    log5k = math.log2(5 * k)
    best_m = 0
    for m in range(1, S1.size + 1):
        l0 = math.ceil(math.log2(m)) - 1 if m > 1 else -1
        threshold = k * L / (C0 * (2.0 ** l0) * (log5k - l0 + 2) ** 2)
        if z_sorted[m - 1] ** 2 > threshold:
            best_m = m
    if best_m == 0:
        return np.empty(0, dtype=np.int64)
    cut = z_sorted[best_m - 1]
    return np.sort(S1[z >= cut])


def _select_top(S0: np.ndarray, estimates: MagnitudeEstimates,
                cap: int) -> np.ndarray:
    """Largest ``cap`` candidates by estimate; ties broken by lower index."""
    S0 = np.asarray(S0, dtype=np.int64)
    if S0.size <= cap:
        return np.sort(S0)
    est = estimates.array_for(S0)
    order = np.lexsort((S0, -est))
    return np.sort(S0[order[:cap]])


def _sign_level(ensemble: SensingEnsemble, size: int) -> int:
    """Smallest level l with size <= 2^l, clamped to the built ladder."""
    level = max(0, math.ceil(math.log2(max(size, 1))))
    return min(level, ensemble.f_top_level)


def _sign_stage(ensemble: SensingEnsemble, measurements: Measurements,
                S2: np.ndarray, estimates: MagnitudeEstimates,
                diagnostics: DecodeDiagnostics
                ) -> tuple[ClusterLabels | None, SignGraph | None, bool]:
    if S2.size == 0:
        return None, None, False
    if S2.size == 1:
        return ClusterLabels({int(S2[0]): 1}, flagged=True), None, False
    level = _sign_level(ensemble, S2.size)
    name = ensemble.f_level_names(level)[0]
    graph = build_sign_graph(ensemble.blocks[name], measurements.block(name),
                             S2, estimates, level=level)
    diagnostics.edges_sampled += graph.pair_rows
    diagnostics.y_reads += graph.pair_rows
    diagnostics.rows_touched += graph.pair_rows
    diagnostics.index_reads += sum(
        ensemble.blocks[name].rows_of(int(j))[0].size for j in S2)
    try:
        labels = recover_communities(graph)
    except Exception:
        return None, graph, True
    return labels, graph, labels.flagged and graph.n_edges == 0


def decode(ensemble: SensingEnsemble, measurements: Measurements
           ) -> RecoveryResult:
    """Run the full pipeline on one set of measurements."""
    diagnostics = DecodeDiagnostics()
    cfg = ensemble.config

    sketch = hh_sketch_from_ensemble(ensemble)
    yA = measurements.block("A")
    S0 = identify_heavy(sketch, yA)
    diagnostics.y_reads += yA.size
    diagnostics.rows_touched += yA.size

    estimates = estimate_magnitudes(ensemble.blocks["B"], measurements.block("B"), S0)
    diagnostics.y_reads += S0.size * cfg.countsketch_reps
    diagnostics.index_reads += S0.size * cfg.countsketch_reps
    diagnostics.rows_touched += S0.size * cfg.countsketch_reps

    S1 = _select_top(S0, estimates, cfg.top_select)
    tail = estimate_tail_energy(ensemble, measurements, S1, diagnostics)
    S2 = prune(S1, estimates, tail.L, ensemble.k, cfg.C0)

    labels, _, signs_failed = _sign_stage(ensemble, measurements, S2,
                                          estimates, diagnostics)
    if S2.size == 0:
        indices = S2
        values = np.empty(0)
    elif labels is None or signs_failed:
        # sign stage failed: report bare magnitudes, flagged, no sign games
        indices = S2
        values = estimates.array_for(S2)
        signs_failed = True
    else:
        indices, values = assign_signs(labels, estimates, S2)
        values = values * ensemble.D[indices]  # undo the sensing-side flip
    return RecoveryResult(n=ensemble.n, indices=indices, values=values,
                          S0=S0, S1=S1, S2=S2, tail_energy=tail,
                          labels=labels, signs_failed=signs_failed,
                          diagnostics=diagnostics)


def decode_amplified(ensembles: list[SensingEnsemble],
                     y_list: list[Measurements]) -> RecoveryResult:
    """Majority-vote variant: candidate sets, magnitudes and pruning come
    from the first ensemble; every ensemble (and every inner copy of the
    selected F level) casts one vote per coordinate for its relative sign
    against the anchor, the largest-magnitude member of S2.

    Votes are cast in signal space: each replica's label pair is un-flipped
    by that replica's own D before voting, so replicas with different D
    agree on what they are voting about.
    """
    if not ensembles or len(ensembles) != len(y_list):
        raise ValueError("need matching, nonempty ensemble and measurement lists")
    primary = ensembles[0]
    base = decode(primary, y_list[0])
    S2 = base.S2
    if S2.size <= 1 or base.labels is None:
        return base
    estimates = MagnitudeEstimates(
        {int(i): abs(float(v)) for i, v in zip(base.indices, base.values)})
    mags = estimates.array_for(S2)
    anchor = int(S2[int(np.argmax(mags))])

    diagnostics = base.diagnostics
    votes = {int(i): 0.0 for i in S2}
    any_labels = False
    for ens, meas in zip(ensembles, y_list):
        level = _sign_level(ens, S2.size)
        for name in ens.f_level_names(level):
            graph = build_sign_graph(ens.blocks[name], meas.block(name),
                                     S2, estimates, level=level)
            diagnostics.edges_sampled += graph.pair_rows
            try:
                labels = recover_communities(graph)
            except Exception:
                continue
            any_labels = True
            anchor_sign = ens.D[anchor] * labels[anchor]
            for i in S2:
                rel = (ens.D[int(i)] * labels[int(i)]) * anchor_sign
                votes[int(i)] += rel
    if not any_labels:
        return base
    indices = S2
    rel_signs = np.array([1 if votes[int(i)] >= 0 else -1 for i in S2])
    values = rel_signs * estimates.array_for(S2)
    return RecoveryResult(n=primary.n, indices=indices, values=values,
                          S0=base.S0, S1=base.S1, S2=S2,
                          tail_energy=base.tail_energy, labels=base.labels,
                          signs_failed=False, diagnostics=diagnostics)
