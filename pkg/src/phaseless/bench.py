"""Seeded Monte-Carlo harness: signal models, end-to-end trials, calibration.

Everything is deterministic given the TrialSpec: per-trial generators are
derived from (seed, trial index, stream) so records do not depend on
execution order or worker count. Reports carry per-trial records (CSV) and
aggregates recomputable from them (JSON).

Success metric, randomized pipeline: squared recovery error after the best
global sign flip, compared against 1.8x the squared k-tail norm (exactly
sparse signals must hit zero error). Deterministic pipeline: relative l2
error after the best global phase, up to the conjugate-reflection twin that
magnitude measurements cannot split, against 1e-8.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .decoder import decode, decode_amplified
from .ensemble import EnsembleConfig, apply_phaseless, build_ensemble, \
    planned_row_counts
from .prony import DeterministicScheme, conjugate_reflection, det_measure, \
    det_recover
from .signs import build_sign_graph
from .sketch import MagnitudeEstimates

__all__ = [
    "TrialSpec",
    "TrialReport",
    "gen_signal",
    "run_trials",
    "calibrate",
    "edge_error_experiment",
    "tail_norm_sq",
    "min_flip_error_sq",
    "phase_error",
    "twin_phase_error",
    "wilson_interval",
]

SUCCESS_FACTOR = 1.8        # error^2 <= this * tail^2 counts as success
PRONY_TOL = 1e-8

SIGNAL_MODELS = ("exact-sparse", "spikes-plus-tail", "power-law")
PIPELINES = ("cphase", "cphase-amplified", "prony")


# ---------------------------------------------------------------------------
# spec and signals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialSpec:
    n: int
    k: int
    signal_model: str = "exact-sparse"
    trials: int = 100
    seed: int = 0
    config: EnsembleConfig = field(default_factory=EnsembleConfig)
    pipeline: str = "cphase"
    tail_norm: float = 1.0          # spikes-plus-tail: l2 norm of the tail
    spike_energy_ratio: float = 100.0  # spikes-plus-tail: spike/tail energy
    decay: float = 1.0              # power-law exponent
    outer_reps: int = 3             # cphase-amplified: independent replicas

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.signal_model not in SIGNAL_MODELS:
            raise ValueError(f"unknown signal model {self.signal_model!r}")
        if self.pipeline not in PIPELINES:
            raise ValueError(f"unknown pipeline {self.pipeline!r}")
        if self.tail_norm < 0 or self.spike_energy_ratio <= 0:
            raise ValueError("invalid signal-model parameters")

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrialSpec":
        d = json.loads(text)
        cfg = d.pop("config", None)
        spec = cls(**d)
        if cfg is not None:
            spec = replace(spec, config=EnsembleConfig(**cfg))
        return spec


def _rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial, stream]))


def _ensemble_seed(seed: int, trial: int, replica: int = 0) -> int:
    ss = np.random.SeedSequence([seed, trial, 1, replica])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def gen_signal(spec: TrialSpec, trial_index: int) -> np.ndarray:
    """Deterministic signal for one trial; complex for the prony pipeline."""
    rng = _rng(spec.seed, trial_index, 0)
    n, k = spec.n, spec.k
    if spec.pipeline == "prony":
        x = np.zeros(n, dtype=np.complex128)
        pos = rng.choice(n, k, replace=False)
        mags = 10.0 ** rng.uniform(0.0, 1.0, k)
        x[pos] = mags * np.exp(2j * math.pi * rng.uniform(0.0, 1.0, k))
        return x
    x = np.zeros(n)
    pos = rng.choice(n, k, replace=False)
    mags = 10.0 ** rng.uniform(0.0, 1.0, k)
    signs = rng.choice([-1.0, 1.0], k)
    if spec.signal_model == "exact-sparse":
        x[pos] = mags * signs
    elif spec.signal_model == "spikes-plus-tail":
        energy = spec.spike_energy_ratio * spec.tail_norm ** 2
        mags *= math.sqrt(energy / float(np.sum(mags ** 2)))
        x[pos] = mags * signs
        off = np.ones(n, dtype=bool)
        off[pos] = False
        tail = rng.standard_normal(n - k)
        norm = np.linalg.norm(tail)
        if norm > 0 and spec.tail_norm > 0:
            x[off] = tail / norm * spec.tail_norm
    else:  # power-law
        ranked = np.power(np.arange(1, n + 1, dtype=np.float64), -spec.decay)
        x[rng.permutation(n)] = ranked * rng.choice([-1.0, 1.0], n)
    return x


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def tail_norm_sq(x: np.ndarray, k: int) -> float:
    """||x_tail(k)||_2^2: energy outside the k largest magnitudes."""
    a = np.abs(x) ** 2
    if k >= a.size:
        return 0.0
    idx = np.argpartition(a, a.size - k)[: a.size - k]
    return float(np.sum(a[idx]))


def min_flip_error_sq(x: np.ndarray, x_hat: np.ndarray) -> float:
    return float(min(np.sum((x - x_hat) ** 2), np.sum((x + x_hat) ** 2)))


def phase_error(x_hat: np.ndarray, x: np.ndarray) -> float:
    """||x - e^{i phi} x_hat|| minimized over the global phase phi."""
    ip = np.vdot(x_hat, x)
    phi = np.angle(ip) if ip != 0 else 0.0
    return float(np.linalg.norm(x - np.exp(1j * phi) * x_hat))


def twin_phase_error(x_hat: np.ndarray, x: np.ndarray) -> float:
    """phase_error up to the conjugate-reflection equivalence class."""
    return min(phase_error(x_hat, x), phase_error(conjugate_reflection(x_hat), x))


def sign_accuracy(x: np.ndarray, indices: np.ndarray, values: np.ndarray
                  ) -> tuple[float, int]:
    """(best-flip accuracy, errors) of recovered signs on true nonzeros."""
    mask = x[indices] != 0
    if not mask.any():
        return 1.0, 0
    agree = np.sign(values[mask]) == np.sign(x[indices][mask])
    errors = int(min(np.sum(~agree), np.sum(agree)))
    return 1.0 - errors / int(mask.sum()), errors


def wilson_interval(successes: int, trials: int, z: float = 1.96
                    ) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials ** 2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------

RECORD_FIELDS = [
    "trial", "pipeline", "n", "k", "error_sq", "tail_sq", "success",
    "rel_error", "s0_size", "s1_size", "s2_size", "L", "sign_accuracy",
    "sign_errors", "signs_failed", "rows_total", "touches", "wall_time",
    "error",
]


def _run_one(spec: TrialSpec, t: int) -> dict:
    record = {f: None for f in RECORD_FIELDS}
    record.update(trial=t, pipeline=spec.pipeline, n=spec.n, k=spec.k,
                  success=False, error="")
    start = time.perf_counter()
    try:
        x = gen_signal(spec, t)
        if spec.pipeline == "prony":
            scheme = DeterministicScheme(spec.n, spec.k)
            y = det_measure(scheme, x)
            x_hat = det_recover(scheme, y).values
            rel = twin_phase_error(x_hat, x) / float(np.linalg.norm(x))
            record.update(rel_error=rel, success=bool(rel < PRONY_TOL),
                          rows_total=scheme.n_measurements)
        else:
            tail_sq = tail_norm_sq(x, spec.k)
            if spec.pipeline == "cphase":
                ens = build_ensemble(spec.n, spec.k, config=spec.config,
                                     rng_seed=_ensemble_seed(spec.seed, t))
                meas = apply_phaseless(ens, x)
                result = decode(ens, meas)
                rows_total = ens.total_rows
            else:
                ensembles, measurements = [], []
                for rep in range(spec.outer_reps):
                    ens = build_ensemble(spec.n, spec.k, config=spec.config,
                                         rng_seed=_ensemble_seed(spec.seed, t, rep))
                    ensembles.append(ens)
                    measurements.append(apply_phaseless(ens, x))
                result = decode_amplified(ensembles, measurements)
                rows_total = ensembles[0].total_rows
            x_hat = result.to_dense()
            err_sq = min_flip_error_sq(x, x_hat)
            acc, errs = sign_accuracy(x, result.indices, result.values)
            record.update(
                error_sq=err_sq, tail_sq=tail_sq,
                success=bool(err_sq <= SUCCESS_FACTOR * tail_sq),
                s0_size=int(result.S0.size), s1_size=int(result.S1.size),
                s2_size=int(result.S2.size),
                L=None if result.tail_energy is None else result.tail_energy.L,
                sign_accuracy=acc, sign_errors=errs,
                signs_failed=bool(result.signs_failed),
                rows_total=rows_total,
                touches=result.diagnostics.total_touches())
    except Exception as exc:  # record, never abort the batch
        record["error"] = f"{type(exc).__name__}: {exc}"
    record["wall_time"] = time.perf_counter() - start
    return record


@dataclass
class TrialReport:
    spec: TrialSpec
    records: list[dict]

    def aggregates(self) -> dict:
        ok = sum(1 for r in self.records if r["success"])
        n = len(self.records)
        lo, hi = wilson_interval(ok, n)
        agg = {
            "trials": n,
            "successes": ok,
            "success_rate": ok / n,
            "success_ci95": [lo, hi],
            "hard_errors": sum(1 for r in self.records if r["error"]),
        }
        ratios = [r["error_sq"] / r["tail_sq"] for r in self.records
                  if r["tail_sq"] not in (None, 0) and r["error_sq"] is not None]
        if ratios:
            agg["median_error_ratio"] = float(np.median(ratios))
        rels = [r["rel_error"] for r in self.records if r["rel_error"] is not None]
        if rels:
            agg["median_rel_error"] = float(np.median(rels))
        accs = [r["sign_accuracy"] for r in self.records
                if r["sign_accuracy"] is not None]
        if accs:
            agg["mean_sign_accuracy"] = float(np.mean(accs))
        return agg

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=RECORD_FIELDS)
        writer.writeheader()
        for r in self.records:
            writer.writerow(r)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "spec": json.loads(self.spec.to_json()),
            "aggregates": self.aggregates(),
        }, indent=2, sort_keys=True)


def run_trials(spec: TrialSpec, workers: int = 1) -> TrialReport:
    """Run every trial in the spec; per-trial failures are recorded, not
    raised. Records are deterministic given the spec, whatever ``workers``."""
    if workers > 1:
        import multiprocessing as mp

        with mp.Pool(workers) as pool:
            records = pool.starmap(_run_one,
                                   [(spec, t) for t in range(spec.trials)])
    else:
        records = [_run_one(spec, t) for t in range(spec.trials)]
    return TrialReport(spec=spec, records=records)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def _config_grid(grid: dict[str, list]) -> list[EnsembleConfig]:
    keys = sorted(grid)
    configs = [EnsembleConfig()]
    for key in keys:
        configs = [replace(c, **{key: v}) for c in configs for v in grid[key]]
    return configs


def calibrate(grid: dict[str, list], base_spec: TrialSpec, target_rate: float,
              out_path=None) -> tuple[EnsembleConfig | None, list[dict]]:
    """Smallest-measurement config on the grid meeting the target rate.

    Returns (winner or None, per-config summaries, sorted by measurement
    count ascending). Writes a versioned defaults file when a winner exists
    and out_path is given.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("empty calibration grid")
    configs = _config_grid(grid)
    configs.sort(key=lambda c: planned_row_counts(base_spec.n, base_spec.k, c)["total"])
    summaries = []
    winner = None
    for cfg in configs:
        spec = replace(base_spec, config=cfg)
        report = run_trials(spec)
        agg = report.aggregates()
        rows = planned_row_counts(spec.n, spec.k, cfg)["total"]
        summaries.append({"config": asdict(cfg), "rows": rows,
                          "success_rate": agg["success_rate"]})
        if winner is None and agg["success_rate"] >= target_rate:
            winner = cfg.resolve(base_spec.n, base_spec.k)
            break
    if winner is not None and out_path is not None:
        payload = {"format": "phaseless-defaults", "version": 1,
                   "n": base_spec.n, "k": base_spec.k,
                   "target_rate": target_rate, "config": asdict(winner)}
        with open(out_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return winner, summaries


def edge_error_experiment(n: int, k: int, config: EnsembleConfig, trials: int,
                          seed: int, tail_norm: float = 1.0,
                          spike_energy_ratio: float = 100.0) -> float:
    """Fraction of sign-graph edges that contradict the planted signs.

    Isolates the pair-test stage: the candidate set and magnitudes are taken
    from the planted truth so that only measurement interference produces
    wrong edges. Used to check that raising C0 lowers edge noise.
    """
    spec = TrialSpec(n=n, k=k, signal_model="spikes-plus-tail", trials=trials,
                     seed=seed, config=config, tail_norm=tail_norm,
                     spike_energy_ratio=spike_energy_ratio)
    wrong = total = 0
    for t in range(trials):
        x = gen_signal(spec, t)
        ens = build_ensemble(n, k, config=config,
                             rng_seed=_ensemble_seed(seed, t))
        meas = apply_phaseless(ens, x)
        support = np.sort(np.argsort(-np.abs(x))[:k])
        est = MagnitudeEstimates({int(i): float(abs(x[i])) for i in support})
        level = max(0, math.ceil(math.log2(max(support.size, 1))))
        level = min(level, ens.f_top_level)
        name = ens.f_level_names(level)[0]
        graph = build_sign_graph(ens.blocks[name], meas.block(name), support,
                                 est, level=level)
        planted = np.sign(ens.D * x)
        for u, v, w in zip(graph.edge_u, graph.edge_v, graph.weights):
            total += int(w)
            if planted[int(u)] != planted[int(v)]:
                wrong += int(w)
    return wrong / total if total else 0.0
