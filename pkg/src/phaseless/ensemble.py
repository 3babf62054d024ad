"""Construction and application of the randomized phaseless sensing ensemble.

The ensemble stacks four families of sparse +/-1 blocks over a common sign
flip D applied to the signal:

  A   heavy-hitter identification structure (see sketch.py): per repetition,
      hash buckets split by the bits of the coordinate index, so a bucket's
      dominant coordinate can be read off by comparing magnitudes.
  B   bucket/sign hashing used for per-coordinate magnitude estimates.
  E   a ladder of i.i.d. Bernoulli(1/k) sign blocks used to estimate the
      energy of everything outside the candidate set.
  F   a ladder of levels, one per candidate-set scale 2^l, dense enough to
      sample coordinate pairs but sparse enough to keep per-row interference
      low; used for relative-sign tests.

Sensing computes y = |Phi x| block by block; nothing downstream ever sees a
sign or phase. All randomness is drawn from counter-based streams keyed off
one master seed, so a (n, k, config, seed) tuple reproduces the ensemble
exactly, block by block.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .sparse import SparseSignMatrix

__all__ = [
    "EnsembleConfig",
    "SensingEnsemble",
    "Measurements",
    "EnsembleError",
    "build_ensemble",
    "apply_phaseless",
    "row_count",
    "planned_row_counts",
]


class EnsembleError(ValueError):
    """Invalid dimensions or configuration for ensemble construction."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleConfig:
    """Constants of the construction.

    ``None`` fields are resolved from (n, k) at build time; ``resolve``
    returns a config with every field concrete. Defaults were calibrated
    on the acceptance experiments (the guarantees only pin these constants
    up to "large enough").

    C0      density constant of the F levels (level density
            1 / (C0 * 2^l * (log2(5k) - l + 2)^2)).
    C1      rows per E sub-block, in units of k.
    c1      scale applied to the mean squared disjoint-row measurement when
            forming the tail-energy estimate.
    c_F     row-count constant of the F levels; default 12 * C0^2 keeps the
            pair-sampling yield per level roughly constant in C0.
    rep_log_n        number of E sub-blocks (and of tail-estimate medians).
    countsketch_rows buckets per magnitude-estimation repetition.
    countsketch_reps magnitude-estimation repetitions (median over these).
    heavy_K          heaviness parameter of the identification block
                     (default 10k).
    top_select       candidate cap after magnitude estimation (default 2k;
                     any value in [k, 5k] is supported, smaller keeps the
                     tail-estimate rows cheaper).
    hh_bucket_factor buckets per unit of heavy_K in the identification block.
    hh_reps          identification repetitions.
    f_inner_reps     copies of each small F level (2^l <= sqrt(k)), majority
                     voted by the amplified decoder; 1 = plain pipeline.
    seed    master RNG seed; every block derives its own stream from it.
    """

    C0: float = 0.125
    C1: float = 16.0
    c1: float = 0.7
    c_F: float | None = None
    rep_log_n: int | None = None
    countsketch_rows: int | None = None
    countsketch_reps: int = 5
    heavy_K: int | None = None
    top_select: int | None = None
    hh_bucket_factor: float = 1.5
    hh_reps: int | None = None
    f_inner_reps: int = 1
    seed: int = 0

    def resolve(self, n: int, k: int) -> "EnsembleConfig":
        log2n = max(1, math.ceil(math.log2(max(n, 2))))
        updates = {}
        if self.c_F is None:
            updates["c_F"] = 12.0 * self.C0 * self.C0
        if self.rep_log_n is None:
            r = max(3, log2n // 2)
            updates["rep_log_n"] = r + 1 - r % 2  # odd, for a clean median
        if self.countsketch_rows is None:
            updates["countsketch_rows"] = 2 ** math.ceil(math.log2(max(100 * k, 2)))
        if self.heavy_K is None:
            updates["heavy_K"] = 10 * k
        if self.top_select is None:
            updates["top_select"] = 2 * k
        if self.hh_reps is None:
            updates["hh_reps"] = max(3, math.ceil(log2n / 2))
        resolved = replace(self, **updates) if updates else self
        resolved._validate(n, k)
        return resolved

    def _validate(self, n: int, k: int) -> None:
        counts = {
            "rep_log_n": self.rep_log_n,
            "countsketch_rows": self.countsketch_rows,
            "countsketch_reps": self.countsketch_reps,
            "heavy_K": self.heavy_K,
            "top_select": self.top_select,
            "hh_reps": self.hh_reps,
            "f_inner_reps": self.f_inner_reps,
        }
        for name, value in counts.items():
            if value is None or value < 1:
                raise EnsembleError(f"{name} must be >= 1, got {value}")
        for name in ("C0", "C1", "c1", "c_F", "hh_bucket_factor"):
            value = getattr(self, name)
            if value is None or value <= 0:
                raise EnsembleError(f"{name} must be > 0, got {value}")
        if self.heavy_K < k:
            raise EnsembleError(f"heavy_K={self.heavy_K} < k={k}")
        if self.top_select < k:
            raise EnsembleError(f"top_select={self.top_select} < k={k}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnsembleConfig":
        data = json.loads(text)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise EnsembleError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# ---------------------------------------------------------------------------
# structural helpers shared by builder and row-count planner
# ---------------------------------------------------------------------------

def _f_top_level(k: int) -> int:
    return math.ceil(math.log2(5 * k))

def _f_log_term(k: int, level: int) -> float:
    return math.log2(5 * k) - level + 2

def _f_density(k: int, level: int, C0: float) -> float:
    return 1.0 / (C0 * (2 ** level) * _f_log_term(k, level) ** 2)

def _f_rows(k: int, level: int, c_F: float) -> int:
    return math.ceil(c_F * max(level, 1) * (2 ** level) * _f_log_term(k, level) ** 4)

def _f_copies(k: int, level: int, f_inner_reps: int) -> int:
    """Small levels (2^l <= smallest power of two above sqrt(k)) carry the
    inner replication used by the amplified sign vote."""
    if f_inner_reps <= 1 or level < 1:
        return 1
    top = 2 ** (math.floor(math.log2(math.sqrt(k))) + 1) if k > 1 else 2
    return f_inner_reps if (2 ** level) <= top else 1

def _hh_geometry(n: int, cfg: EnsembleConfig) -> tuple[int, int, int]:
    """(buckets, bits, reps) of the identification block."""
    buckets = max(2, math.ceil(cfg.hh_bucket_factor * cfg.heavy_K))
    bits = max(1, math.ceil(math.log2(max(n, 2))))
    return buckets, bits, cfg.hh_reps


def planned_row_counts(n: int, k: int, config: EnsembleConfig | None = None) -> dict[str, int]:
    """Exact per-family row counts of the ensemble, without building it."""
    cfg = (config or EnsembleConfig()).resolve(n, k)
    buckets, bits, reps = _hh_geometry(n, cfg)
    counts = {
        "A": buckets * (2 * bits + 1) * reps,
        "B": cfg.countsketch_rows * cfg.countsketch_reps,
        "E": cfg.rep_log_n * math.ceil(cfg.C1 * k),
        "F": sum(_f_rows(k, l, cfg.c_F) * _f_copies(k, l, cfg.f_inner_reps)
                 for l in range(_f_top_level(k) + 1)),
    }
    counts["total"] = sum(counts.values())
    return counts


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------

@dataclass
class SensingEnsemble:
    n: int
    k: int
    seed: int
    config: EnsembleConfig          # fully resolved
    D: np.ndarray                   # int8[n], +/-1 signs folded into sensing
    blocks: dict[str, SparseSignMatrix]
    offsets: dict[str, int]
    total_rows: int

    def block_slice(self, name: str) -> slice:
        start = self.offsets[name]
        return slice(start, start + self.blocks[name].n_rows)

    @property
    def e_block_names(self) -> list[str]:
        return [f"E{l}" for l in range(self.config.rep_log_n)]

    def f_level_names(self, level: int) -> list[str]:
        width = 2 ** level
        copies = _f_copies(self.k, level, self.config.f_inner_reps)
        return [f"F{width}" if c == 0 else f"F{width}.{c}" for c in range(copies)]

    @property
    def f_top_level(self) -> int:
        return _f_top_level(self.k)

    def hh_geometry(self) -> tuple[int, int, int]:
        return _hh_geometry(self.n, self.config)

    def apply_phaseless(self, x: np.ndarray) -> "Measurements":
        return apply_phaseless(self, x)

    # -- serialization: versioned npz container ---------------------------

    FORMAT = "phaseless-ensemble"
    VERSION = 1

    def save(self, path) -> None:
        header = {
            "format": self.FORMAT,
            "version": self.VERSION,
            "n": self.n,
            "k": self.k,
            "seed": self.seed,
            "config": asdict(self.config),
            "block_order": list(self.blocks),
        }
        arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                  "D": self.D}
        for name, blk in self.blocks.items():
            arrays[f"{name}::indptr"] = blk.indptr
            arrays[f"{name}::cols"] = blk.cols
            arrays[f"{name}::signs"] = blk.signs
        with open(path, "wb") as fh:
            np.savez_compressed(fh, **arrays)

    @classmethod
    def load(cls, path) -> "SensingEnsemble":
        with np.load(path) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("format") != cls.FORMAT:
                raise EnsembleError(f"not an ensemble container: {header.get('format')}")
            if header.get("version") != cls.VERSION:
                raise EnsembleError(f"unsupported container version {header.get('version')}")
            n = header["n"]
            blocks, offsets, total = {}, {}, 0
            for name in header["block_order"]:
                blk = SparseSignMatrix(
                    n_rows=int(data[f"{name}::indptr"].shape[0] - 1),
                    n_cols=n,
                    indptr=data[f"{name}::indptr"],
                    cols=data[f"{name}::cols"],
                    signs=data[f"{name}::signs"],
                )
                blocks[name] = blk
                offsets[name] = total
                total += blk.n_rows
            return cls(n=n, k=header["k"], seed=header["seed"],
                       config=EnsembleConfig(**header["config"]),
                       D=data["D"], blocks=blocks, offsets=offsets,
                       total_rows=total)


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------

@dataclass
class Measurements:
    """y = |Phi x|, plus the block partition needed to address it."""

    y: np.ndarray
    offsets: dict[str, int]
    block_rows: dict[str, int]

    def block(self, name: str) -> np.ndarray:
        start = self.offsets[name]
        return self.y[start:start + self.block_rows[name]]

    def global_index(self, name: str, local_row: int) -> int:
        if not 0 <= local_row < self.block_rows[name]:
            raise IndexError(f"row {local_row} outside block {name}")
        return self.offsets[name] + local_row

    FORMAT = "phaseless-measurements"
    VERSION = 1

    def save(self, path) -> None:
        header = {"format": self.FORMAT, "version": self.VERSION,
                  "offsets": self.offsets, "block_rows": self.block_rows}
        with open(path, "wb") as fh:
            np.savez_compressed(
                fh, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                y=self.y.astype(np.float64))

    @classmethod
    def load(cls, path) -> "Measurements":
        with np.load(path) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("format") != cls.FORMAT:
                raise EnsembleError(f"not a measurements container: {header.get('format')}")
            return cls(y=data["y"], offsets=header["offsets"],
                       block_rows=header["block_rows"])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _block_keys(seed: int, names: list[str]) -> dict[str, int]:
    words = np.random.SeedSequence(seed).generate_state(len(names) + 1, dtype=np.uint64)
    # words[0] reserved for D
    return {name: int(words[i + 1]) for i, name in enumerate(names)}


def build_ensemble(n: int, k: int, config: EnsembleConfig | None = None,
                   rng_seed: int | None = None) -> SensingEnsemble:
    """Construct the full sensing ensemble for an n-dimensional, k-sparse
    target. Requires k <= n/20 so the heavy-hitter and candidate-cap
    machinery has room to operate."""
    if n < 1 or k < 1:
        raise EnsembleError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if k > n / 20:
        raise EnsembleError(f"k={k} too large for n={n} (need k <= n/20)")
    cfg = (config or EnsembleConfig()).resolve(n, k)
    seed = int(cfg.seed if rng_seed is None else rng_seed)
    if rng_seed is not None:
        cfg = replace(cfg, seed=seed)

    from .sketch import build_countsketch_block, build_hh_block

    names: list[str] = ["A", "B"]
    names += [f"E{l}" for l in range(cfg.rep_log_n)]
    f_specs: list[tuple[str, int]] = []
    for level in range(_f_top_level(k) + 1):
        width = 2 ** level
        for c in range(_f_copies(k, level, cfg.f_inner_reps)):
            name = f"F{width}" if c == 0 else f"F{width}.{c}"
            names.append(name)
            f_specs.append((name, level))
    keys = _block_keys(seed, names)

    d_key = int(np.random.SeedSequence(seed).generate_state(1, dtype=np.uint64)[0])
    from ._kernels_py import splitmix64
    D = ((splitmix64(d_key, 0, n) & np.uint64(1)).astype(np.int8) * 2 - 1)

    buckets, bits, reps = _hh_geometry(n, cfg)
    blocks: dict[str, SparseSignMatrix] = {}
    blocks["A"] = build_hh_block(keys["A"], n, buckets, bits, reps)
    blocks["B"] = build_countsketch_block(keys["B"], n, cfg.countsketch_rows,
                                          cfg.countsketch_reps)
    e_rows = math.ceil(cfg.C1 * k)
    for l in range(cfg.rep_log_n):
        blocks[f"E{l}"] = SparseSignMatrix.bernoulli(keys[f"E{l}"], e_rows, n, 1.0 / k)
    for name, level in f_specs:
        p = _f_density(k, level, cfg.C0)
        if not p < 1.0:
            raise EnsembleError(f"F level {level} density {p} >= 1; increase C0")
        blocks[name] = SparseSignMatrix.bernoulli(keys[name], _f_rows(k, level, cfg.c_F),
                                                  n, p)

    offsets, total = {}, 0
    for name in names:
        offsets[name] = total
        total += blocks[name].n_rows
    return SensingEnsemble(n=n, k=k, seed=seed, config=cfg, D=D,
                           blocks=blocks, offsets=offsets, total_rows=total)


def apply_phaseless(ensemble: SensingEnsemble, x: np.ndarray) -> Measurements:
    """Sense a signal: y = |Phi' (D x)| over every block, concatenated."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ensemble.n,):
        raise EnsembleError(f"signal shape {x.shape} != ({ensemble.n},)")
    if not np.all(np.isfinite(x)):
        raise EnsembleError("signal must be finite")
    dx = ensemble.D * x
    y = np.empty(ensemble.total_rows, dtype=np.float64)
    block_rows = {}
    for name, blk in ensemble.blocks.items():
        start = ensemble.offsets[name]
        y[start:start + blk.n_rows] = np.abs(blk.apply(dx))
        block_rows[name] = blk.n_rows
    return Measurements(y=y, offsets=dict(ensemble.offsets), block_rows=block_rows)


def row_count(ensemble: SensingEnsemble) -> dict[str, int]:
    """Measured rows per block, per family rollup, and total."""
    per_block = {name: blk.n_rows for name, blk in ensemble.blocks.items()}
    families = {"A": 0, "B": 0, "E": 0, "F": 0}
    for name, rows in per_block.items():
        families[name[0]] += rows
    out = dict(per_block)
    out.update({f"{fam}_family": rows for fam, rows in families.items()})
    out["total"] = sum(per_block.values())
    return out
