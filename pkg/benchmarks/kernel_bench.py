#!/usr/bin/env python3
"""Compare the compiled kernel extension against the pure-numpy fallback.

Times the three hot kernels (Bernoulli pattern sampling, signed sparse
apply, column counting sort) on ensemble-shaped workloads, plus one full
build+sense+decode trial under each backend. Both backends produce
identical output, so the numbers are directly comparable.

Usage: python benchmarks/kernel_bench.py [--n 4096] [--k 10] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from phaseless import _backend, _kernels_py
from phaseless.bench import TrialSpec, _ensemble_seed, gen_signal
from phaseless.decoder import decode
from phaseless.ensemble import apply_phaseless, build_ensemble


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(impls, n, k, repeat):
    e_rows, p_e = 16 * k, 1.0 / k
    f_rows, p_f = 30 * k, 1.0 / (64 * k / 10)
    rows = []
    for label, impl in impls:
        indptr, cols, signs = impl.sample_bernoulli(7, e_rows * 8, n, p_e)
        nnz = cols.size
        v = np.random.default_rng(0).standard_normal(n)
        t_sample = best_of(lambda: impl.sample_bernoulli(7, e_rows * 8, n, p_e),
                           repeat)
        t_apply = best_of(lambda: impl.apply_signed(indptr, cols, signs, v),
                          repeat)
        t_sort = best_of(lambda: impl.sort_by_col(indptr, cols, signs, n),
                         repeat)
        rows.append((label, nnz, t_sample, t_apply, t_sort))
    return rows


def bench_trial(n, k, repeat):
    """One build + sense + decode at default config, per backend."""
    import phaseless._backend as backend_mod
    from phaseless import ensemble as ens_mod
    from phaseless import sparse as sparse_mod

    spec = TrialSpec(n=n, k=k, signal_model="exact-sparse", trials=1, seed=1)
    x = gen_signal(spec, 0)
    results = []
    originals = (backend_mod.sample_bernoulli, backend_mod.apply_signed,
                 backend_mod.sort_by_col)
    for label, impl in [("compiled", backend_mod.kernels),
                        ("numpy", _kernels_py)]:
        if label == "compiled" and backend_mod.BACKEND != "compiled":
            continue
        sparse_mod.sample_bernoulli = impl.sample_bernoulli
        sparse_mod.apply_signed = impl.apply_signed
        sparse_mod.sort_by_col = impl.sort_by_col

        def one_trial():
            ens = build_ensemble(n, k, rng_seed=_ensemble_seed(1, 0))
            decode(ens, apply_phaseless(ens, x))

        results.append((label, best_of(one_trial, repeat)))
    (sparse_mod.sample_bernoulli, sparse_mod.apply_signed,
     sparse_mod.sort_by_col) = originals
    return results


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--n", type=int, default=4096)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    impls = []
    if _backend.BACKEND == "compiled":
        from phaseless import _kernels
        impls.append(("compiled", _kernels))
    else:
        print("compiled extension not built; showing fallback only")
    impls.append(("numpy", _kernels_py))

    print(f"kernel benchmark  n={args.n} k={args.k} (best of {args.repeat})")
    print(f"{'backend':<10} {'nnz':>9} {'sample':>10} {'apply':>10} {'sort':>10}")
    rows = bench_kernels(impls, args.n, args.k, args.repeat)
    for label, nnz, ts, ta, tso in rows:
        print(f"{label:<10} {nnz:>9} {ts*1e3:>8.1f}ms {ta*1e3:>8.1f}ms "
              f"{tso*1e3:>8.1f}ms")
    if len(rows) == 2:
        _, _, s0, a0, o0 = rows[0]
        _, _, s1, a1, o1 = rows[1]
        print(f"{'speedup':<10} {'':>9} {s1/s0:>9.1f}x {a1/a0:>9.1f}x "
              f"{o1/o0:>9.1f}x")

    print("\nfull trial (build + sense + decode, default config)")
    for label, t in bench_trial(args.n, args.k, args.repeat):
        print(f"{label:<10} {t*1e3:>8.1f} ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
