"""Timing and parity harness for the hot kernels.

Runs every kernel on dataset-scale workloads under both backends (vectorized
numpy fallback vs numba jit), asserts bit-identical outputs, and prints a
per-kernel timing table. Run without RULEDFS_NUMBA set: forcing the numpy
backend skips jit compilation entirely and leaves nothing to compare.

    python3 benchmarks/bench_kernels.py [--repeats N] [--inner N]
"""

import argparse
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from conftest import load_named
from ruledfs import _kernels
from ruledfs.cart import CartConfig, fit_ensemble
from ruledfs.data import (
    EmpiricalConditional,
    PartialObservation,
    fit_discretization,
    stratified_split,
)
from ruledfs.rules import pack


def workloads():
    """One positional-args tuple per kernel, sized like the shipped datasets."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        wine = load_named("wine")
        yeast = load_named("yeast")

    tr_idx, _ = stratified_split(wine, 0.2, seed=0)
    wine_train = wine.subset(tr_idx)
    ensemble = fit_ensemble(wine_train, CartConfig(seed=0, min_samples_leaf=2))
    p = pack(ensemble.primary)

    rng = np.random.default_rng(0)
    half = PartialObservation.empty(wine.n_features)
    for f in rng.permutation(wine.n_features)[: wine.n_features // 2]:
        half = half.with_feature(int(f), float(wine_train.samples[0, f]))

    stacked = ensemble._stacked()
    filled = np.where(half.observed, half.values, ensemble.imputation)

    y_tr, _ = stratified_split(yeast, 0.2, seed=0)
    yeast_train = yeast.subset(y_tr)
    scheme = fit_discretization(yeast_train, bins=5)
    ec = EmpiricalConditional.fit(yeast_train, scheme, alpha=1.0)
    obs_cols = np.array([0, 2, 5], np.int64)
    obs_vals = ec.train_bins[0, obs_cols].copy()

    yx = np.ascontiguousarray(yeast_train.samples, np.float64)
    yy = np.ascontiguousarray(yeast_train.labels)

    return {
        "truth_degrees": (
            half.values, half.observed,
            p.ptr, p.feat, p.kind, p.p0, p.p1, p.p2, p.p3,
        ),
        "truth_degrees_matrix": (
            np.ascontiguousarray(wine.samples, np.float64),
            p.ptr, p.feat, p.kind, p.p0, p.p1, p.p2, p.p3,
        ),
        "ensemble_winner_idx": (
            filled, np.ones(filled.shape[0], bool),
            stacked["model_ptr"], stacked["ptr"], stacked["feat"],
            stacked["kind"], stacked["p0"], stacked["p1"],
            stacked["p2"], stacked["p3"],
        ),
        "match_tally": (ec.train_bins, obs_cols, obs_vals, 7, 5),
        "best_split": (yx, yy, yeast.n_classes, 2),
    }


def results_equal(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(results_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return isinstance(b, np.ndarray) and a.dtype == b.dtype and np.array_equal(a, b)
    if isinstance(a, float) and math.isnan(a):
        return isinstance(b, float) and math.isnan(b)
    return float(a) == float(b)


def time_call(fn, args, repeats, inner):
    # best-of-repeats median is noisy in CI; best total/inner is stable
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7, help="timing rounds per kernel")
    ap.add_argument("--inner", type=int, default=50, help="calls per timing round")
    args = ap.parse_args(argv)

    if _kernels.JIT_IMPL is None:
        reason = "numba not importable" if not _kernels.HAS_NUMBA else "RULEDFS_NUMBA=0"
        print(f"jit backend unavailable ({reason}); nothing to compare", file=sys.stderr)
        return 1

    loads = workloads()
    rows = []
    for name, call_args in loads.items():
        np_fn = _kernels.NUMPY_IMPL[name]
        jit_fn = _kernels.JIT_IMPL[name]
        np_out = np_fn(*call_args)
        jit_out = jit_fn(*call_args)  # first call compiles
        if not results_equal(np_out, jit_out):
            print(f"PARITY FAILURE: {name} outputs differ between backends",
                  file=sys.stderr)
            return 1
        t_np = time_call(np_fn, call_args, args.repeats, args.inner)
        t_jit = time_call(jit_fn, call_args, args.repeats, args.inner)
        rows.append((name, t_np, t_jit))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>12}  {'numba':>12}  {'speedup':>8}")
    for name, t_np, t_jit in rows:
        print(
            f"{name:<{width}}  {t_np * 1e6:>10.1f}us  {t_jit * 1e6:>10.1f}us"
            f"  {t_np / t_jit:>7.1f}x"
        )
    print("\nall kernels bit-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
