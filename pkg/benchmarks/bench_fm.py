"""Timing comparison of the compiled and pure-Python FM kernels.

Builds a synthetic sparse one-hot dataset, then times predict_batch and
sgd_epoch on both backends and reports the speedup.

    python3 benchmarks/bench_fm.py [--subjects N] [--games N] [--k K]
                                   [--repeats R]
"""

import argparse
import time

import numpy as np

from psychfm import _fm_py

try:
    from psychfm import _fm_cy
except ImportError:
    _fm_cy = None


def build_dataset(n_subjects, n_games, k, seed):
    rng = np.random.default_rng(seed)
    n = n_subjects + n_games
    m = n_subjects * n_games
    indices = np.empty(2 * m, dtype=np.int64)
    indptr = np.arange(0, 2 * m + 1, 2, dtype=np.int64)
    row = 0
    for s in range(n_subjects):
        for g in range(n_games):
            indices[2 * row] = s
            indices[2 * row + 1] = n_subjects + g
            row += 1
    y = rng.uniform(size=m)
    w0 = 0.0
    w = 0.01 * rng.normal(size=n)
    V = 0.01 * rng.normal(size=(n, k))
    order = rng.permutation(m).astype(np.int64)
    return w0, w, V, indices, indptr, y, order


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(mod, data, repeats):
    w0, w, V, indices, indptr, y, order = data
    m = len(y)
    out = np.empty(m)

    predict = time_call(
        lambda: mod.predict_batch(w0, w, V, indices, indptr, out), repeats)

    def one_epoch():
        mod.sgd_epoch(w0, w.copy(), V.copy(), indices, indptr, y, order,
                      0.01, 1e-3, 1e-3)

    sgd = time_call(one_epoch, repeats)
    return predict, sgd


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n", 1)[0])
    ap.add_argument("--subjects", type=int, default=240)
    ap.add_argument("--games", type=int, default=210)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = build_dataset(args.subjects, args.games, args.k, args.seed)
    m = args.subjects * args.games
    print(f"dataset: {m} rows, {args.subjects + args.games} features, "
          f"k={args.k}, best of {args.repeats} runs")

    results = {"python": bench_backend(_fm_py, data, args.repeats)}
    if _fm_cy is not None:
        results["cython"] = bench_backend(_fm_cy, data, args.repeats)
    else:
        print("compiled backend not built; timing pure Python only")

    header = f"{'backend':<8} {'predict_batch':>14} {'sgd_epoch':>12}"
    print(header)
    for name, (predict, sgd) in results.items():
        print(f"{name:<8} {predict * 1e3:>12.2f}ms {sgd * 1e3:>10.2f}ms")
    if "cython" in results:
        pp, sp = results["python"]
        pc, sc = results["cython"]
        print(f"speedup  {pp / pc:>13.1f}x {sp / sc:>11.1f}x")


if __name__ == "__main__":
    main()
