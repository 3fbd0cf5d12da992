"""Time the compiled and pure-Python kernels on the same workloads.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each row reports the best wall time over ``--repeat`` runs per backend and the
speedup of the compiled core. Outputs of both backends are checked for
equality before timing is reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from realtrees import kernels
from realtrees.data import SyntheticConfig, gen_xor_mixture
from realtrees.rashomon import make_solver


def best_time(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def workloads(quick: bool):
    n, p = (80, 8) if quick else (150, 12)
    ds = gen_xor_mixture(SyntheticConfig(n=n, p=p, phi=0.1, seed=0))
    X8 = np.ascontiguousarray(gen_xor_mixture(SyntheticConfig(n=500, p=p, seed=1)).X, dtype=np.uint8)

    def optimum(name):
        return lambda: make_solver(ds, 0.001, name).optimum(4)

    def enumerate_(name):
        def run():
            solver = make_solver(ds, 0.01, name)
            _, errors, leaves = solver.optimum(3)
            best = errors / ds.n + 0.01 * leaves
            return solver.enumerate(3, 1.05 * best, 1_000_000)
        return run

    # a committee of trees to predict with, taken from a wide enumeration
    codes, offsets, _, _ = make_solver(ds, 0.01, "python").enumerate(2, 1.0, 1_000_000)
    weights = np.full(len(offsets) - 1, 1.0 / (len(offsets) - 1))

    def predict(name):
        return lambda: kernels.backend(name).predict_codes(codes, offsets, X8)

    def votes(name):
        return lambda: kernels.backend(name).weighted_votes(codes, offsets, weights, X8, 2)

    return [
        (f"optimum depth 4 (n={n}, p={p})", optimum),
        (f"enumerate depth 3, eps 0.05 (n={n}, p={p})", enumerate_),
        (f"predict {len(weights)} trees x 500 rows", predict),
        (f"weighted votes {len(weights)} trees x 500 rows", votes),
    ]


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args(argv)
    if "cython" not in kernels.available():
        print("compiled core not built; run `python3 setup.py build_ext --inplace` first")
        return 1
    print(f"{'workload':48s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for label, make in workloads(args.quick):
        t_py, out_py = best_time(make("python"), args.repeat)
        t_cy, out_cy = best_time(make("cython"), args.repeat)
        if not same(out_py, out_cy):
            raise SystemExit(f"backends disagree on: {label}")
        print(f"{label:48s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
