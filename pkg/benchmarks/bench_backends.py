#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python backend.

Times the two hot paths (CART tree fitting and KD-tree nearest-neighbor
queries) at pipeline-realistic sizes and prints a comparison table. Also
asserts that both backends produce identical outputs on every timed case.

Usage: python3 benchmarks/bench_backends.py [--quick]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from geofair.backends import pure  # noqa: E402

try:
    from geofair.backends import _core as compiled
except ImportError:
    compiled = None


def timer(fn, *args, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_tree(n, n_features, max_depth, min_leaf, rng):
    X = rng.normal(size=(n, n_features))
    y = 0.6 * X[:, 0] - 0.3 * X[:, 0] ** 2 + rng.normal(0, 0.4, n)
    rows = []
    t_py, tree_py = timer(pure.fit_tree, X, y, max_depth, min_leaf)
    rows.append(("python", t_py))
    if compiled is not None:
        t_c, tree_c = timer(compiled.fit_tree, X, y, max_depth, min_leaf)
        rows.append(("compiled", t_c))
        for a, b in zip(tree_py, tree_c):
            assert np.array_equal(a, b), "backend outputs diverged"
    return f"fit_tree n={n} f={n_features} depth={max_depth}", rows


def bench_kdtree(m, nq, d, rng):
    P = rng.normal(size=(m, d))
    Q = rng.normal(size=(nq, d))

    def run(impl):
        tree = impl.kdtree_build(P)
        return impl.kdtree_query(tree, Q)

    rows = []
    t_py, out_py = timer(run, pure)
    rows.append(("python", t_py))
    if compiled is not None:
        t_c, out_c = timer(run, compiled)
        rows.append(("compiled", t_c))
        assert np.array_equal(out_py[0], out_c[0])
        assert np.array_equal(out_py[1], out_c[1])
    return f"kdtree build+query m={m} q={nq} d={d}", rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller sizes")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    if args.quick:
        cases = [bench_tree(5_000, 3, 8, 25, rng),
                 bench_kdtree(2_000, 1_000, 5, rng)]
    else:
        cases = [bench_tree(35_000, 3, 8, 25, rng),
                 bench_tree(35_000, 3, 16, 1, rng),
                 bench_kdtree(6_000, 5_000, 5, rng),
                 bench_kdtree(50_000, 20_000, 5, rng)]

    if compiled is None:
        print("note: compiled backend not built; showing pure-Python only\n")
    width = max(len(name) for name, _ in cases) + 2
    print(f"{'case':<{width}} {'python':>10} {'compiled':>10} {'speedup':>9}")
    for name, rows in cases:
        t = dict(rows)
        py = t["python"]
        if "compiled" in t:
            print(f"{name:<{width}} {py:>9.3f}s {t['compiled']:>9.3f}s "
                  f"{py / t['compiled']:>8.1f}x")
        else:
            print(f"{name:<{width}} {py:>9.3f}s {'-':>10} {'-':>9}")


if __name__ == "__main__":
    main()
