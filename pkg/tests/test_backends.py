"""Cross-backend equivalence: the compiled kernels must reproduce the pure
numpy backend bit for bit (same split choices, same thresholds, same leaf
values, same neighbors, same squared distances)."""

import os
import subprocess
import sys

import numpy as np
import pytest

from geofair.backends import pure

_core = pytest.importorskip(
    "geofair.backends._core",
    reason="compiled backend not built (python setup.py build_ext --inplace)")

BACKENDS = {"python": pure, "compiled": _core}


def random_tree_case(rng):
    n = int(rng.integers(2, 500))
    f = int(rng.integers(1, 4))
    X = rng.normal(size=(n, f))
    if n > 12:
        X[: n // 4] = X[n // 4: 2 * (n // 4)][: n // 4]  # duplicated rows
    y = rng.normal(size=n)
    if rng.uniform() < 0.3:
        y = np.round(y)  # tied targets
    max_depth = int(rng.integers(-1, 9))
    msl = int(rng.integers(1, 6))
    return X, y, max_depth, msl


def test_tree_fit_bitwise_equal():
    rng = np.random.default_rng(100)
    for _ in range(40):
        X, y, max_depth, msl = random_tree_case(rng)
        out_py = pure.fit_tree(X, y, max_depth, msl)
        out_c = _core.fit_tree(X, y, max_depth, msl)
        for a, b in zip(out_py, out_c):
            assert np.array_equal(a, b)


def test_tree_predict_bitwise_equal():
    rng = np.random.default_rng(101)
    for _ in range(10):
        X, y, max_depth, msl = random_tree_case(rng)
        tree = _core.fit_tree(X, y, max_depth, msl)
        Xq = rng.normal(size=(64, X.shape[1]))
        p_py = pure.predict_tree(tree[0], tree[1], tree[2], tree[3], tree[4], Xq)
        p_c = _core.predict_tree(tree[0], tree[1], tree[2], tree[3], tree[4], Xq)
        assert np.array_equal(p_py, p_c)


def test_kdtree_query_bitwise_equal_with_ties():
    rng = np.random.default_rng(102)
    for _ in range(25):
        m = int(rng.integers(1, 4000))
        d = int(rng.integers(1, 6))
        P = rng.normal(size=(m, d))
        if m > 30:
            P[: m // 5] = P[m // 5: 2 * (m // 5)][: m // 5]  # duplicate points
        Q = rng.normal(size=(100, d))
        k = min(m, 30)
        Q[:k] = P[rng.integers(0, m, k)]  # exact hits
        i_py, d_py = pure.kdtree_query(pure.kdtree_build(P), Q)
        i_c, d_c = _core.kdtree_query(_core.kdtree_build(P), Q)
        assert np.array_equal(i_py, i_c)
        assert np.array_equal(d_py, d_c)


def test_kdtree_matches_scan_oracle():
    rng = np.random.default_rng(103)
    for name, impl in BACKENDS.items():
        P = rng.normal(size=(800, 5))
        P[:100] = P[100:200]
        Q = rng.normal(size=(300, 5))
        idx, d2 = impl.kdtree_query(impl.kdtree_build(P), Q)
        for qi in range(0, 300, 17):
            dd = ((P - Q[qi]) ** 2).sum(axis=1)
            best = dd.min()
            assert d2[qi] == pytest.approx(best, rel=1e-12), name
            cands = np.nonzero(dd == dd[idx[qi]])[0]
            assert idx[qi] == cands.min(), name


def test_env_var_forces_backend():
    code = "import geofair.backends as b; print(b.BACKEND)"
    src = os.path.join(os.path.dirname(__file__), "..", "src")
    for forced in ("python", "compiled"):
        env = dict(os.environ, GEOFAIR_BACKEND=forced,
                   PYTHONPATH=os.path.abspath(src))
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == forced


def test_unknown_backend_rejected():
    code = "import geofair.backends"
    src = os.path.join(os.path.dirname(__file__), "..", "src")
    env = dict(os.environ, GEOFAIR_BACKEND="fortran",
               PYTHONPATH=os.path.abspath(src))
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode != 0
