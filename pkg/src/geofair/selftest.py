"""Built-in oracle suite: re-derives key results by brute force on embedded
fixtures and compares them with the production code paths.

Three checks, one per numerically delicate subsystem:
  * OLS against explicit normal equations solved by hand-rolled Gaussian
    elimination (no linear-algebra library involved);
  * KD-tree matching against an O(n*m) full scan, including injected
    duplicate points so the smallest-id tie-break is exercised;
  * Mann-Whitney U against a direct count of pairwise wins plus half-ties.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, VillageRecord
from .matching import build_match_space, match
from .models import FeatureRecipe, fit_ols
from .stats import mann_whitney_u


def _gaussian_solve(A, b):
    """Solve A x = b by partial-pivot Gaussian elimination (pure Python)."""
    n = len(b)
    M = [list(map(float, row)) + [float(b[i])] for i, row in enumerate(A)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if abs(M[piv][col]) == 0.0:
            raise ZeroDivisionError("singular system")
        M[col], M[piv] = M[piv], M[col]
        for r in range(col + 1, n):
            f = M[r][col] / M[col][col]
            for c in range(col, n + 1):
                M[r][c] -= f * M[col][c]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = M[r][n] - sum(M[r][c] * x[c] for c in range(r + 1, n))
        x[r] = s / M[r][r]
    return x


def _fixture_dataset(rng, n, prefix="F", states=("A", "B")):
    records = []
    for i in range(n):
        records.append(VillageRecord(
            village_id=f"{prefix}{i:05d}",
            state_id=states[i % len(states)],
            lat=float(rng.uniform(8, 32)),
            lon=float(rng.uniform(70, 90)),
            ntl=float(rng.uniform(0, 40)),
            population=int(rng.integers(50, 5000)),
            poverty_rate=float(rng.uniform(0, 1)),
            electricity=int(rng.integers(0, 2)),
            share_sc=float(rng.uniform(0, 1)),
            share_st=float(rng.uniform(0, 1)),
        ))
    return Dataset(records, provenance="selftest fixture")


def _check_ols() -> tuple:
    rng = np.random.default_rng(20110331)
    ds = _fixture_dataset(rng, 200)
    recipe = FeatureRecipe(use_ntl=True, use_coords=True)
    model = fit_ols(ds, recipe, "poverty_rate")
    X = np.column_stack([np.ones(len(ds)),
                         recipe.matrix(ds, log_ntl=True)])
    y = ds.column("poverty_rate")
    ref = _gaussian_solve((X.T @ X).tolist(), (X.T @ y).tolist())
    err = max(abs(a - b) for a, b in zip(model.payload.coefficients, ref))
    return err < 1e-8, f"max coefficient deviation {err:.3e}"


def _clone(rec, new_id):
    return VillageRecord(village_id=new_id, state_id=rec.state_id, lat=rec.lat,
                         lon=rec.lon, ntl=rec.ntl, population=rec.population,
                         poverty_rate=rec.poverty_rate,
                         electricity=rec.electricity,
                         share_sc=rec.share_sc, share_st=rec.share_st)


def _check_matching() -> tuple:
    rng = np.random.default_rng(19830215)
    base = _fixture_dataset(rng, 300, prefix="C")
    # duplicate rows inside the control pool, then copy them into the treated
    # set: several controls end up exactly equidistant (distance 0), which
    # exercises the smallest-id tie-break
    control = Dataset(list(base.records)
                      + [_clone(r, f"A{j:05d}") for j, r in enumerate(base.records[:30])])
    treated = _fixture_dataset(rng, 150, prefix="T")
    dup = [_clone(r, f"D{j:05d}") for j, r in enumerate(base.records[:20])]
    treated = Dataset(list(treated.records) + dup, provenance="selftest")

    pooled = Dataset(list(treated.records) + list(control.records))
    space = build_match_space(pooled)
    pairs = match(treated, control, space)

    # brute-force scan oracle with the same standardization and tie-break
    feats = ("lat", "lon", "poverty_rate", "electricity", "population")
    t_m = np.column_stack([treated.column(f) for f in feats])
    c_m = np.column_stack([control.column(f) for f in feats])
    t_z = (t_m - space.mean) / space.std
    c_z = (c_m - space.mean) / space.std
    ids = control.village_ids()
    n_bad = 0
    for i in range(len(treated)):
        d2 = ((c_z - t_z[i]) ** 2).sum(axis=1)
        dmin = d2.min()
        best = min(ids[j] for j in np.nonzero(d2 == dmin)[0])
        if pairs.control_ids[i] != best or abs(pairs.distances[i] - np.sqrt(dmin)) > 1e-12:
            n_bad += 1
    return n_bad == 0, f"{n_bad} of {len(treated)} pairs disagree with the scan"


def _check_mann_whitney() -> tuple:
    rng = np.random.default_rng(7321)
    n_bad = 0
    for _ in range(25):
        a = np.round(rng.normal(size=rng.integers(3, 40)), 1)  # rounding => ties
        b = np.round(rng.normal(size=rng.integers(3, 40)), 1)
        u = mann_whitney_u(a, b).statistic
        wins = sum((x > y) + 0.5 * (x == y) for x in a for y in b)
        if abs(u - wins) > 1e-9:
            n_bad += 1
    return n_bad == 0, f"{n_bad} of 25 samples disagree with the pairwise count"


def run_selftest() -> list:
    """Run all oracle checks; returns [(name, passed, detail), ...]."""
    checks = (
        ("ols-normal-equations", _check_ols),
        ("nearest-neighbor-scan", _check_matching),
        ("u-pairwise-count", _check_mann_whitney),
    )
    results = []
    for name, fn in checks:
        ok, detail = fn()
        results.append((name, ok, detail))
    return results
