"""Random-forest regression on top of the tree kernels.

Trees are CART regression trees: axis-aligned threshold splits chosen to
minimize within-node squared error, split candidates at midpoints between
consecutive distinct sorted feature values, all enabled features considered
at every split. Each tree trains on a bootstrap resample (same size as the
training set, with replacement) drawn from its own deterministic RNG
substream (seed, tree index), so fitting is reproducible and trivially
parallelizable across trees. bootstrap=False is a test hook that trains
every tree on the full sample.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backends


@dataclass(frozen=True)
class TreeArrays:
    """Flat preorder representation of one fitted tree."""
    feature: np.ndarray    # int32, -1 marks a leaf
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32
    right: np.ndarray      # int32
    value: np.ndarray      # float64 leaf/internal means
    n_samples: np.ndarray  # int32


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 50
    max_depth: Optional[int] = 8  # None = unbounded
    min_samples_leaf: int = 25

    def validate(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be None or >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


def _tree_seed_stream(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(tree_index,))))


def fit_forest(X, y, params: ForestParams, seed: int,
               bootstrap: bool = True, n_jobs: int = 1) -> tuple:
    """Fit params.n_estimators trees on float64 X (n, f), y (n,).

    n_jobs > 1 fits trees on a thread pool; because every tree's resample
    comes from its own substream and results are collected in tree order,
    parallel and serial runs produce identical forests. (Threads only pay
    off with the compiled backend, which releases the GIL.)
    """
    params.validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = X.shape[0]
    depth = -1 if params.max_depth is None else int(params.max_depth)

    def one_tree(t: int) -> TreeArrays:
        if bootstrap:
            idx = _tree_seed_stream(seed, t).integers(0, n, size=n)
            Xb, yb = X[idx], y[idx]
        else:
            Xb, yb = X, y
        return TreeArrays(*backends.fit_tree(Xb, yb, depth,
                                             params.min_samples_leaf))

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return tuple(pool.map(one_tree, range(params.n_estimators)))
    return tuple(one_tree(t) for t in range(params.n_estimators))


def predict_forest(trees, X) -> np.ndarray:
    """Mean of the per-tree predictions, accumulated in tree order."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for tree in trees:
        acc += backends.predict_tree(tree.feature, tree.threshold, tree.left,
                                     tree.right, tree.value, X)
    return acc / len(trees)
