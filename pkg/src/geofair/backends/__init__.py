"""Kernel backend selection.

The hot kernels (regression-tree fitting/prediction, KD-tree nearest
neighbor) exist twice: a compiled Cython extension (`_core`) and a pure
numpy fallback (`pure`) with identical semantics. The compiled backend is
preferred when importable; set GEOFAIR_BACKEND=python or
GEOFAIR_BACKEND=compiled to force one (the latter raises if the extension
was not built).

Exposed surface:
    BACKEND                      "compiled" or "python"
    fit_tree(X, y, max_depth, min_samples_leaf)
                                 -> (feature, threshold, left, right,
                                     value, n_samples) preorder arrays
    predict_tree(feature, threshold, left, right, value, X) -> yhat
    kdtree_build(points)         -> opaque tree handle
    kdtree_query(tree, queries)  -> (point indices, squared distances),
                                    ties to the smallest point index
"""

import os

_forced = os.environ.get("GEOFAIR_BACKEND")

if _forced == "python":
    from . import pure as _impl
elif _forced == "compiled":
    from . import _core as _impl  # type: ignore[no-redef]
elif _forced is None:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import pure as _impl
else:
    raise RuntimeError(
        f"GEOFAIR_BACKEND={_forced!r} not understood (use 'compiled' or 'python')"
    )

BACKEND = _impl.BACKEND
fit_tree = _impl.fit_tree
predict_tree = _impl.predict_tree
kdtree_build = _impl.kdtree_build
kdtree_query = _impl.kdtree_query
