"""Pure-Python/numpy backend for the hot kernels.

Implements the same array-level contract as the compiled Cython backend
(`geofair.backends._core`): regression-tree fitting/prediction and exact
KD-tree nearest-neighbor queries. Results are bit-identical to the compiled
backend; every floating-point accumulation below is sequential and ordered
exactly like the C loops (np.cumsum is a sequential scan, axis sums over
fewer than 128 lanes are sequential).

Tie-breaking contracts shared with the compiled backend:
  * tree splits: strictly-better candidate wins, candidates scanned in
    (feature index ascending, threshold ascending) order;
  * KD-tree queries: equal squared distances resolve to the smallest
    original point index.
"""

import numpy as np

BACKEND = "python"

_LEAF_SIZE = 16


# ---------------------------------------------------------------------------
# regression trees
# ---------------------------------------------------------------------------

def fit_tree(X, y, max_depth, min_samples_leaf):
    """Grow one CART regression tree on (X, y).

    X is float64 (n, f), y float64 (n,); rows are the (already resampled)
    training rows. max_depth < 0 means unbounded. Returns preorder node
    arrays (feature, threshold, left, right, value, n_samples); feature == -1
    marks a leaf.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, n_feat = X.shape

    feature, threshold, left, right, value, n_samples = [], [], [], [], [], []

    # stack of (sample index array, depth, parent node, is_left_child);
    # pushing right before left yields preorder node ids
    stack = [(np.arange(n, dtype=np.intp), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        n_samples.append(idx.size)
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node

        ys = y[idx]
        n_node = idx.size
        y_lo = ys.min()
        y_hi = ys.max()
        if y_lo == y_hi:
            # constant node: store the exact common value, never a recomputed mean
            value[node] = float(y_lo)
            continue
        node_total = float(np.cumsum(ys)[-1])
        value[node] = node_total / n_node
        if (0 <= max_depth <= depth) or n_node < 2 * min_samples_leaf:
            continue

        best_score = node_total * node_total / float(n_node)
        best_feat = -1
        best_thr = 0.0
        pos = np.arange(1, n_node)
        for j in range(n_feat):
            vals = X[idx, j]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            sy = ys[order]
            csum = np.cumsum(sy)
            total = csum[-1]
            ok = sv[1:] != sv[:-1]
            if min_samples_leaf > 1:
                ok &= pos >= min_samples_leaf
                ok &= (n_node - pos) >= min_samples_leaf
            if not ok.any():
                continue
            ls = csum[:-1][ok]
            nl = pos[ok].astype(np.float64)
            nr = n_node - nl
            rs = total - ls
            score = ls * ls / nl + rs * rs / nr
            k = int(np.argmax(score))
            if score[k] > best_score:
                best_score = float(score[k])
                best_feat = j
                p = int(pos[ok][k])
                thr = (sv[p - 1] + sv[p]) / 2.0
                if thr >= sv[p]:
                    thr = sv[p - 1]
                best_thr = float(thr)

        if best_feat < 0:
            continue
        feature[node] = best_feat
        threshold[node] = best_thr
        go_left = X[idx, best_feat] <= best_thr
        stack.append((idx[~go_left], depth + 1, node, False))
        stack.append((idx[go_left], depth + 1, node, True))

    return (
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
        np.asarray(n_samples, dtype=np.int32),
    )


def predict_tree(feature, threshold, left, right, value, X):
    """Evaluate one tree on X (float64 (n, f)); returns float64 (n,)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        cur = node[rows]
        go_left = X[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] >= 0
    return value[node].astype(np.float64, copy=True)


# ---------------------------------------------------------------------------
# KD-tree exact nearest neighbor
# ---------------------------------------------------------------------------

class _KDTree:
    __slots__ = ("points", "perm", "split_dim", "split_val",
                 "left", "right", "start", "end")


def kdtree_build(points):
    """Build a bounded-leaf KD-tree over float64 (m, d) points."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    m = points.shape[0]
    perm = np.arange(m, dtype=np.int64)

    split_dim, split_val, left, right, start, end = [], [], [], [], [], []

    stack = [(0, m, -1, False)]
    while stack:
        lo, hi, parent, is_left = stack.pop()
        node = len(split_dim)
        split_dim.append(-1)
        split_val.append(0.0)
        left.append(-1)
        right.append(-1)
        start.append(lo)
        end.append(hi)
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        if hi - lo <= _LEAF_SIZE:
            continue
        seg = perm[lo:hi]
        pts = points[seg]
        spread = pts.max(axis=0) - pts.min(axis=0)
        dim = int(np.argmax(spread))
        mid = (lo + hi) // 2
        order = np.argpartition(pts[:, dim], mid - lo)
        perm[lo:hi] = seg[order]
        split_dim[node] = dim
        split_val[node] = float(points[perm[mid], dim])
        stack.append((mid, hi, node, False))
        stack.append((lo, mid, node, True))

    tree = _KDTree()
    tree.points = points
    tree.perm = perm
    tree.split_dim = np.asarray(split_dim, dtype=np.int32)
    tree.split_val = np.asarray(split_val, dtype=np.float64)
    tree.left = np.asarray(left, dtype=np.int32)
    tree.right = np.asarray(right, dtype=np.int32)
    tree.start = np.asarray(start, dtype=np.int32)
    tree.end = np.asarray(end, dtype=np.int32)
    return tree


def kdtree_query(tree, queries):
    """Exact nearest neighbor for each query row.

    Returns (indices int64 (q,), squared distances float64 (q,)). Ties on
    squared distance resolve to the smallest point index.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    nq = queries.shape[0]
    out_idx = np.empty(nq, dtype=np.int64)
    out_d2 = np.empty(nq, dtype=np.float64)

    points = tree.points
    perm = tree.perm
    split_dim = tree.split_dim
    split_val = tree.split_val
    left = tree.left
    right = tree.right
    start = tree.start
    end = tree.end

    for qi in range(nq):
        q = queries[qi]
        best_d2 = np.inf
        best_idx = -1

        def visit(node):
            nonlocal best_d2, best_idx
            dim = split_dim[node]
            if dim < 0:
                seg = perm[start[node]:end[node]]
                diff = points[seg] - q
                d2 = (diff * diff).sum(axis=1)
                k = int(np.argmin(d2))
                dm = float(d2[k])
                if dm <= best_d2:
                    cand = int(seg[d2 == dm].min())
                    if dm < best_d2 or cand < best_idx:
                        best_d2 = dm
                        best_idx = cand
                return
            sv = split_val[node]
            gap = q[dim] - sv
            if gap <= 0.0:
                near, far = left[node], right[node]
            else:
                near, far = right[node], left[node]
            visit(near)
            if gap * gap <= best_d2:
                visit(far)

        visit(0)
        out_idx[qi] = best_idx
        out_d2[qi] = best_d2
    return out_idx, out_d2
