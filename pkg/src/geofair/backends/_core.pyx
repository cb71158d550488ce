# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: CART regression trees and exact KD-tree NN queries.

Mirrors geofair.backends.pure bit-for-bit: identical candidate orderings,
sequential float accumulation, and the same tie-breaking contracts (splits:
first strictly-better candidate in (feature, threshold) order; NN: smallest
point index among equal squared distances).
"""

import numpy as np

cimport cython

ctypedef long long i64

BACKEND = "compiled"

cdef i64 LEAF_SIZE = 16


# ---------------------------------------------------------------------------
# dual-key quicksort: sorts (val, ord) pairs lexicographically, which matches
# numpy's stable argsort when ord is the original position
# ---------------------------------------------------------------------------

cdef inline bint _lt(double v1, i64 o1, double v2, i64 o2) noexcept nogil:
    return v1 < v2 or (v1 == v2 and o1 < o2)


cdef void _sort_pairs(double* v, i64* o, i64 lo, i64 hi) noexcept nogil:
    # sorts v[lo..hi], o[lo..hi] inclusive
    cdef i64 i, j, mid, to_, po
    cdef double tv, pv
    while hi - lo >= 24:
        mid = lo + (hi - lo) // 2
        # median-of-three pivot, ordered into position mid
        if _lt(v[mid], o[mid], v[lo], o[lo]):
            tv = v[lo]; to_ = o[lo]; v[lo] = v[mid]; o[lo] = o[mid]; v[mid] = tv; o[mid] = to_
        if _lt(v[hi], o[hi], v[lo], o[lo]):
            tv = v[lo]; to_ = o[lo]; v[lo] = v[hi]; o[lo] = o[hi]; v[hi] = tv; o[hi] = to_
        if _lt(v[hi], o[hi], v[mid], o[mid]):
            tv = v[mid]; to_ = o[mid]; v[mid] = v[hi]; o[mid] = o[hi]; v[hi] = tv; o[hi] = to_
        pv = v[mid]; po = o[mid]
        i = lo; j = hi
        while i <= j:
            while _lt(v[i], o[i], pv, po):
                i += 1
            while _lt(pv, po, v[j], o[j]):
                j -= 1
            if i <= j:
                tv = v[i]; to_ = o[i]; v[i] = v[j]; o[i] = o[j]; v[j] = tv; o[j] = to_
                i += 1; j -= 1
        # recurse into the smaller partition, iterate on the larger
        if j - lo < hi - i:
            _sort_pairs(v, o, lo, j)
            lo = i
        else:
            _sort_pairs(v, o, i, hi)
            hi = j
    # insertion sort for short runs
    for i in range(lo + 1, hi + 1):
        tv = v[i]; to_ = o[i]
        j = i - 1
        while j >= lo and _lt(tv, to_, v[j], o[j]):
            v[j + 1] = v[j]; o[j + 1] = o[j]
            j -= 1
        v[j + 1] = tv; o[j + 1] = to_


# ---------------------------------------------------------------------------
# regression trees
# ---------------------------------------------------------------------------

def fit_tree(X, y, int max_depth, i64 min_samples_leaf):
    """Grow one CART regression tree; see pure.fit_tree for the contract."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[:, ::1] Xv = X
    cdef double[::1] yv = y
    cdef i64 n = Xv.shape[0]
    cdef int n_feat = <int> Xv.shape[1]

    cdef i64 max_nodes = 2 * n + 2
    feature_a = np.empty(max_nodes, dtype=np.int32)
    threshold_a = np.empty(max_nodes, dtype=np.float64)
    left_a = np.empty(max_nodes, dtype=np.int32)
    right_a = np.empty(max_nodes, dtype=np.int32)
    value_a = np.empty(max_nodes, dtype=np.float64)
    nsamp_a = np.empty(max_nodes, dtype=np.int32)
    cdef int[::1] feature = feature_a
    cdef double[::1] threshold = threshold_a
    cdef int[::1] left = left_a
    cdef int[::1] right = right_a
    cdef double[::1] value = value_a
    cdef int[::1] nsamp = nsamp_a

    work_a = np.arange(n, dtype=np.int64)
    cdef i64[::1] work = work_a
    scratch_v_a = np.empty(n, dtype=np.float64)
    scratch_o_a = np.empty(n, dtype=np.int64)
    scratch_y_a = np.empty(n, dtype=np.float64)
    scratch_part_a = np.empty(n, dtype=np.int64)
    cdef double[::1] sv = scratch_v_a
    cdef i64[::1] so = scratch_o_a
    cdef double[::1] sy = scratch_y_a
    cdef i64[::1] part = scratch_part_a

    # explicit stack; right child pushed before left => preorder node ids
    cdef i64 cap = n + 8
    st_lo_a = np.empty(cap, dtype=np.int64)
    st_hi_a = np.empty(cap, dtype=np.int64)
    st_dep_a = np.empty(cap, dtype=np.int64)
    st_par_a = np.empty(cap, dtype=np.int64)
    st_isl_a = np.empty(cap, dtype=np.int64)
    cdef i64[::1] st_lo = st_lo_a
    cdef i64[::1] st_hi = st_hi_a
    cdef i64[::1] st_dep = st_dep_a
    cdef i64[::1] st_par = st_par_a
    cdef i64[::1] st_isl = st_isl_a

    cdef i64 top = 0, n_nodes = 0
    cdef i64 lo, hi, depth, parent, is_left, node, n_node
    cdef i64 i, k, p, nl_i, best_p
    cdef int j, best_feat
    cdef double y_lo, y_hi, yval, node_total, best_score, best_thr
    cdef double acc, total, ls, rs, nl, nr, score, thr, xval

    st_lo[0] = 0; st_hi[0] = n; st_dep[0] = 0; st_par[0] = -1; st_isl[0] = 0
    top = 1

    with nogil:
        while top > 0:
            top -= 1
            lo = st_lo[top]; hi = st_hi[top]; depth = st_dep[top]
            parent = st_par[top]; is_left = st_isl[top]
            node = n_nodes
            n_nodes += 1
            n_node = hi - lo
            feature[node] = -1
            threshold[node] = 0.0
            left[node] = -1
            right[node] = -1
            nsamp[node] = <int> n_node
            if parent >= 0:
                if is_left:
                    left[parent] = <int> node
                else:
                    right[parent] = <int> node

            y_lo = yv[work[lo]]
            y_hi = y_lo
            for i in range(lo, hi):
                yval = yv[work[i]]
                if yval < y_lo:
                    y_lo = yval
                if yval > y_hi:
                    y_hi = yval
            if y_lo == y_hi:
                value[node] = y_lo
                continue
            node_total = 0.0
            for i in range(lo, hi):
                node_total += yv[work[i]]
            value[node] = node_total / <double> n_node
            if (max_depth >= 0 and depth >= max_depth) or n_node < 2 * min_samples_leaf:
                continue

            best_score = node_total * node_total / <double> n_node
            best_feat = -1
            best_thr = 0.0
            for j in range(n_feat):
                for i in range(n_node):
                    sv[i] = Xv[work[lo + i], j]
                    so[i] = i
                _sort_pairs(&sv[0], &so[0], 0, n_node - 1)
                for i in range(n_node):
                    sy[i] = yv[work[lo + so[i]]]
                total = 0.0
                for i in range(n_node):
                    total += sy[i]
                acc = 0.0
                for i in range(1, n_node):
                    acc += sy[i - 1]
                    if sv[i] == sv[i - 1]:
                        continue
                    if i < min_samples_leaf or n_node - i < min_samples_leaf:
                        continue
                    ls = acc
                    rs = total - ls
                    nl = <double> i
                    nr = <double> (n_node - i)
                    score = ls * ls / nl + rs * rs / nr
                    if score > best_score:
                        best_score = score
                        best_feat = j
                        thr = (sv[i - 1] + sv[i]) / 2.0
                        if thr >= sv[i]:
                            thr = sv[i - 1]
                        best_thr = thr

            if best_feat < 0:
                continue
            feature[node] = best_feat
            threshold[node] = best_thr
            # stable partition of work[lo:hi] into (<= thr, > thr)
            k = 0
            for i in range(lo, hi):
                if Xv[work[i], best_feat] <= best_thr:
                    part[k] = work[i]
                    k += 1
            nl_i = k
            for i in range(lo, hi):
                if Xv[work[i], best_feat] > best_thr:
                    part[k] = work[i]
                    k += 1
            for i in range(n_node):
                work[lo + i] = part[i]

            st_lo[top] = lo + nl_i; st_hi[top] = hi; st_dep[top] = depth + 1
            st_par[top] = node; st_isl[top] = 0
            top += 1
            st_lo[top] = lo; st_hi[top] = lo + nl_i; st_dep[top] = depth + 1
            st_par[top] = node; st_isl[top] = 1
            top += 1

    return (
        feature_a[:n_nodes].copy(),
        threshold_a[:n_nodes].copy(),
        left_a[:n_nodes].copy(),
        right_a[:n_nodes].copy(),
        value_a[:n_nodes].copy(),
        nsamp_a[:n_nodes].copy(),
    )


def predict_tree(feature, threshold, left, right, value, X):
    """Evaluate one tree on X; returns float64 (n,)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] Xv = X
    cdef int[::1] feat = np.ascontiguousarray(feature, dtype=np.int32)
    cdef double[::1] thr = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef int[::1] lft = np.ascontiguousarray(left, dtype=np.int32)
    cdef int[::1] rgt = np.ascontiguousarray(right, dtype=np.int32)
    cdef double[::1] val = np.ascontiguousarray(value, dtype=np.float64)
    cdef i64 n = Xv.shape[0]
    out_a = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_a
    cdef i64 i
    cdef int node
    with nogil:
        for i in range(n):
            node = 0
            while feat[node] >= 0:
                if Xv[i, feat[node]] <= thr[node]:
                    node = lft[node]
                else:
                    node = rgt[node]
            out[i] = val[node]
    return out_a


# ---------------------------------------------------------------------------
# KD-tree exact nearest neighbor
# ---------------------------------------------------------------------------

cdef class CKDTree:
    cdef object points_a, perm_a, dim_a, val_a, left_a, right_a, start_a, end_a
    cdef double[:, ::1] points
    cdef i64[::1] perm
    cdef int[::1] split_dim
    cdef double[::1] split_val
    cdef int[::1] left
    cdef int[::1] right
    cdef int[::1] start
    cdef int[::1] end


def kdtree_build(points):
    """Build a bounded-leaf KD-tree over float64 (m, d) points."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] pts = points
    cdef i64 m = pts.shape[0]
    cdef int d = <int> pts.shape[1]

    perm_a = np.arange(m, dtype=np.int64)
    cdef i64[::1] perm = perm_a
    cdef i64 max_nodes = m // 4 + 8
    dim_a = np.empty(max_nodes, dtype=np.int32)
    val_a = np.empty(max_nodes, dtype=np.float64)
    left_a = np.empty(max_nodes, dtype=np.int32)
    right_a = np.empty(max_nodes, dtype=np.int32)
    start_a = np.empty(max_nodes, dtype=np.int32)
    end_a = np.empty(max_nodes, dtype=np.int32)
    cdef int[::1] ndim = dim_a
    cdef double[::1] nval = val_a
    cdef int[::1] nleft = left_a
    cdef int[::1] nright = right_a
    cdef int[::1] nstart = start_a
    cdef int[::1] nend = end_a

    sv_a = np.empty(m, dtype=np.float64)
    cdef double[::1] sv = sv_a
    cdef i64[::1] so = np.empty(m, dtype=np.int64)
    cdef i64[::1] tmp = np.empty(m, dtype=np.int64)

    cdef i64[::1] st_lo = np.empty(128, dtype=np.int64)
    cdef i64[::1] st_hi = np.empty(128, dtype=np.int64)
    cdef i64[::1] st_par = np.empty(128, dtype=np.int64)
    cdef i64[::1] st_isl = np.empty(128, dtype=np.int64)

    cdef i64 top = 0, n_nodes = 0
    cdef i64 lo, hi, parent, is_left, node, count, mid, i
    cdef int a, dim
    cdef double vmin, vmax, spread, best_spread, v

    st_lo[0] = 0; st_hi[0] = m; st_par[0] = -1; st_isl[0] = 0
    top = 1
    with nogil:
        while top > 0:
            top -= 1
            lo = st_lo[top]; hi = st_hi[top]; parent = st_par[top]; is_left = st_isl[top]
            node = n_nodes
            n_nodes += 1
            ndim[node] = -1
            nval[node] = 0.0
            nleft[node] = -1
            nright[node] = -1
            nstart[node] = <int> lo
            nend[node] = <int> hi
            if parent >= 0:
                if is_left:
                    nleft[parent] = <int> node
                else:
                    nright[parent] = <int> node
            count = hi - lo
            if count <= LEAF_SIZE:
                continue
            # widest-spread dimension (first max wins)
            dim = 0
            best_spread = -1.0
            for a in range(d):
                vmin = pts[perm[lo], a]
                vmax = vmin
                for i in range(lo + 1, hi):
                    v = pts[perm[i], a]
                    if v < vmin:
                        vmin = v
                    if v > vmax:
                        vmax = v
                spread = vmax - vmin
                if spread > best_spread:
                    best_spread = spread
                    dim = a
            # full sort of the segment by (value, index); median at midpoint
            for i in range(count):
                sv[i] = pts[perm[lo + i], dim]
                so[i] = i
            _sort_pairs(&sv[0], &so[0], 0, count - 1)
            for i in range(count):
                tmp[i] = perm[lo + so[i]]
            for i in range(count):
                perm[lo + i] = tmp[i]
            mid = (lo + hi) // 2
            ndim[node] = dim
            nval[node] = pts[perm[mid], dim]
            st_lo[top] = mid; st_hi[top] = hi; st_par[top] = node; st_isl[top] = 0
            top += 1
            st_lo[top] = lo; st_hi[top] = mid; st_par[top] = node; st_isl[top] = 1
            top += 1

    cdef CKDTree tree = CKDTree()
    tree.points_a = points
    tree.perm_a = perm_a
    tree.dim_a = dim_a[:n_nodes].copy()
    tree.val_a = val_a[:n_nodes].copy()
    tree.left_a = left_a[:n_nodes].copy()
    tree.right_a = right_a[:n_nodes].copy()
    tree.start_a = start_a[:n_nodes].copy()
    tree.end_a = end_a[:n_nodes].copy()
    tree.points = tree.points_a
    tree.perm = tree.perm_a
    tree.split_dim = tree.dim_a
    tree.split_val = tree.val_a
    tree.left = tree.left_a
    tree.right = tree.right_a
    tree.start = tree.start_a
    tree.end = tree.end_a
    return tree


cdef void _query_node(CKDTree t, double* q, int d, int node,
                      double* best_d2, i64* best_idx) noexcept nogil:
    cdef int dim = t.split_dim[node]
    cdef i64 i, p
    cdef int a, near, far
    cdef double d2, diff, gap
    if dim < 0:
        for i in range(t.start[node], t.end[node]):
            p = t.perm[i]
            d2 = 0.0
            for a in range(d):
                diff = t.points[p, a] - q[a]
                d2 += diff * diff
            if d2 < best_d2[0] or (d2 == best_d2[0] and p < best_idx[0]):
                best_d2[0] = d2
                best_idx[0] = p
        return
    gap = q[dim] - t.split_val[node]
    if gap <= 0.0:
        near = t.left[node]
        far = t.right[node]
    else:
        near = t.right[node]
        far = t.left[node]
    _query_node(t, q, d, near, best_d2, best_idx)
    if gap * gap <= best_d2[0]:
        _query_node(t, q, d, far, best_d2, best_idx)


def kdtree_query(CKDTree tree, queries):
    """Exact NN per query row -> (indices int64, squared distances float64)."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    cdef double[:, ::1] qv = queries
    cdef i64 nq = qv.shape[0]
    cdef int d = <int> qv.shape[1]
    out_idx_a = np.empty(nq, dtype=np.int64)
    out_d2_a = np.empty(nq, dtype=np.float64)
    cdef i64[::1] out_idx = out_idx_a
    cdef double[::1] out_d2 = out_d2_a
    cdef i64 qi
    cdef double best_d2
    cdef i64 best_idx
    with nogil:
        for qi in range(nq):
            best_d2 = 1e308
            best_idx = -1
            _query_node(tree, &qv[qi, 0], d, 0, &best_d2, &best_idx)
            out_idx[qi] = best_idx
            out_d2[qi] = best_d2
    return out_idx_a, out_d2_a
