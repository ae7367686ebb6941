"""Numba kernels for tree growth, leaf enumeration, and variance integrals.

Trees are stored as flat arrays (``feature``, ``threshold``, ``left``,
``right``, ``value``).  ``feature == -1`` marks a leaf.  For categorical
dimensions the threshold field holds an exact small-integer bitmask of the
categories routed left; numeric thresholds are plain floats in (0, 1).

All kernels are deterministic given their inputs: sorts are stable and the
split-feature subsampling uses an explicit splitmix64 state passed in by the
caller, so results do not depend on global RNG state or thread scheduling.
"""

import numpy as np
from numba import njit

U64 = np.uint64


@njit(cache=True, nogil=True, inline="always")
def _splitmix64(state):
    state = state + U64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return state, z ^ (z >> U64(31))


@njit(cache=True, nogil=True)
def grow_tree(X, y, idx, is_cat, n_cats, min_leaf, n_feats, rng_state):
    """Grow one variance-reduction regression tree on rows ``idx`` of X.

    Numeric split candidates sit at midpoints between adjacent distinct
    sample values; categorical splits are one-category-versus-rest, chosen
    greedily.  Growth stops when a node has fewer than ``2 * min_leaf``
    samples or zero target variance.
    """
    n = X.shape[1]
    msub = len(idx)
    max_nodes = 2 * msub + 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes, dtype=np.float64)

    work = idx.copy()
    stack_node = np.zeros(max_nodes, dtype=np.int64)
    stack_lo = np.zeros(max_nodes, dtype=np.int64)
    stack_hi = np.zeros(max_nodes, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = msub
    sp = 1
    n_nodes = 1

    feats = np.empty(n, dtype=np.int64)
    max_cats = 1
    for d in range(n):
        if n_cats[d] > max_cats:
            max_cats = n_cats[d]
    cat_count = np.zeros(max_cats, dtype=np.int64)
    cat_sum = np.zeros(max_cats, dtype=np.float64)

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        cnt = hi - lo

        ysum = 0.0
        for i in range(lo, hi):
            ysum += y[work[i]]
        mean = ysum / cnt
        var = 0.0
        for i in range(lo, hi):
            dy = y[work[i]] - mean
            var += dy * dy
        value[node] = mean
        if cnt < 2 * min_leaf or var <= 0.0:
            continue

        for d in range(n):
            feats[d] = d
        state = rng_state
        for i in range(n_feats):
            state, z = _splitmix64(state)
            j = i + np.int64(z % U64(n - i))
            feats[i], feats[j] = feats[j], feats[i]
        rng_state = state

        best_gain = 0.0
        best_f = np.int64(-1)
        best_thr = 0.0
        for fi in range(n_feats):
            f = feats[fi]
            if is_cat[f]:
                nc = n_cats[f]
                for c in range(nc):
                    cat_count[c] = 0
                    cat_sum[c] = 0.0
                tot = 0.0
                for i in range(lo, hi):
                    w = work[i]
                    c = np.int64(X[w, f])
                    dy = y[w] - mean
                    cat_count[c] += 1
                    cat_sum[c] += dy
                    tot += dy
                for c in range(nc):
                    nl = cat_count[c]
                    nr = cnt - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    sl = cat_sum[c]
                    sr = tot - sl
                    gain = sl * sl / nl + sr * sr / nr
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_thr = float(np.int64(1) << np.int64(c))
            else:
                vals = np.empty(cnt, dtype=np.float64)
                ys = np.empty(cnt, dtype=np.float64)
                for i in range(cnt):
                    w = work[lo + i]
                    vals[i] = X[w, f]
                    ys[i] = y[w] - mean
                order = np.argsort(vals, kind="mergesort")
                tot = 0.0
                for i in range(cnt):
                    tot += ys[i]
                cums = 0.0
                for i in range(cnt - 1):
                    cums += ys[order[i]]
                    a = vals[order[i]]
                    b = vals[order[i + 1]]
                    if b <= a:
                        continue
                    nl = i + 1
                    nr = cnt - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    rest = tot - cums
                    gain = cums * cums / nl + rest * rest / nr
                    if gain > best_gain:
                        t = 0.5 * (a + b)
                        if t <= a or t >= 1.0:
                            continue
                        best_gain = gain
                        best_f = f
                        best_thr = t

        if best_f < 0:
            continue

        tmp = np.empty(cnt, dtype=np.int64)
        p = 0
        if is_cat[best_f]:
            mask = np.int64(best_thr)
            for i in range(lo, hi):
                w = work[i]
                if (mask >> np.int64(X[w, best_f])) & np.int64(1):
                    tmp[p] = w
                    p += 1
            mid = p
            for i in range(lo, hi):
                w = work[i]
                if not ((mask >> np.int64(X[w, best_f])) & np.int64(1)):
                    tmp[p] = w
                    p += 1
        else:
            for i in range(lo, hi):
                w = work[i]
                if X[w, best_f] < best_thr:
                    tmp[p] = w
                    p += 1
            mid = p
            for i in range(lo, hi):
                w = work[i]
                if X[w, best_f] >= best_thr:
                    tmp[p] = w
                    p += 1
        for i in range(cnt):
            work[lo + i] = tmp[i]

        feature[node] = best_f
        threshold[node] = best_thr
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        stack_node[sp] = lid
        stack_lo[sp] = lo
        stack_hi[sp] = lo + mid
        sp += 1
        stack_node[sp] = rid
        stack_lo[sp] = lo + mid
        stack_hi[sp] = hi
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def leaf_boxes(feature, threshold, left, right, value, is_cat, n_cats):
    """Enumerate the axis-aligned box of every leaf, in node order.

    Returns ``(leaf_values, lo, hi, cat_mask, weight)`` where numeric dims
    use ``[lo, hi)`` intervals (the last one closed at 1) and categorical
    dims use bitmasks.  Weights are the product of interval lengths and
    category-subset fractions, so they sum to 1 over all leaves.
    """
    n_nodes = len(feature)
    n = len(is_cat)
    n_leaves = 0
    for i in range(n_nodes):
        if feature[i] < 0:
            n_leaves += 1

    out_val = np.empty(n_leaves, dtype=np.float64)
    out_lo = np.zeros((n_leaves, n), dtype=np.float64)
    out_hi = np.ones((n_leaves, n), dtype=np.float64)
    out_mask = np.zeros((n_leaves, n), dtype=np.int64)
    out_w = np.empty(n_leaves, dtype=np.float64)

    depth_cap = n_nodes + 2
    st_node = np.empty(depth_cap, dtype=np.int64)
    st_lo = np.empty((depth_cap, n), dtype=np.float64)
    st_hi = np.empty((depth_cap, n), dtype=np.float64)
    st_mask = np.empty((depth_cap, n), dtype=np.int64)
    tmp_lo = np.empty(n, dtype=np.float64)
    tmp_hi = np.empty(n, dtype=np.float64)
    tmp_mask = np.empty(n, dtype=np.int64)

    st_node[0] = 0
    for d in range(n):
        st_lo[0, d] = 0.0
        st_hi[0, d] = 1.0
        if is_cat[d]:
            st_mask[0, d] = (np.int64(1) << np.int64(n_cats[d])) - np.int64(1)
        else:
            st_mask[0, d] = 0
    sp = 1
    out = 0
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        if feature[node] < 0:
            w = 1.0
            for d in range(n):
                if is_cat[d]:
                    m = st_mask[sp, d]
                    pc = 0
                    for c in range(n_cats[d]):
                        if (m >> np.int64(c)) & np.int64(1):
                            pc += 1
                    w *= pc / n_cats[d]
                else:
                    w *= st_hi[sp, d] - st_lo[sp, d]
                out_lo[out, d] = st_lo[sp, d]
                out_hi[out, d] = st_hi[sp, d]
                out_mask[out, d] = st_mask[sp, d]
            out_val[out] = value[node]
            out_w[out] = w
            out += 1
            continue
        f = feature[node]
        for d in range(n):
            tmp_lo[d] = st_lo[sp, d]
            tmp_hi[d] = st_hi[sp, d]
            tmp_mask[d] = st_mask[sp, d]
        # push right first, then left, so leaves pop left-to-right
        st_node[sp] = right[node]
        for d in range(n):
            st_lo[sp, d] = tmp_lo[d]
            st_hi[sp, d] = tmp_hi[d]
            st_mask[sp, d] = tmp_mask[d]
        if is_cat[f]:
            st_mask[sp, f] = tmp_mask[f] & ~np.int64(threshold[node])
        else:
            st_lo[sp, f] = threshold[node]
        sp += 1
        st_node[sp] = left[node]
        for d in range(n):
            st_lo[sp, d] = tmp_lo[d]
            st_hi[sp, d] = tmp_hi[d]
            st_mask[sp, d] = tmp_mask[d]
        if is_cat[f]:
            st_mask[sp, f] = tmp_mask[f] & np.int64(threshold[node])
        else:
            st_hi[sp, f] = threshold[node]
        sp += 1
    return out_val, out_lo, out_hi, out_mask, out_w


@njit(cache=True, nogil=True)
def predict_batch(feature, threshold, left, right, value, is_cat, X):
    """Route every row of X (internal space) to its leaf value."""
    m = X.shape[0]
    out = np.empty(m, dtype=np.float64)
    for i in range(m):
        node = 0
        while feature[node] >= 0:
            f = feature[node]
            if is_cat[f]:
                mask = np.int64(threshold[node])
                if (mask >> np.int64(X[i, f])) & np.int64(1):
                    node = left[node]
                else:
                    node = right[node]
            else:
                if X[i, f] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True, nogil=True)
def pair_square_integral(si, ei, sj, ej, z, wi_prefix, wj):
    """Integral of the squared two-dim marginal over an aligned cell grid.

    Each leaf covers cells ``[si, ei) x [sj, ej)`` and adds ``z`` to the
    marginal there.  A sweep over the first axis maintains the current
    column profile ``a`` and its weighted square-sum incrementally, giving
    O(events * column-span + grid) instead of materializing the full grid.
    ``wi_prefix`` holds prefix sums of the first axis' cell widths
    (``wi_prefix[0] == 0``); ``wj`` the second axis' cell widths.
    """
    n_leaves = len(z)
    n_events = 2 * n_leaves
    pos = np.empty(n_events, dtype=np.int64)
    val = np.empty(n_events, dtype=np.float64)
    cs = np.empty(n_events, dtype=np.int64)
    ce = np.empty(n_events, dtype=np.int64)
    for l in range(n_leaves):
        pos[2 * l] = si[l]
        val[2 * l] = z[l]
        pos[2 * l + 1] = ei[l]
        val[2 * l + 1] = -z[l]
        cs[2 * l] = sj[l]
        cs[2 * l + 1] = sj[l]
        ce[2 * l] = ej[l]
        ce[2 * l + 1] = ej[l]
    order = np.argsort(pos, kind="mergesort")

    gj = len(wj)
    a = np.zeros(gj, dtype=np.float64)
    total = 0.0
    row_sum = 0.0
    prev = np.int64(0)
    for e in range(n_events):
        k = order[e]
        p = pos[k]
        if p > prev:
            total += row_sum * (wi_prefix[p] - wi_prefix[prev])
            prev = p
        zz = val[k]
        for jj in range(cs[k], ce[k]):
            row_sum += wj[jj] * (2.0 * zz * a[jj] + zz * zz)
            a[jj] += zz
    last = len(wi_prefix) - 1
    if last > prev:
        total += row_sum * (wi_prefix[last] - wi_prefix[prev])
    return total
