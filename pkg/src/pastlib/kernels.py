"""Hot numeric kernels: CART growing/prediction and helpers.

Every kernel has a plain-numpy implementation (the ``*_py`` name) and, when
numba is available and not disabled, a compiled version under the public
name.  Set ``PAST_NO_NUMBA=1`` to force the pure-numpy path; the two paths
are bitwise-identical because all randomness inside the kernels goes through
an explicit xorshift state.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("PAST_NO_NUMBA", "").lower() in ("1", "true", "yes")

if not _DISABLED:
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def _maybe_jit(func):
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(func)
    return func


# Tree node layout: feature[i] < 0 marks a leaf with prediction value[i];
# otherwise rows with x[feature] <= threshold go to left[i], else right[i].

_LEAF = -1


_MASK64 = (1 << 64) - 1


def _xorshift_next_py(state):
    # xorshift64*; state is a length-1 uint64 array mutated in place.  Python
    # ints masked to 64 bits reproduce the compiled path's wraparound
    # without overflow warnings.
    s = int(state[0])
    s ^= (s << 12) & _MASK64
    s ^= s >> 25
    s ^= (s << 27) & _MASK64
    state[0] = np.uint64(s)
    return (s * 0x2545F4914F6CDD1D) & _MASK64


def _rand_below_py(state, n):
    return (_xorshift_next_py(state) >> 33) % n


def _sample_features_py(state, n_features, n_pick, scratch):
    # Partial Fisher-Yates into scratch[:n_pick].
    for i in range(n_features):
        scratch[i] = i
    for i in range(n_pick):
        j = i + _rand_below_py(state, n_features - i)
        tmp = scratch[i]
        scratch[i] = scratch[j]
        scratch[j] = tmp
    return scratch[:n_pick]


def _best_split_py(x_col, y, min_leaf):
    """Best threshold on one feature minimizing left+right SSE.

    Returns (threshold, sse, ok).  Candidates are midpoints of consecutive
    distinct sorted values.  For 0/1 targets the SSE criterion coincides
    with the Gini impurity criterion up to a factor of 2, so the same
    kernel serves regression and binary classification.
    """
    n = x_col.shape[0]
    order = np.argsort(x_col, kind="mergesort")
    xs = x_col[order]
    ys = y[order]

    total = 0.0
    total_sq = 0.0
    for i in range(n):
        total += ys[i]
        total_sq += ys[i] * ys[i]

    best_sse = np.inf
    best_thr = 0.0
    ok = False
    left_sum = 0.0
    left_sq = 0.0
    for i in range(n - 1):
        left_sum += ys[i]
        left_sq += ys[i] * ys[i]
        if xs[i + 1] <= xs[i]:
            continue
        n_left = i + 1
        n_right = n - n_left
        if n_left < min_leaf or n_right < min_leaf:
            continue
        right_sum = total - left_sum
        right_sq = total_sq - left_sq
        sse = (left_sq - left_sum * left_sum / n_left) + (
            right_sq - right_sum * right_sum / n_right
        )
        if sse < best_sse:
            best_sse = sse
            best_thr = 0.5 * (xs[i] + xs[i + 1])
            ok = True
    return best_thr, best_sse, ok


def _grow_tree_py(
    x,
    y,
    max_depth,
    min_leaf,
    n_feat_per_split,
    seed,
    feature,
    threshold,
    left,
    right,
    value,
):
    """Grow one CART tree into the preallocated node arrays.

    Returns the number of nodes used.  ``x``/``y`` are the (already
    bootstrapped) training rows.  Leaf value is the mean target, which for
    0/1 targets is the class-1 frequency.
    """
    n, d = x.shape
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed | 1)
    scratch = np.empty(d, dtype=np.int64)
    idx = np.arange(n)

    max_nodes = feature.shape[0]
    # Stack entries: (node, start, end, depth) over idx slices.
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        mean = 0.0
        for i in range(start, end):
            mean += y[idx[i]]
        mean /= m

        make_leaf = depth >= max_depth or m < 2 * min_leaf or n_nodes + 2 > max_nodes
        if not make_leaf:
            feats = _sample_features_py(state, d, n_feat_per_split, scratch)
            sub_y = np.empty(m)
            sub_x = np.empty(m)
            for i in range(m):
                sub_y[i] = y[idx[start + i]]
            best_sse = np.inf
            best_f = -1
            best_thr = 0.0
            for k in range(feats.shape[0]):
                f = feats[k]
                for i in range(m):
                    sub_x[i] = x[idx[start + i], f]
                thr, sse, ok = _best_split_py(sub_x, sub_y, min_leaf)
                if ok and sse < best_sse:
                    best_sse = sse
                    best_f = f
                    best_thr = thr
            if best_f < 0:
                make_leaf = True

        if make_leaf:
            feature[node] = _LEAF
            value[node] = mean
            continue

        # Partition idx[start:end] in place around the chosen split.
        lo = start
        hi = end - 1
        while lo <= hi:
            if x[idx[lo], best_f] <= best_thr:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top, 0] = n_nodes
        stack[top, 1] = start
        stack[top, 2] = lo
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = n_nodes + 1
        stack[top + 1, 1] = lo
        stack[top + 1, 2] = end
        stack[top + 1, 3] = depth + 1
        top += 2
        n_nodes += 2

    return n_nodes


def _predict_tree_py(x, feature, threshold, left, right, value, out):
    n = x.shape[0]
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _predict_forest_py(x, features, thresholds, lefts, rights, values, out):
    """Average prediction over trees; tree t uses row t of each node array."""
    n = x.shape[0]
    n_trees = features.shape[0]
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = 0
            while features[t, node] >= 0:
                if x[i, features[t, node]] <= thresholds[t, node]:
                    node = lefts[t, node]
                else:
                    node = rights[t, node]
            acc += values[t, node]
        out[i] = acc / n_trees
    return out


grow_tree = _maybe_jit(_grow_tree_py)
predict_tree = _maybe_jit(_predict_tree_py)
predict_forest = _maybe_jit(_predict_forest_py)

if NUMBA_ENABLED:
    # The helpers above are called from inside grow_tree, so they must be
    # jitted too; rebind the names grow_tree resolves at compile time.
    @numba.njit(cache=True)
    def _xorshift_next(state):
        # Same xorshift64* as the pure path, in explicit uint64 arithmetic
        # so the compiled wraparound matches the masked-int version.
        s = state[0]
        s ^= s << np.uint64(12)
        s ^= s >> np.uint64(25)
        s ^= s << np.uint64(27)
        state[0] = s
        return s * np.uint64(0x2545F4914F6CDD1D)

    @numba.njit(cache=True)
    def _rand_below(state, n):
        return int(_xorshift_next(state) >> np.uint64(33)) % n

    @numba.njit(cache=True)
    def _sample_features(state, n_features, n_pick, scratch):
        for i in range(n_features):
            scratch[i] = i
        for i in range(n_pick):
            j = i + _rand_below(state, n_features - i)
            tmp = scratch[i]
            scratch[i] = scratch[j]
            scratch[j] = tmp
        return scratch[:n_pick]

    @numba.njit(cache=True)
    def _best_split(x_col, y, min_leaf):
        n = x_col.shape[0]
        order = np.argsort(x_col, kind="mergesort")
        xs = x_col[order]
        ys = y[order]
        total = 0.0
        total_sq = 0.0
        for i in range(n):
            total += ys[i]
            total_sq += ys[i] * ys[i]
        best_sse = np.inf
        best_thr = 0.0
        ok = False
        left_sum = 0.0
        left_sq = 0.0
        for i in range(n - 1):
            left_sum += ys[i]
            left_sq += ys[i] * ys[i]
            if xs[i + 1] <= xs[i]:
                continue
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            right_sum = total - left_sum
            right_sq = total_sq - left_sq
            sse = (left_sq - left_sum * left_sum / n_left) + (
                right_sq - right_sum * right_sum / n_right
            )
            if sse < best_sse:
                best_sse = sse
                best_thr = 0.5 * (xs[i] + xs[i + 1])
                ok = True
        return best_thr, best_sse, ok

    @numba.njit(cache=True)
    def grow_tree(
        x,
        y,
        max_depth,
        min_leaf,
        n_feat_per_split,
        seed,
        feature,
        threshold,
        left,
        right,
        value,
    ):
        n, d = x.shape
        state = np.empty(1, dtype=np.uint64)
        state[0] = np.uint64(seed | 1)
        scratch = np.empty(d, dtype=np.int64)
        idx = np.arange(n)
        max_nodes = feature.shape[0]
        stack = np.empty((max_nodes, 4), dtype=np.int64)
        stack[0, 0] = 0
        stack[0, 1] = 0
        stack[0, 2] = n
        stack[0, 3] = 0
        top = 1
        n_nodes = 1
        best_f = -1
        best_thr = 0.0
        while top > 0:
            top -= 1
            node = stack[top, 0]
            start = stack[top, 1]
            end = stack[top, 2]
            depth = stack[top, 3]
            m = end - start
            mean = 0.0
            for i in range(start, end):
                mean += y[idx[i]]
            mean /= m
            make_leaf = (
                depth >= max_depth or m < 2 * min_leaf or n_nodes + 2 > max_nodes
            )
            if not make_leaf:
                feats = _sample_features(state, d, n_feat_per_split, scratch)
                sub_y = np.empty(m)
                sub_x = np.empty(m)
                for i in range(m):
                    sub_y[i] = y[idx[start + i]]
                best_sse = np.inf
                best_f = -1
                best_thr = 0.0
                for k in range(feats.shape[0]):
                    f = feats[k]
                    for i in range(m):
                        sub_x[i] = x[idx[start + i], f]
                    thr, sse, ok = _best_split(sub_x, sub_y, min_leaf)
                    if ok and sse < best_sse:
                        best_sse = sse
                        best_f = f
                        best_thr = thr
                if best_f < 0:
                    make_leaf = True
            if make_leaf:
                feature[node] = _LEAF
                value[node] = mean
                continue
            lo = start
            hi = end - 1
            while lo <= hi:
                if x[idx[lo], best_f] <= best_thr:
                    lo += 1
                else:
                    tmp = idx[lo]
                    idx[lo] = idx[hi]
                    idx[hi] = tmp
                    hi -= 1
            feature[node] = best_f
            threshold[node] = best_thr
            left[node] = n_nodes
            right[node] = n_nodes + 1
            stack[top, 0] = n_nodes
            stack[top, 1] = start
            stack[top, 2] = lo
            stack[top, 3] = depth + 1
            stack[top + 1, 0] = n_nodes + 1
            stack[top + 1, 1] = lo
            stack[top + 1, 2] = end
            stack[top + 1, 3] = depth + 1
            top += 2
            n_nodes += 2
        return n_nodes
