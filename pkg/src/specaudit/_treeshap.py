"""Polynomial-time exact attribution kernel for cover-weighted trees.

For one tree and one sample, a depth-first walk maintains, per distinct
feature on the current root-to-node path, a "cold" fraction (product of
cover ratios along that feature's edges) and a "hot" fraction (1 while the
sample's value follows every such edge, else 0), together with a weight
vector w where w[m] aggregates all m-of-l feature subsets of the path,
pre-multiplied by m!(l-m)!/(l+1)!. At a leaf, removing one feature from
the weights and summing yields that feature's combinatorial factor, so

    phi[f] += (hot_f - cold_f) * unwound_sum(f) * leaf_value

accumulates the exact attribution of the path-dependent game. Runtime is
O(leaves * depth^2) per sample per tree, independent of 2^n_features.

Compiled with numba; operates on a forest flattened into global arrays.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def _extend(pd, pz, po, pw, n, pf, zf, of):
    """Append path element (pf, zf, of) and fold it into the weights."""
    pd[n] = pf
    pz[n] = zf
    po[n] = of
    pw[n] = 1.0 if n == 0 else 0.0
    for i in range(n - 1, -1, -1):
        pw[i + 1] += of * pw[i] * (i + 1.0) / (n + 1.0)
        pw[i] = zf * pw[i] * (n - i) / (n + 1.0)


@njit(cache=True)
def _unwind(pd, pz, po, pw, n, k):
    """Remove path element k, undoing its contribution to the weights."""
    l = n - 1
    one = po[k]
    zero = pz[k]
    if one != 0.0:
        nxt = pw[l]
        for m in range(l - 1, -1, -1):
            u = nxt * (l + 1.0) / (one * (m + 1.0))
            nxt = pw[m] - u * zero * (l - m) / (l + 1.0)
            pw[m] = u
    else:
        for m in range(l - 1, -1, -1):
            pw[m] = pw[m] * (l + 1.0) / (zero * (l - m))
    for i in range(k, n - 1):
        pd[i] = pd[i + 1]
        pz[i] = pz[i + 1]
        po[i] = po[i + 1]


@njit(cache=True)
def _unwound_sum(pz, po, pw, n, k):
    """Sum of the weights with path element k factored out (not mutated)."""
    l = n - 1
    one = po[k]
    zero = pz[k]
    total = 0.0
    if one != 0.0:
        nxt = pw[l]
        for m in range(l - 1, -1, -1):
            u = nxt * (l + 1.0) / (one * (m + 1.0))
            total += u
            nxt = pw[m] - u * zero * (l - m) / (l + 1.0)
    else:
        for m in range(l - 1, -1, -1):
            total += pw[m] * (l + 1.0) / (zero * (l - m))
    return total


@njit(cache=True)
def _shap_into(feature, threshold, left, right, value, cover, offsets, max_path, X, phi):
    """Accumulate per-tree attribution sums for every sample into phi."""
    n_samples = X.shape[0]
    n_trees = offsets.shape[0] - 1
    max_stack = max_path + 2

    node = np.empty(max_stack, np.int64)
    nlen = np.empty(max_stack, np.int64)
    fz = np.empty(max_stack, np.float64)
    fo = np.empty(max_stack, np.float64)
    ff = np.empty(max_stack, np.int64)
    pd = np.empty((max_stack, max_path), np.int64)
    pz = np.empty((max_stack, max_path), np.float64)
    po = np.empty((max_stack, max_path), np.float64)
    pw = np.empty((max_stack, max_path), np.float64)

    for s in range(n_samples):
        for t in range(n_trees):
            node[0] = offsets[t]
            nlen[0] = 0
            fz[0] = 1.0
            fo[0] = 1.0
            ff[0] = -1
            top = 1
            while top > 0:
                top -= 1
                j = node[top]
                n = nlen[top]
                _extend(pd[top], pz[top], po[top], pw[top], n, ff[top], fz[top], fo[top])
                n += 1
                f = feature[j]
                if f == LEAF:
                    v = value[j]
                    for i in range(1, n):
                        w = _unwound_sum(pz[top], po[top], pw[top], n, i)
                        phi[s, pd[top, i]] += w * (po[top, i] - pz[top, i]) * v
                else:
                    if X[s, f] < threshold[j]:
                        hot, cold = left[j], right[j]
                    else:
                        hot, cold = right[j], left[j]
                    iz = 1.0
                    io = 1.0
                    for i in range(1, n):
                        if pd[top, i] == f:
                            iz = pz[top, i]
                            io = po[top, i]
                            _unwind(pd[top], pz[top], po[top], pw[top], n, i)
                            n -= 1
                            break
                    cj = cover[j]
                    # cold child reuses this slot; hot child copies into the
                    # next slot and is processed first (LIFO)
                    node[top] = cold
                    nlen[top] = n
                    fz[top] = iz * cover[cold] / cj
                    fo[top] = 0.0
                    ff[top] = f
                    for i in range(n):
                        pd[top + 1, i] = pd[top, i]
                        pz[top + 1, i] = pz[top, i]
                        po[top + 1, i] = po[top, i]
                        pw[top + 1, i] = pw[top, i]
                    node[top + 1] = hot
                    nlen[top + 1] = n
                    fz[top + 1] = iz * cover[hot] / cj
                    fo[top + 1] = io
                    ff[top + 1] = f
                    top += 2


def shap_sum_matrix(flat, X: np.ndarray, n_features: int) -> np.ndarray:
    """Sum of per-tree attributions for each row of X (no tree averaging)."""
    feature, threshold, left, right, value, cover, offsets, max_path = flat
    phi = np.zeros((X.shape[0], n_features), dtype=np.float64)
    _shap_into(
        feature, threshold, left, right, value, cover, offsets, max_path,
        np.ascontiguousarray(X, dtype=np.float64), phi,
    )
    return phi


def flatten_forest(trees):
    """Concatenate per-tree arrays into one global-index node table."""
    sizes = np.array([t.n_nodes for t in trees], dtype=np.int64)
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])

    feature = np.concatenate([t.feature for t in trees])
    threshold = np.concatenate([t.threshold for t in trees])
    value = np.concatenate([t.value for t in trees])
    cover = np.concatenate([t.cover for t in trees])
    left = np.concatenate(
        [np.where(t.left == LEAF, LEAF, t.left + off) for t, off in zip(trees, offsets[:-1])]
    )
    right = np.concatenate(
        [np.where(t.right == LEAF, LEAF, t.right + off) for t, off in zip(trees, offsets[:-1])]
    )
    max_path = max(t.depth() for t in trees) + 2
    return feature, threshold, left, right, value, cover, offsets, max_path
