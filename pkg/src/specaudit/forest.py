"""Regression random forest with per-node covers.

Trees are CART-style: splits maximize weighted variance reduction over a
per-split random candidate subset, leaves carry the mean target of the
rows that reach them, and every node records its cover (the number of
bootstrap rows routed through it). Covers define the path-dependent
conditional expectation evaluated by `eval_conditional`, which the
attribution code builds on.

Conventions pinned for oracle agreement: strictly-less-than goes left
(x[feature] < threshold), ties at the threshold go right; per-tree RNG
streams derive from (seed, tree_index); candidate features are drawn
without replacement per split in preorder.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .errors import ValidationError
from .features import FeatureTable
from .validation import check_matrix, check_vector, stable_digest

FOREST_FORMAT_VERSION = "v1"
LEAF = -1

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: int = 12
    min_samples_leaf: int = 2
    features_per_split: float = 0.33
    bootstrap: bool = True
    seed: int = 0

    def validate(self):
        if self.n_trees < 1:
            raise ValidationError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 0:
            raise ValidationError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValidationError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if not (0.0 < self.features_per_split <= 1.0):
            raise ValidationError(
                f"features_per_split must lie in (0, 1], got {self.features_per_split}"
            )
        return self

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        try:
            return cls(
                n_trees=int(d["n_trees"]),
                max_depth=int(d["max_depth"]),
                min_samples_leaf=int(d["min_samples_leaf"]),
                features_per_split=float(d["features_per_split"]),
                bootstrap=bool(d["bootstrap"]),
                seed=int(d["seed"]),
            ).validate()
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed forest params: {exc}") from exc


@dataclass
class TreeArrays:
    """Array-encoded binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray  # int64
    threshold: np.ndarray  # float64 (0.0 at leaves)
    left: np.ndarray  # int64 (-1 at leaves)
    right: np.ndarray  # int64 (-1 at leaves)
    value: np.ndarray  # float64 (node mean; consulted at leaves only)
    cover: np.ndarray  # float64, positive; children sum to parent exactly

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        out = 0
        stack = [(0, 0)]
        while stack:
            j, d = stack.pop()
            out = max(out, d)
            if self.feature[j] != LEAF:
                stack.append((int(self.left[j]), d + 1))
                stack.append((int(self.right[j]), d + 1))
        return out


class ForestRegressor(BaseEstimator, RegressorMixin):
    """Random forest regressor with recorded node covers.

    Parameters mirror ForestParams; `target_name` is carried as metadata
    so per-soil-parameter models stay distinguishable once serialized.
    """

    def __init__(
        self,
        n_trees=200,
        max_depth=12,
        min_samples_leaf=2,
        features_per_split=0.33,
        bootstrap=True,
        seed=0,
        target_name=None,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.seed = seed
        self.target_name = target_name

    @property
    def params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            features_per_split=self.features_per_split,
            bootstrap=self.bootstrap,
            seed=self.seed,
        )

    @classmethod
    def from_params(cls, params: ForestParams, target_name=None) -> "ForestRegressor":
        return cls(target_name=target_name, **params.to_dict())

    def fit(self, X, y):
        if isinstance(X, FeatureTable):
            fingerprint = X.fingerprint()
            X = X.matrix
        else:
            X = check_matrix(X)
            fingerprint = stable_digest({"anonymous_features": int(X.shape[1])})
        if X.shape[0] == 0:
            raise ValidationError("cannot fit a forest on an empty table")
        y = check_vector(y, n=X.shape[0])
        self.params.validate()

        n, p = X.shape
        m = math.ceil(self.features_per_split * p)
        seed = int(self.seed) & _U64

        self.trees_ = [
            _build_tree(
                X,
                y,
                rng=np.random.default_rng((seed, t)),
                n_candidates=m,
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                bootstrap=self.bootstrap,
            )
            for t in range(self.n_trees)
        ]
        self.baseline_ = float(y.mean())
        self.n_features_in_ = p
        self.schema_fingerprint_ = fingerprint
        return self

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise NotFittedError("forest is not fitted")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        if isinstance(X, FeatureTable):
            X = X.matrix
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"feature dimension mismatch: got {X.shape[1]}, "
                f"forest expects {self.n_features_in_}"
            )
        out = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees_:
            out += predict_tree(tree, X)
        return out / len(self.trees_)

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=np.float64)[None, :])[0])

    def base_value(self) -> float:
        """Cover-weighted mean leaf value, averaged over trees (v of the
        empty conditioning set)."""
        self._check_fitted()
        total = 0.0
        for tree in self.trees_:
            leaves = tree.feature == LEAF
            total += float(np.dot(tree.value[leaves], tree.cover[leaves]) / tree.cover[0])
        return total / len(self.trees_)

    def used_features(self) -> np.ndarray:
        """Sorted ids of features appearing in at least one split."""
        self._check_fitted()
        used = set()
        for tree in self.trees_:
            used.update(int(f) for f in tree.feature[tree.feature != LEAF])
        return np.array(sorted(used), dtype=np.int64)


def _build_tree(X, y, rng, n_candidates, max_depth, min_samples_leaf, bootstrap):
    n, p = X.shape
    if bootstrap:
        idx = rng.integers(0, n, size=n)
        Xb, yb = X[idx], y[idx]
    else:
        Xb, yb = X, y

    feature, threshold, left, right, value, cover = [], [], [], [], [], []
    # stack entries: (row indices, depth, parent node id, arrives-as-left)
    stack = [(np.arange(n, dtype=np.int64), 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node_id
        yn = yb[rows]
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(yn.mean()))
        cover.append(float(len(rows)))

        if depth >= max_depth or len(rows) < max(2, 2 * min_samples_leaf):
            continue
        cand = rng.choice(p, size=n_candidates, replace=False)
        found = _best_split(Xb, yn, rows, cand, min_samples_leaf)
        if found is None:
            continue
        feat, thr = found
        feature[node_id] = int(feat)
        threshold[node_id] = float(thr)
        go_left = Xb[rows, feat] < thr
        # right pushed first so the left subtree is laid out in preorder
        stack.append((rows[~go_left], depth + 1, node_id, False))
        stack.append((rows[go_left], depth + 1, node_id, True))

    return TreeArrays(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
        cover=np.array(cover, dtype=np.float64),
    )


def _best_split(Xb, yn, rows, cand, min_samples_leaf):
    """Best (feature, threshold) by weighted variance reduction, or None.

    Reduction is computed as parent SSE minus child SSEs, which equals the
    weighted variance reduction scaled by the node cover; no split is
    returned when the best reduction is <= 0.
    """
    nn = len(rows)
    Xc = Xb[np.ix_(rows, cand)]
    order = np.argsort(Xc, axis=0, kind="stable")
    Xs = np.take_along_axis(Xc, order, axis=0)
    ys = yn[order]

    c1 = np.cumsum(ys, axis=0)
    c2 = np.cumsum(ys * ys, axis=0)
    ysum, y2sum = float(yn.sum()), float(np.dot(yn, yn))
    sse_parent = y2sum - ysum * ysum / nn

    nl = np.arange(1, nn, dtype=np.float64)[:, None]
    nr = nn - nl
    sse_l = c2[:-1] - c1[:-1] ** 2 / nl
    sse_r = (y2sum - c2[:-1]) - (ysum - c1[:-1]) ** 2 / nr
    reduction = sse_parent - sse_l - sse_r

    valid = (Xs[1:] > Xs[:-1]) & (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
    reduction[~valid] = -np.inf
    flat = int(np.argmax(reduction))
    i, j = divmod(flat, len(cand))
    if reduction[i, j] <= 0:
        return None
    lo, hi = Xs[i, j], Xs[i + 1, j]
    thr = 0.5 * (lo + hi)
    if not (lo < thr):  # midpoint rounded down to lo; use hi, same partition
        thr = hi
    return int(cand[j]), float(thr)


def predict_tree(tree: TreeArrays, X: np.ndarray) -> np.ndarray:
    """Leaf values reached by each row of X under strict-< routing."""
    idx = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        feat = tree.feature[idx]
        live = feat != LEAF
        if not live.any():
            break
        where = np.nonzero(live)[0]
        node = idx[where]
        go_left = X[where, feat[where]] < tree.threshold[node]
        idx[where] = np.where(go_left, tree.left[node], tree.right[node])
    return tree.value[idx]


def eval_conditional(tree: TreeArrays, x, feature_set) -> float:
    """Path-dependent conditional expectation for a single tree.

    Splits on features in the set follow x; splits on other features
    average both children weighted by cover.
    """
    x = np.asarray(x, dtype=np.float64)
    S = frozenset(int(f) for f in feature_set)

    def rec(j):
        f = int(tree.feature[j])
        if f == LEAF:
            return float(tree.value[j])
        if f in S:
            child = tree.left[j] if x[f] < tree.threshold[j] else tree.right[j]
            return rec(int(child))
        l, r = int(tree.left[j]), int(tree.right[j])
        return (tree.cover[l] * rec(l) + tree.cover[r] * rec(r)) / tree.cover[j]

    return rec(0)


def forest_conditional(forest: ForestRegressor, x, feature_set) -> float:
    """Forest-level conditional value: mean of per-tree evaluations."""
    forest._check_fitted()
    return float(
        sum(eval_conditional(tree, x, feature_set) for tree in forest.trees_)
        / len(forest.trees_)
    )


def save_forest(forest: ForestRegressor, path) -> None:
    forest._check_fitted()
    trees = []
    for tree in forest.trees_:
        nodes = []
        for j in range(tree.n_nodes):
            if tree.feature[j] == LEAF:
                nodes.append({"value": float(tree.value[j]), "cover": float(tree.cover[j])})
            else:
                nodes.append(
                    {
                        "feature": int(tree.feature[j]),
                        "threshold": float(tree.threshold[j]),
                        "left": int(tree.left[j]),
                        "right": int(tree.right[j]),
                        "cover": float(tree.cover[j]),
                    }
                )
        trees.append({"nodes": nodes})
    doc = {
        "version": FOREST_FORMAT_VERSION,
        "target_name": forest.target_name,
        "baseline": forest.baseline_,
        "params": forest.params.to_dict(),
        "schema_fingerprint": forest.schema_fingerprint_,
        "n_features": forest.n_features_in_,
        "trees": trees,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_forest(path) -> ForestRegressor:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"unparseable forest file {path}: {exc}") from exc
    if doc.get("version") != FOREST_FORMAT_VERSION:
        raise ValidationError(
            f"unsupported forest format version {doc.get('version')!r} in {path}"
        )
    params = ForestParams.from_dict(doc.get("params", {}))
    try:
        n_features = int(doc["n_features"])
        baseline = float(doc["baseline"])
        tree_docs = doc["trees"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed forest file {path}: {exc}") from exc
    if len(tree_docs) != params.n_trees:
        raise ValidationError(
            f"{path}: params declare {params.n_trees} trees, file holds {len(tree_docs)}"
        )

    forest = ForestRegressor.from_params(params, target_name=doc.get("target_name"))
    forest.trees_ = [
        _tree_from_doc(td, n_features, f"{path} tree {t}") for t, td in enumerate(tree_docs)
    ]
    forest.baseline_ = baseline
    forest.n_features_in_ = n_features
    forest.schema_fingerprint_ = doc.get("schema_fingerprint")
    return forest


def _tree_from_doc(tree_doc: dict, n_features: int, name: str) -> TreeArrays:
    nodes = tree_doc.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        raise ValidationError(f"{name}: empty or malformed node list")
    n = len(nodes)
    feature = np.full(n, LEAF, dtype=np.int64)
    threshold = np.zeros(n, dtype=np.float64)
    left = np.full(n, LEAF, dtype=np.int64)
    right = np.full(n, LEAF, dtype=np.int64)
    value = np.zeros(n, dtype=np.float64)
    cover = np.zeros(n, dtype=np.float64)

    for j, nd in enumerate(nodes):
        try:
            cov = float(nd["cover"])
            if "feature" in nd:
                feature[j] = int(nd["feature"])
                threshold[j] = float(nd["threshold"])
                left[j] = int(nd["left"])
                right[j] = int(nd["right"])
            else:
                value[j] = float(nd["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{name}: malformed node {j}: {exc}") from exc
        if not np.isfinite(cov) or cov <= 0:
            raise ValidationError(f"{name}: node {j} cover must be positive, got {cov}")
        cover[j] = cov

    seen = np.zeros(n, dtype=bool)
    stack = [0]
    while stack:
        j = stack.pop()
        if j < 0 or j >= n:
            raise ValidationError(f"{name}: child index {j} out of range")
        if seen[j]:
            raise ValidationError(f"{name}: node {j} reachable twice; not a binary tree")
        seen[j] = True
        if feature[j] != LEAF:
            if not (0 <= feature[j] < n_features):
                raise ValidationError(
                    f"{name}: node {j} splits on feature {feature[j]} "
                    f"outside [0, {n_features})"
                )
            if not np.isfinite(threshold[j]):
                raise ValidationError(f"{name}: node {j} threshold not finite")
            l, r = int(left[j]), int(right[j])
            stack.extend((r, l))
        else:
            if not np.isfinite(value[j]):
                raise ValidationError(f"{name}: node {j} leaf value not finite")
    if not seen.all():
        raise ValidationError(f"{name}: {int((~seen).sum())} unreachable nodes")

    internal = feature != LEAF
    if internal.any():
        child_sum = cover[left[internal]] + cover[right[internal]]
        if not np.array_equal(child_sum, cover[internal]):
            raise ValidationError(f"{name}: cover invariant violated (children != parent)")

    return TreeArrays(
        feature=feature, threshold=threshold, left=left, right=right, value=value, cover=cover
    )
