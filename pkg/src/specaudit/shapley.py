"""Exact per-sample attributions for ForestRegressor under the
cover-weighted (path-dependent) value function.

Two independent routes are provided: `brute_shap`, a subset-enumeration
oracle that evaluates the defining weighted-marginal formula through
`eval_conditional`, and `tree_shap`, the polynomial fast path. They agree
to float rounding; the oracle refuses beyond 20 active features.

Forest attributions are the mean of per-tree attributions, matching how
forest predictions average per-tree outputs, so local accuracy holds:
base value plus the attribution row sums to the prediction.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.exceptions import NotFittedError

from ._treeshap import flatten_forest, shap_sum_matrix
from .aggregate import global_importance, importance_order
from .errors import InternalInvariantError, OracleIntractableError, ValidationError
from .features import FeatureSchema, FeatureTable, read_sample_matrix_csv
from .forest import ForestRegressor, forest_conditional
from .validation import check_matrix

MAX_ORACLE_FEATURES = 20
ADDITIVITY_RTOL = 1e-6


@dataclass
class ShapMatrix:
    """Per-sample, per-feature attributions sharing one base value."""

    values: np.ndarray  # (n_samples, n_features) float64
    base_value: float
    sample_ids: np.ndarray  # (n_samples,) int64
    schema_fingerprint: str

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


class TreeShapExplainer:
    """Computes attribution matrices for a fitted ForestRegressor."""

    def __init__(self, forest: ForestRegressor):
        if not hasattr(forest, "trees_"):
            raise NotFittedError("cannot explain an unfitted forest")
        self.forest = forest
        self._flat = flatten_forest(forest.trees_)
        self.base_value = forest.base_value()

    def shap_values(self, X) -> np.ndarray:
        if isinstance(X, FeatureTable):
            X = X.matrix
        X = check_matrix(X)
        if X.shape[1] != self.forest.n_features_in_:
            raise ValidationError(
                f"feature dimension mismatch: got {X.shape[1]}, "
                f"forest expects {self.forest.n_features_in_}"
            )
        phi = shap_sum_matrix(self._flat, X, self.forest.n_features_in_)
        phi /= len(self.forest.trees_)
        return phi


def tree_shap(forest: ForestRegressor, x) -> np.ndarray:
    """Attribution vector for one sample via the polynomial fast path."""
    x = np.asarray(x, dtype=np.float64)
    return TreeShapExplainer(forest).shap_values(x[None, :])[0]


def brute_shap(forest: ForestRegressor, x, players=None) -> np.ndarray:
    """Subset-enumeration oracle for one sample.

    Enumerates every coalition of the active features (those the forest
    actually splits on, or an explicit superset passed as `players`) and
    accumulates weighted marginal contributions of the conditional value
    function. Features outside the active set keep attribution 0: the
    value function never reads them, so their marginals vanish.
    """
    forest._check_fitted()
    x = np.asarray(x, dtype=np.float64)
    if players is None:
        active = forest.used_features()
    else:
        active = np.array(sorted(int(f) for f in players), dtype=np.int64)
    u = len(active)
    if u > MAX_ORACLE_FEATURES:
        raise OracleIntractableError(
            f"oracle intractable: {u} active features exceeds {MAX_ORACLE_FEATURES}"
        )
    phi = np.zeros(forest.n_features_in_, dtype=np.float64)
    if u == 0:
        return phi

    v = np.empty(1 << u, dtype=np.float64)
    for mask in range(1 << u):
        subset = {int(active[i]) for i in range(u) if (mask >> i) & 1}
        v[mask] = forest_conditional(forest, x, subset)

    # coalition weights |S|! (u-|S|-1)! / u!, in log space to stay finite
    log_w = [
        math.lgamma(s + 1) + math.lgamma(u - s) - math.lgamma(u + 1) for s in range(u)
    ]
    weights = np.exp(log_w)

    for i in range(u):
        bit = 1 << i
        acc = 0.0
        for mask in range(1 << u):
            if mask & bit:
                continue
            acc += weights[int.bit_count(mask)] * (v[mask | bit] - v[mask])
        phi[active[i]] = acc
    return phi


def explain_dataset(forest: ForestRegressor, table: FeatureTable) -> ShapMatrix:
    """Attribution matrix for every row of the table, with the additivity
    invariant checked before the result is released."""
    table.validate()
    if table.fingerprint() != forest.schema_fingerprint_:
        raise ValidationError(
            "schema fingerprint mismatch between feature table and forest"
        )
    explainer = TreeShapExplainer(forest)
    values = explainer.shap_values(table.matrix)
    sm = ShapMatrix(
        values=values,
        base_value=explainer.base_value,
        sample_ids=table.sample_ids.copy(),
        schema_fingerprint=table.fingerprint(),
    )
    _check_additivity(forest, table.matrix, sm)
    return sm


def _check_additivity(forest, X, sm: ShapMatrix):
    pred = forest.predict(X)
    recon = sm.base_value + sm.values.sum(axis=1)
    err = np.abs(recon - pred)
    bound = ADDITIVITY_RTOL * np.maximum(1.0, np.abs(pred))
    if np.any(err > bound):
        worst = int(np.argmax(err - bound))
        raise InternalInvariantError(
            f"additivity violated at sample {worst}: "
            f"|base + sum(phi) - prediction| = {err[worst]:.3e}"
        )


def dependency_data(sm: ShapMatrix, table: FeatureTable, feature_id: int) -> np.ndarray:
    """(feature value, attribution) pairs in dataset order, one per sample."""
    if not (0 <= feature_id < sm.n_features):
        raise ValidationError(f"invalid feature id {feature_id}")
    if sm.schema_fingerprint != table.fingerprint():
        raise ValidationError("schema fingerprint mismatch")
    return np.column_stack([table.matrix[:, feature_id], sm.values[:, feature_id]])


def beeswarm_data(sm: ShapMatrix, table: FeatureTable, top_m: int) -> list:
    """Per-feature blocks of (sample id, feature-value percentile, phi),
    ordered by descending global importance (ties: lower feature id)."""
    if not (1 <= top_m <= sm.n_features):
        raise ValidationError(f"top_m must lie in [1, {sm.n_features}], got {top_m}")
    if sm.schema_fingerprint != table.fingerprint():
        raise ValidationError("schema fingerprint mismatch")
    order = importance_order(global_importance(sm))
    blocks = []
    for fid in order[:top_m]:
        pct = _rank_percentiles(table.matrix[:, fid])
        rows = np.column_stack([sm.sample_ids.astype(np.float64), pct, sm.values[:, fid]])
        blocks.append((int(fid), rows))
    return blocks


def _rank_percentiles(col: np.ndarray) -> np.ndarray:
    """Average-rank percentiles in [0, 1]: rank / (n - 1), ties averaged."""
    n = len(col)
    if n == 1:
        return np.array([0.5])
    order = np.argsort(col, kind="stable")
    sorted_vals = col[order]
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j)
        i = j + 1
    return ranks / (n - 1)


def save_shap_matrix(sm: ShapMatrix, schema: FeatureSchema, csv_path) -> None:
    df = pd.DataFrame(sm.values, columns=schema.header_labels())
    df.insert(0, "sample_id", sm.sample_ids)
    df.to_csv(csv_path, index=False)
    meta = {
        "version": "v1",
        "base_value": sm.base_value,
        "fingerprint": sm.schema_fingerprint,
    }
    with open(_meta_path(csv_path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_shap_matrix(csv_path) -> ShapMatrix:
    meta_path = _meta_path(csv_path)
    if not meta_path.is_file():
        raise ValidationError(f"missing attribution sidecar {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"unparseable sidecar {meta_path}: {exc}") from exc
    if meta.get("version") != "v1":
        raise ValidationError(f"unsupported attribution format version in {meta_path}")
    _, sample_ids, values = read_sample_matrix_csv(csv_path)
    return ShapMatrix(
        values=values,
        base_value=float(meta["base_value"]),
        sample_ids=sample_ids,
        schema_fingerprint=str(meta["fingerprint"]),
    )


def _meta_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(p.suffix + ".meta.json")
