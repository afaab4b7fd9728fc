"""Importance-guided feature selection with retraining and MAE parity.

Selection is a pure function of the train split: the full model is fitted
on train rows, explained on train rows, and the top-k features by global
importance are kept. The pruned model refits with identical params but a
derived seed (so the comparison does not share bootstrap noise), and both
models are scored by MAE on the held-out test split.
"""

from dataclasses import dataclass, field

import numpy as np

from .aggregate import global_importance, importance_order
from .audit import mae
from .data import TEST, TRAIN, Dataset
from .errors import ValidationError
from .features import FeatureTable
from .forest import ForestParams, ForestRegressor
from .shapley import ShapMatrix, TreeShapExplainer
from .validation import derive_seed, stable_digest

K_LADDER = (1, 2, 3, 5, 8, 13, 21, 34)


@dataclass
class PruneResult:
    target_name: str
    selected_ids: list  # descending importance, ties toward lower id
    k: int
    baseline_mae: float
    pruned_mae: float
    ratio: float
    fit_seed: int
    selection_hash: str

    def percent_delta(self) -> str:
        return format_percent_delta(self.ratio)

    def to_dict(self) -> dict:
        return {
            "target_name": self.target_name,
            "selected_ids": [int(i) for i in self.selected_ids],
            "k": self.k,
            "baseline_mae": self.baseline_mae,
            "pruned_mae": self.pruned_mae,
            "ratio": self.ratio,
            "percent_delta": self.percent_delta(),
            "fit_seed": self.fit_seed,
            "selection_hash": self.selection_hash,
        }


@dataclass
class MinimalKResult:
    target_name: str
    k: int  # smallest passing ladder point, or -1 when none passed
    tol: float
    ladder: list  # (k, ratio) pairs actually evaluated
    results: dict = field(default_factory=dict)  # k -> PruneResult

    @property
    def found(self) -> bool:
        return self.k >= 0


def format_percent_delta(ratio: float) -> str:
    delta = int(round((ratio - 1.0) * 100))
    return f"(+{delta}%)" if delta > 0 else f"({delta}%)"


def select_top_k(imp: np.ndarray, k: int) -> np.ndarray:
    """Ids of the k largest importances, descending, ties by lower id."""
    imp = np.asarray(imp, dtype=np.float64)
    if not (1 <= k <= len(imp)):
        raise ValidationError(f"k must lie in [1, {len(imp)}], got {k}")
    return importance_order(imp)[:k]


@dataclass
class _SelectionContext:
    """Train-split artifacts reused across ladder points for one target."""

    target_name: str
    full_forest: ForestRegressor
    importance: np.ndarray
    train_table: FeatureTable
    test_table: FeatureTable
    y_train: np.ndarray
    y_test: np.ndarray
    baseline_mae: float
    fit_seed: int


def _prepare_selection(ds: Dataset, table: FeatureTable, target: str,
                       params: ForestParams) -> _SelectionContext:
    params.validate()
    train_idx = ds.indices(TRAIN)
    test_idx = ds.indices(TEST)
    if len(test_idx) == 0:
        raise ValidationError("empty test split")
    train_table = table.rows(train_idx)
    test_table = table.rows(test_idx)
    y_train = ds.target_vector(target, TRAIN)
    y_test = ds.target_vector(target, TEST)

    fit_seed = derive_seed(params.seed, "fit", target)
    full = ForestRegressor.from_params(
        ForestParams(**{**params.to_dict(), "seed": fit_seed}), target_name=target
    ).fit(train_table, y_train)
    sm = _train_shap(full, train_table)
    imp = global_importance(sm)
    baseline_mae = mae(full.predict(test_table), y_test)
    return _SelectionContext(
        target_name=target,
        full_forest=full,
        importance=imp,
        train_table=train_table,
        test_table=test_table,
        y_train=y_train,
        y_test=y_test,
        baseline_mae=baseline_mae,
        fit_seed=fit_seed,
    )


def _train_shap(forest: ForestRegressor, train_table: FeatureTable) -> ShapMatrix:
    explainer = TreeShapExplainer(forest)
    return ShapMatrix(
        values=explainer.shap_values(train_table.matrix),
        base_value=explainer.base_value,
        sample_ids=train_table.sample_ids.copy(),
        schema_fingerprint=train_table.fingerprint(),
    )


def _retrain_point(ctx: _SelectionContext, k: int, params: ForestParams) -> PruneResult:
    selected = select_top_k(ctx.importance, k)
    refit_seed = derive_seed(params.seed, "refit", ctx.target_name, k)
    pruned = ForestRegressor.from_params(
        ForestParams(**{**params.to_dict(), "seed": refit_seed}),
        target_name=ctx.target_name,
    ).fit(ctx.train_table.matrix[:, selected], ctx.y_train)
    pruned_mae = mae(pruned.predict(ctx.test_table.matrix[:, selected]), ctx.y_test)
    return PruneResult(
        target_name=ctx.target_name,
        selected_ids=[int(i) for i in selected],
        k=int(k),
        baseline_mae=ctx.baseline_mae,
        pruned_mae=pruned_mae,
        ratio=pruned_mae / ctx.baseline_mae,
        fit_seed=refit_seed,
        selection_hash=stable_digest([int(i) for i in selected]),
    )


def prune_and_retrain(ds: Dataset, table: FeatureTable, target: str, k: int,
                      params: ForestParams) -> PruneResult:
    """Full-model fit, train-split explanation, top-k selection, refit,
    and test-split MAE comparison for one target and one k."""
    ctx = _prepare_selection(ds, table, target, params)
    return _retrain_point(ctx, k, params)


def minimal_k(ds: Dataset, table: FeatureTable, target: str, params: ForestParams,
              tol: float, ladder=K_LADDER) -> MinimalKResult:
    """Smallest ladder k whose test-MAE ratio stays within 1 + tol.

    The ladder is fixed (capped at the feature count) because the ratio is
    not monotone in k; evaluation stops at the first passing point. When
    nothing passes, every evaluated ratio is reported with k = -1.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    ctx = _prepare_selection(ds, table, target, params)
    n_features = table.schema.n_features
    points = sorted({min(int(k), n_features) for k in ladder})
    evaluated, results = [], {}
    for k in points:
        res = _retrain_point(ctx, k, params)
        evaluated.append((k, res.ratio))
        results[k] = res
        if res.ratio <= 1.0 + tol:
            return MinimalKResult(
                target_name=target, k=k, tol=tol, ladder=evaluated, results=results
            )
    return MinimalKResult(
        target_name=target, k=-1, tol=tol, ladder=evaluated, results=results
    )
