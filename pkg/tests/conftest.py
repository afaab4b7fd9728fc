import numpy as np
import pytest

from specaudit import (
    BandAxis,
    ForestRegressor,
    SyntheticConfig,
    extract_dataset,
    gen_synthetic,
)
from specaudit.forest import TreeArrays


def small_config(seed=7, noise_sd=0.01):
    """Desk-scale config shared by the slower pipeline tests. Planted bands
    sit further apart than the truncated dip support so signals stay
    separable per target."""
    return SyntheticConfig(
        n_train=48,
        n_test=24,
        axis=BandAxis(20, 462.08, 938.37),
        planted_bands={"P": (2,), "K": (7,), "Mg": (12,), "pH": (17,)},
        patch_size_range=(6, 10),
        noise_sd=noise_sd,
        outlier_fraction=0.05,
        seed=seed,
    )


@pytest.fixture(scope="session")
def small_dataset():
    return gen_synthetic(small_config())


@pytest.fixture(scope="session")
def small_table(small_dataset):
    return extract_dataset(small_dataset, spatial=False)


@pytest.fixture(scope="session")
def fitted_p_forest(small_dataset, small_table):
    table = small_table.rows(small_dataset.indices("train"))
    y = small_dataset.target_vector("P", "train")
    return ForestRegressor(n_trees=30, max_depth=8, seed=11, target_name="P").fit(table, y)


def manual_forest(trees, n_features):
    """Wrap hand-built trees in a fitted-looking ForestRegressor."""
    f = ForestRegressor(n_trees=len(trees), seed=0)
    f.trees_ = list(trees)
    f.baseline_ = 0.0
    f.n_features_in_ = n_features
    f.schema_fingerprint_ = "manual"
    return f


def stump(feature=0, threshold=0.5, left_value=0.0, right_value=1.0,
          left_cover=50.0, right_cover=50.0):
    return TreeArrays(
        feature=np.array([feature, -1, -1], dtype=np.int64),
        threshold=np.array([threshold, 0.0, 0.0]),
        left=np.array([1, -1, -1], dtype=np.int64),
        right=np.array([2, -1, -1], dtype=np.int64),
        value=np.array([0.0, left_value, right_value]),
        cover=np.array([left_cover + right_cover, left_cover, right_cover]),
    )


def single_leaf(value=5.0, cover=10.0):
    return TreeArrays(
        feature=np.array([-1], dtype=np.int64),
        threshold=np.array([0.0]),
        left=np.array([-1], dtype=np.int64),
        right=np.array([-1], dtype=np.int64),
        value=np.array([value]),
        cover=np.array([cover]),
    )


def depth2_tree():
    """Root splits feature 0 (thr .5, covers 6/4); its left child splits
    feature 1 (thr .5, covers 2/4); leaves 0, 4, 10."""
    return TreeArrays(
        feature=np.array([0, 1, -1, -1, -1], dtype=np.int64),
        threshold=np.array([0.5, 0.5, 0.0, 0.0, 0.0]),
        left=np.array([1, 2, -1, -1, -1], dtype=np.int64),
        right=np.array([4, 3, -1, -1, -1], dtype=np.int64),
        value=np.array([0.0, 0.0, 0.0, 4.0, 10.0]),
        cover=np.array([10.0, 6.0, 2.0, 4.0, 4.0]),
    )
