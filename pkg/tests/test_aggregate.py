import numpy as np
import pytest

from specaudit import (
    BandAxis,
    ForestRegressor,
    GroupMap,
    ValidationError,
    band_transformation_matrix,
    explain_dataset,
    extract_dataset,
    gen_synthetic,
    global_importance,
    group_attribution,
    transformation_importance,
    wavelength_of,
)
from specaudit.features import FeatureSchema
from specaudit.shapley import ShapMatrix
from conftest import small_config


def matrix_sm(values, schema=None, fingerprint="fp"):
    values = np.asarray(values, dtype=np.float64)
    return ShapMatrix(
        values=values,
        base_value=0.0,
        sample_ids=np.arange(values.shape[0], dtype=np.int64),
        schema_fingerprint=schema.fingerprint() if schema else fingerprint,
    )


def test_global_importance_hand_sum():
    sm = matrix_sm([[1.0, -2.0], [-1.0, 0.0]])
    assert global_importance(sm) == pytest.approx([2.0, 2.0])


def test_global_importance_zero_and_doubling():
    sm = matrix_sm(np.zeros((3, 4)))
    assert np.array_equal(global_importance(sm), np.zeros(4))

    rng = np.random.default_rng(0)
    vals = rng.normal(size=(5, 3))
    once = global_importance(matrix_sm(vals))
    twice = global_importance(matrix_sm(np.vstack([vals, vals])))
    assert twice == pytest.approx(2 * once)


def test_group_attribution_hand_case():
    gm = GroupMap(groups={"A": np.array([0, 1]), "B": np.array([2])}, n_features=3)
    out = group_attribution(np.array([0.5, -0.2, 0.1]), gm)
    assert out["A"] == pytest.approx(0.3)
    assert out["B"] == pytest.approx(0.1)
    assert gm.coverage


def test_group_attribution_empty_group():
    gm = GroupMap(groups={"A": np.array([0]), "none": np.array([], dtype=int)}, n_features=2)
    out = group_attribution(np.array([1.0, 2.0]), gm)
    assert out["none"] == 0.0
    assert not gm.coverage


def test_overlapping_groups_rejected():
    with pytest.raises(ValidationError, match="overlap"):
        GroupMap(groups={"A": np.array([0, 1]), "B": np.array([1, 2])}, n_features=3)


def test_out_of_range_group_rejected():
    with pytest.raises(ValidationError, match="out-of-range"):
        GroupMap(groups={"A": np.array([0, 5])}, n_features=3)


def test_covering_group_equals_total(small_table, fitted_p_forest):
    sm = explain_dataset(fitted_p_forest, small_table)
    gm = GroupMap(
        groups={"all": np.arange(small_table.schema.n_features)},
        n_features=small_table.schema.n_features,
    )
    pred = fitted_p_forest.predict(small_table)
    for j in range(sm.n_samples):
        total = group_attribution(sm.values[j], gm)["all"]
        assert total == pytest.approx(pred[j] - sm.base_value, abs=1e-6)


def test_conservation_exact(small_table, fitted_p_forest):
    sm = explain_dataset(fitted_p_forest, small_table)
    gm = GroupMap.from_schema(small_table.schema)
    assert gm.coverage
    for j in range(sm.n_samples):
        parts = group_attribution(sm.values[j], gm)
        assert abs(sum(parts.values()) - sm.values[j].sum()) <= 1e-12


def test_transformation_importance_single_group_formula():
    axis = BandAxis(6, 400.0, 700.0)
    schema = FeatureSchema(
        groups=("mean_spectrum",) * 6, bands=tuple(range(6)), axis=axis, spatial=False
    )
    rng = np.random.default_rng(1)
    vals = rng.normal(size=(9, 6))
    sm = matrix_sm(vals, schema=schema)
    out = transformation_importance(sm, schema)
    assert out == {"mean_spectrum": pytest.approx(np.abs(vals.sum(axis=1)).sum())}


def test_transformation_importance_modes(small_table, fitted_p_forest):
    sm = explain_dataset(fitted_p_forest, small_table)
    attribution = transformation_importance(sm, small_table.schema, mode="attribution")
    importance = transformation_importance(sm, small_table.schema, mode="importance")
    for g in attribution:
        assert attribution[g] <= importance[g] + 1e-12  # triangle inequality
    with pytest.raises(ValidationError):
        transformation_importance(sm, small_table.schema, mode="bogus")


def test_transformation_importance_dominant_group(small_table):
    schema = small_table.schema
    vals = np.zeros((4, schema.n_features))
    g1 = schema.group_ids("grad1")
    vals[:, g1] = 1.0
    sm = matrix_sm(vals, schema=schema)
    out = transformation_importance(sm, schema)
    assert max(out, key=out.get) == "grad1"
    assert all(v == 0.0 for g, v in out.items() if g != "grad1")


def test_dominant_group_stable_across_seeds():
    # needs enough trees that group totals average out tree-draw randomness
    winners = set()
    for seed in range(5):
        ds = gen_synthetic(small_config(seed=200 + seed, noise_sd=0.0))
        table = extract_dataset(ds, spatial=False)
        y = ds.target_vector("P", "train")
        f = ForestRegressor(n_trees=60, max_depth=8, seed=seed).fit(
            table.rows(ds.indices("train")), y
        )
        sm = explain_dataset(f, table)
        out = transformation_importance(sm, table.schema)
        winners.add(max(out, key=out.get))
    assert winners == {"mean_spectrum"}


def test_band_matrix_identity_binning(small_table, fitted_p_forest):
    sm = explain_dataset(fitted_p_forest, small_table)
    schema = small_table.schema
    n_bands = schema.axis.n_bands
    bgm = band_transformation_matrix(sm, schema, n_bins=n_bands)
    row = bgm.row_groups.index("mean_spectrum")
    mean_ids = schema.group_ids("mean_spectrum")
    per_feature = np.abs(sm.values[:, mean_ids]).mean(axis=0)
    assert bgm.cells[row] == pytest.approx(per_feature)
    assert bgm.filled[row].all()


def test_band_matrix_zero_matrix(small_table):
    schema = small_table.schema
    sm = matrix_sm(np.zeros((3, schema.n_features)), schema=schema)
    bgm = band_transformation_matrix(sm, schema, n_bins=5)
    assert np.all(bgm.cells == 0.0)
    assert bgm.bin_edges[0] == schema.axis.lambda_min_nm
    assert bgm.bin_edges[-1] == schema.axis.lambda_max_nm


def test_band_matrix_planted_bin_dominates():
    # mild pixel noise makes high-amplitude bands the preferred splits, so
    # attribution mass concentrates at the planted band; with exactly zero
    # noise every dip-touched band is an equivalent predictor and the
    # argmax wanders between neighbouring bins
    cfg = small_config(seed=203, noise_sd=0.01)
    ds = gen_synthetic(cfg)
    table = extract_dataset(ds, spatial=False)
    f = ForestRegressor(n_trees=60, max_depth=8, seed=3).fit(
        table.rows(ds.indices("train")), ds.target_vector("P", "train")
    )
    sm = explain_dataset(f, table)
    n_bins = 10
    bgm = band_transformation_matrix(sm, table.schema, n_bins)
    axis = table.schema.axis
    w = wavelength_of(cfg.planted_bands["P"][0], axis)
    span = axis.lambda_max_nm - axis.lambda_min_nm
    planted_bin = min(int((w - axis.lambda_min_nm) / span * n_bins), n_bins - 1)
    row = bgm.row_groups.index("mean_spectrum")
    assert int(np.argmax(bgm.cells[row])) == planted_bin


def test_band_matrix_nonspectral_block(small_dataset):
    table = extract_dataset(small_dataset, spatial=True)
    schema = table.schema
    vals = np.ones((2, schema.n_features))
    sm = matrix_sm(vals, schema=schema)
    bgm = band_transformation_matrix(sm, schema, n_bins=4)
    assert bgm.nonspectral_groups == ["meta"]
    assert bgm.nonspectral_cells == pytest.approx([1.0])
    assert "meta" not in bgm.row_groups


def test_scale_equivariance(small_table, fitted_p_forest):
    sm = explain_dataset(fitted_p_forest, small_table)
    scaled = matrix_sm(3.0 * sm.values, schema=small_table.schema)
    assert global_importance(scaled) == pytest.approx(3.0 * global_importance(sm))
    a = band_transformation_matrix(sm, small_table.schema, 5)
    b = band_transformation_matrix(scaled, small_table.schema, 5)
    assert b.cells == pytest.approx(3.0 * a.cells)
    ta = transformation_importance(sm, small_table.schema)
    tb = transformation_importance(scaled, small_table.schema)
    for g in ta:
        assert tb[g] == pytest.approx(3.0 * ta[g])


def test_fingerprint_mismatch_rejected(small_table):
    sm = matrix_sm(np.zeros((2, small_table.schema.n_features)), fingerprint="other")
    with pytest.raises(ValidationError, match="fingerprint"):
        transformation_importance(sm, small_table.schema)
    with pytest.raises(ValidationError, match="fingerprint"):
        band_transformation_matrix(sm, small_table.schema, 4)
