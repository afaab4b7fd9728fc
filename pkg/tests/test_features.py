import numpy as np
import pytest

from specaudit import (
    BandAxis,
    FeatureTable,
    HyperPatch,
    PatchFeaturizer,
    ValidationError,
    extract_dataset,
    extract_patch,
)
from specaudit.features import FeatureSchema


def make_patch(cube, mask=None, lam=(400.0, 700.0)):
    cube = np.asarray(cube, dtype=np.float32)
    if mask is None:
        mask = np.ones(cube.shape[:2], dtype=bool)
    axis = BandAxis(cube.shape[2], *lam)
    return HyperPatch(cube=cube, mask=mask, axis=axis)


def test_constant_patch_spectral():
    patch = make_patch(np.full((3, 4, 5), 2.5))
    vec, schema = extract_patch(patch, spatial=False)
    assert schema.n_features == 4 * 5 - 3
    mean = vec[schema.group_ids("mean_spectrum")]
    assert np.allclose(mean, 2.5)
    for g in ("std_spectrum", "grad1", "grad2"):
        assert np.all(vec[schema.group_ids(g)] == 0)


def test_feature_counts_b150():
    patch = make_patch(np.ones((2, 2, 150)))
    vec, _ = extract_patch(patch, spatial=False)
    assert len(vec) == 597
    vec, _ = extract_patch(patch, spatial=True)
    assert len(vec) == 899


def test_two_pixel_hand_case():
    cube = np.zeros((1, 2, 3), dtype=np.float32)
    cube[0, 0, 0], cube[0, 1, 0] = 1.0, 3.0
    cube[:, :, 1:] = 2.0
    patch = make_patch(cube)
    vec, schema = extract_patch(patch, spatial=True)
    mean = vec[schema.group_ids("mean_spectrum")]
    std = vec[schema.group_ids("std_spectrum")]
    edge = vec[schema.group_ids("spatial_edge")]
    assert mean[0] == pytest.approx(2.0)
    assert std[0] == pytest.approx(1.0)  # population form
    assert edge[0] == pytest.approx(2.0)
    var = vec[schema.group_ids("spatial_var")]
    assert var[0] == pytest.approx(1.0)


def test_meta_features():
    cube = np.ones((4, 8, 3), dtype=np.float32)
    mask = np.zeros((4, 8), dtype=bool)
    mask[:3, :5] = True
    vec, schema = extract_patch(make_patch(cube, mask), spatial=True)
    meta = vec[schema.group_ids("meta")]
    assert meta[0] == pytest.approx(np.log(15))
    assert meta[1] == pytest.approx(8 / 4)


def test_masked_pixel_independence():
    rng = np.random.default_rng(0)
    cube = rng.uniform(0.2, 0.9, size=(5, 6, 4)).astype(np.float32)
    mask = rng.random((5, 6)) < 0.6
    mask[0, 0] = True  # keep non-empty
    base_vec, _ = extract_patch(make_patch(cube, mask), spatial=True)

    tampered = cube.copy()
    tampered[~mask] = 7.7  # only unmasked pixels change
    new_vec, _ = extract_patch(make_patch(tampered, mask), spatial=True)
    assert np.array_equal(base_vec, new_vec)


def test_edge_pairs_only_masked_neighbors():
    cube = np.zeros((1, 3, 2), dtype=np.float32)
    cube[0, :, 0] = [1.0, 5.0, 2.0]
    mask = np.array([[True, False, True]])
    vec, schema = extract_patch(make_patch(cube, mask), spatial=True)
    # no adjacent masked pair exists, so the edge feature is 0
    assert vec[schema.group_ids("spatial_edge")][0] == 0.0


def test_gradient_linearity_on_affine_spectrum():
    b = 12
    # quarter steps are exact in float32, so the spectrum is exactly affine
    spectrum = 0.25 + 0.25 * np.arange(b)
    cube = np.broadcast_to(spectrum, (3, 3, b)).astype(np.float32)
    vec, schema = extract_patch(make_patch(cube), spatial=False)
    grad1 = vec[schema.group_ids("grad1")]
    grad2 = vec[schema.group_ids("grad2")]
    assert np.all(grad1 == 0.25)
    assert np.all(grad2 == 0.0)


def test_schema_totality_and_provenance():
    schema = FeatureSchema.for_axis(BandAxis(10, 400.0, 700.0), spatial=True)
    schema.validate()
    counted = sum(len(schema.group_ids(g)) for g in schema.group_names())
    assert counted == schema.n_features
    # grad provenance is the lower band of the pair
    g1 = schema.group_ids("grad1")
    assert [schema.bands[i] for i in g1] == list(range(9))
    meta_ids = schema.group_ids("meta")
    assert all(schema.bands[i] is None for i in meta_ids)


def test_extract_dataset_shape_and_determinism(small_dataset):
    t1 = extract_dataset(small_dataset, spatial=False)
    t2 = extract_dataset(small_dataset, spatial=False)
    b = small_dataset.axis.n_bands
    assert t1.matrix.shape == (72, 4 * b - 3)
    assert np.array_equal(t1.matrix, t2.matrix)

    spatial = extract_dataset(small_dataset, spatial=True)
    assert spatial.matrix.shape[1] - t1.matrix.shape[1] == 2 * b + 2


def test_featurizer_transform_matches_extract(small_dataset):
    table = PatchFeaturizer(spatial=False).fit().transform(small_dataset)
    direct = extract_dataset(small_dataset, spatial=False)
    assert np.array_equal(table.matrix, direct.matrix)
    assert PatchFeaturizer(spatial=True).get_params() == {"spatial": True}


def test_csv_roundtrip(tmp_path, small_dataset, small_table):
    path = tmp_path / "features.csv"
    small_table.to_csv(path)
    loaded = FeatureTable.from_csv(path, small_dataset.axis, spatial=False)
    assert loaded.schema == small_table.schema
    assert np.array_equal(loaded.sample_ids, small_table.sample_ids)
    assert np.array_equal(loaded.matrix, small_table.matrix)
    header = path.read_text().splitlines()[0]
    assert header.startswith("sample_id,g:mean_spectrum|b:0,")
    assert loaded.fingerprint() == small_table.fingerprint()


def test_mixed_axes_rejected(small_dataset):
    import copy

    ds = copy.copy(small_dataset)
    ds.patches = list(small_dataset.patches)
    odd = ds.patches[3]
    ds.patches[3] = HyperPatch(
        cube=odd.cube, mask=odd.mask, axis=BandAxis(odd.axis.n_bands, 1.0, 2.0)
    )
    with pytest.raises(ValidationError, match="axis"):
        extract_dataset(ds, spatial=False)
