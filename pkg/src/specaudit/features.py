"""Patch-to-feature extraction with a schema that tags every feature by
transformation group and band provenance.

Groups, in fixed order: mean_spectrum, std_spectrum, grad1, grad2, and in
spatial mode additionally spatial_var, spatial_edge and meta. Gradient
features take the lower band of their difference pair as provenance; meta
features are nonspectral. Spectral mode yields 4b-3 features, spatial mode
6b-1, for b bands.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .data import BandAxis, Dataset, HyperPatch
from .errors import ValidationError
from .validation import stable_digest

NONSPECTRAL = "NA"


@dataclass(frozen=True)
class TransformationGroup:
    name: str
    spatial_flag: bool


TRANSFORMATION_GROUPS = {
    g.name: g
    for g in (
        TransformationGroup("mean_spectrum", False),
        TransformationGroup("std_spectrum", False),
        TransformationGroup("grad1", False),
        TransformationGroup("grad2", False),
        TransformationGroup("spatial_var", True),
        TransformationGroup("spatial_edge", True),
        TransformationGroup("meta", True),
    )
}

SPECTRAL_ORDER = ("mean_spectrum", "std_spectrum", "grad1", "grad2")
SPATIAL_ORDER = ("spatial_var", "spatial_edge", "meta")


@dataclass(frozen=True)
class FeatureSchema:
    """Per-feature (group, band provenance) tags; feature ids are positions."""

    groups: tuple  # group name per feature
    bands: tuple  # band index per feature, or None for nonspectral
    axis: BandAxis
    spatial: bool

    @property
    def n_features(self) -> int:
        return len(self.groups)

    def validate(self):
        if len(self.groups) != len(self.bands):
            raise ValidationError("schema groups and bands are misaligned")
        for g in set(self.groups):
            if g not in TRANSFORMATION_GROUPS:
                raise ValidationError(f"unknown transformation group {g!r}")
        for b in self.bands:
            if b is not None and not (0 <= b < self.axis.n_bands):
                raise ValidationError(f"band provenance {b} outside axis")
        return self

    def group_ids(self, name: str) -> np.ndarray:
        return np.array([i for i, g in enumerate(self.groups) if g == name], dtype=np.int64)

    def group_names(self) -> list:
        seen = []
        for g in self.groups:
            if g not in seen:
                seen.append(g)
        return seen

    def header_labels(self) -> list:
        return [
            f"g:{g}|b:{NONSPECTRAL if b is None else b}"
            for g, b in zip(self.groups, self.bands)
        ]

    def fingerprint(self) -> str:
        return stable_digest(
            {
                "groups": list(self.groups),
                "bands": [-1 if b is None else int(b) for b in self.bands],
                "axis": self.axis.to_dict(),
                "spatial": self.spatial,
            }
        )

    @classmethod
    def for_axis(cls, axis: BandAxis, spatial: bool) -> "FeatureSchema":
        b = axis.n_bands
        groups, bands = [], []

        def block(name, provenance):
            groups.extend([name] * len(provenance))
            bands.extend(provenance)

        block("mean_spectrum", list(range(b)))
        block("std_spectrum", list(range(b)))
        block("grad1", list(range(b - 1)))
        block("grad2", list(range(b - 2)))
        if spatial:
            block("spatial_var", list(range(b)))
            block("spatial_edge", list(range(b)))
            block("meta", [None, None])
        return cls(groups=tuple(groups), bands=tuple(bands), axis=axis, spatial=spatial)

    @classmethod
    def from_labels(cls, labels, axis: BandAxis, spatial: bool) -> "FeatureSchema":
        groups, bands = [], []
        for lab in labels:
            try:
                g_part, b_part = lab.split("|")
                g = g_part.split("g:", 1)[1]
                b = b_part.split("b:", 1)[1]
                band = None if b == NONSPECTRAL else int(b)
            except (ValueError, IndexError):
                raise ValidationError(f"malformed feature header {lab!r}") from None
            groups.append(g)
            bands.append(band)
        return cls(groups=tuple(groups), bands=tuple(bands), axis=axis, spatial=spatial).validate()


@dataclass
class FeatureTable:
    schema: FeatureSchema
    matrix: np.ndarray  # (n_samples, n_features) float64, finite
    sample_ids: np.ndarray  # (n_samples,) int64

    @property
    def n_samples(self) -> int:
        return self.matrix.shape[0]

    def validate(self):
        self.schema.validate()
        if self.matrix.ndim != 2 or self.matrix.shape[1] != self.schema.n_features:
            raise ValidationError(
                f"feature matrix shape {self.matrix.shape} does not match "
                f"schema width {self.schema.n_features}"
            )
        if self.matrix.size and not np.all(np.isfinite(self.matrix)):
            raise ValidationError("feature matrix contains non-finite values")
        if len(self.sample_ids) != self.matrix.shape[0]:
            raise ValidationError("sample_ids misaligned with feature matrix")
        return self

    def fingerprint(self) -> str:
        return self.schema.fingerprint()

    def rows(self, indices) -> "FeatureTable":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureTable(
            schema=self.schema, matrix=self.matrix[idx], sample_ids=self.sample_ids[idx]
        )

    def to_csv(self, path) -> None:
        df = pd.DataFrame(self.matrix, columns=self.schema.header_labels())
        df.insert(0, "sample_id", self.sample_ids)
        df.to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path, axis: BandAxis, spatial: bool) -> "FeatureTable":
        labels, sample_ids, matrix = read_sample_matrix_csv(path)
        schema = FeatureSchema.from_labels(labels, axis, spatial)
        table = cls(schema=schema, matrix=matrix, sample_ids=sample_ids)
        return table.validate()


def read_sample_matrix_csv(path):
    """Read a sample_id + feature-columns CSV, keeping duplicate header
    labels verbatim (pandas would mangle them)."""
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header or header[0] != "sample_id":
        raise ValidationError(f"{path}: missing sample_id column")
    body = pd.read_csv(
        path, skiprows=1, header=None, float_precision="round_trip", dtype=np.float64
    )
    if body.shape[1] != len(header):
        raise ValidationError(f"{path}: row width does not match header")
    sample_ids = body.iloc[:, 0].to_numpy(dtype=np.int64)
    matrix = body.iloc[:, 1:].to_numpy(dtype=np.float64)
    return header[1:], sample_ids, matrix


def extract_patch(patch: HyperPatch, spatial: bool):
    """Feature vector and schema for one patch."""
    patch.validate()
    schema = FeatureSchema.for_axis(patch.axis, spatial)
    pixels = patch.masked_pixels().astype(np.float64)  # (n_masked, b)

    mean = pixels.mean(axis=0)
    std = pixels.std(axis=0)  # population form: defined for one pixel
    grad1 = np.diff(mean)
    grad2 = np.diff(mean, n=2)
    parts = [mean, std, grad1, grad2]

    if spatial:
        parts.append(pixels.var(axis=0))
        parts.append(_edge_contrast(patch))
        n_masked = pixels.shape[0]
        parts.append(np.array([np.log(n_masked), patch.width / patch.height]))

    return np.concatenate(parts), schema


def _edge_contrast(patch: HyperPatch) -> np.ndarray:
    """Per-band mean |difference| over horizontally adjacent masked pairs."""
    pair = patch.mask[:, :-1] & patch.mask[:, 1:]
    if not pair.any():
        return np.zeros(patch.axis.n_bands)
    diff = np.abs(
        patch.cube[:, :-1, :].astype(np.float64) - patch.cube[:, 1:, :].astype(np.float64)
    )
    return diff[pair].mean(axis=0)


def extract_dataset(ds: Dataset, spatial: bool) -> FeatureTable:
    """Feature table in dataset order; all patches must share one axis."""
    ds.validate()
    axis = ds.axis
    schema = FeatureSchema.for_axis(axis, spatial)
    rows = np.empty((len(ds), schema.n_features), dtype=np.float64)
    for i, patch in enumerate(ds.patches):
        if patch.axis != axis:
            raise ValidationError(f"patch {i} has a different band axis")
        rows[i], _ = extract_patch(patch, spatial)
    table = FeatureTable(
        schema=schema, matrix=rows, sample_ids=np.arange(len(ds), dtype=np.int64)
    )
    return table.validate()


class PatchFeaturizer(BaseEstimator, TransformerMixin):
    """Stateless transformer wrapper so extraction composes with sklearn
    pipelines. `transform` accepts a Dataset or a list of patches and
    returns a FeatureTable."""

    def __init__(self, spatial=False):
        self.spatial = spatial

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> FeatureTable:
        patches = X.patches if isinstance(X, Dataset) else list(X)
        if not patches:
            raise ValidationError("no patches to featurize")
        axis = patches[0].axis
        schema = FeatureSchema.for_axis(axis, self.spatial)
        rows = np.empty((len(patches), schema.n_features), dtype=np.float64)
        for i, patch in enumerate(patches):
            if patch.axis != axis:
                raise ValidationError(f"patch {i} has a different band axis")
            rows[i], _ = extract_patch(patch, self.spatial)
        return FeatureTable(
            schema=schema, matrix=rows, sample_ids=np.arange(len(patches), dtype=np.int64)
        ).validate()
