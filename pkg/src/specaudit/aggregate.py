"""Global importance, group attribution, and the band-by-transformation
aggregation behind the wavelength heatmap exports.

Conventions: global importance is the SUM of absolute attributions over
samples (not the mean); group importance takes the absolute value of each
sample's group sum (attribution semantics), with per-feature-absolute
importance semantics available behind a flag; heatmap cells hold the MEAN
absolute attribution so bins with different feature counts stay
comparable; all ties break toward the lower feature id.
"""

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import wavelength_of
from .errors import ValidationError
from .features import FeatureSchema

HEATMAP_STATISTIC = "mean_abs_shap"
NONSPECTRAL_LABEL = "nonspectral"


def global_importance(sm) -> np.ndarray:
    """Per-feature importance: sum over samples of |phi|."""
    if sm.n_samples < 1:
        raise ValidationError("importance needs at least one sample")
    return np.abs(sm.values).sum(axis=0)


def importance_order(imp: np.ndarray) -> np.ndarray:
    """Feature ids sorted by descending importance, ties by lower id."""
    imp = np.asarray(imp, dtype=np.float64)
    return np.lexsort((np.arange(len(imp)), -imp))


@dataclass(frozen=True)
class GroupMap:
    """Named, pairwise-disjoint feature-id sets."""

    groups: dict  # name -> np.ndarray of feature ids
    n_features: int

    def __post_init__(self):
        seen = set()
        for name, ids in self.groups.items():
            ids = np.asarray(ids)
            if ids.size and (ids.min() < 0 or ids.max() >= self.n_features):
                raise ValidationError(f"group {name!r} has out-of-range feature ids")
            overlap = seen.intersection(ids.tolist())
            if overlap:
                raise ValidationError(
                    f"group {name!r} overlaps earlier groups on ids {sorted(overlap)[:5]}"
                )
            seen.update(ids.tolist())

    @property
    def coverage(self) -> bool:
        return sum(len(ids) for ids in self.groups.values()) == self.n_features

    @classmethod
    def from_schema(cls, schema: FeatureSchema) -> "GroupMap":
        groups = {name: schema.group_ids(name) for name in schema.group_names()}
        return cls(groups=groups, n_features=schema.n_features)


def group_attribution(phi_row: np.ndarray, gm: GroupMap) -> dict:
    """Signed per-group sums of one attribution row."""
    phi_row = np.asarray(phi_row, dtype=np.float64)
    return {
        name: float(phi_row[np.asarray(ids, dtype=np.int64)].sum())
        for name, ids in gm.groups.items()
    }


def transformation_importance(sm, schema: FeatureSchema, mode="attribution") -> dict:
    """Per-transformation-group importance over the dataset.

    mode="attribution": sum over samples of |group sum| (the group is
    treated as one player). mode="importance": sum over samples and group
    features of |phi| (per-feature magnitudes, ignoring cancellation).
    """
    if sm.schema_fingerprint != schema.fingerprint():
        raise ValidationError("schema fingerprint mismatch")
    if mode not in ("attribution", "importance"):
        raise ValidationError(f"unknown mode {mode!r}")
    out = {}
    for name in schema.group_names():
        ids = schema.group_ids(name)
        block = sm.values[:, ids]
        if mode == "attribution":
            out[name] = float(np.abs(block.sum(axis=1)).sum())
        else:
            out[name] = float(np.abs(block).sum())
    return out


@dataclass
class BandGroupMatrix:
    """Mean |phi| per (transformation group, wavelength bin), plus a
    single-column block for groups' nonspectral features."""

    row_groups: list  # group names with at least one spectral feature
    bin_edges: np.ndarray  # (n_bins + 1,) wavelengths, nm
    cells: np.ndarray  # (n_groups, n_bins)
    filled: np.ndarray  # bool mask, False where no feature fell in the cell
    nonspectral_groups: list
    nonspectral_cells: np.ndarray  # (n_nonspectral_groups,)

    def bin_labels(self) -> list:
        return [
            f"{self.bin_edges[i]:.2f}-{self.bin_edges[i + 1]:.2f}nm"
            for i in range(len(self.bin_edges) - 1)
        ]


def band_transformation_matrix(sm, schema: FeatureSchema, n_bins: int) -> BandGroupMatrix:
    """Aggregate |phi| into equal-wavelength bins per transformation group."""
    if sm.schema_fingerprint != schema.fingerprint():
        raise ValidationError("schema fingerprint mismatch")
    if n_bins < 1:
        raise ValidationError(f"n_bins must be >= 1, got {n_bins}")
    axis = schema.axis
    edges = np.linspace(axis.lambda_min_nm, axis.lambda_max_nm, n_bins + 1)
    span = axis.lambda_max_nm - axis.lambda_min_nm
    abs_phi = np.abs(sm.values)

    spectral_rows, nonspectral_rows = [], []
    spectral_cells, spectral_filled, nonspectral_cells = [], [], []
    for name in schema.group_names():
        ids = schema.group_ids(name)
        bands = [schema.bands[i] for i in ids]
        spec_ids = [int(i) for i, b in zip(ids, bands) if b is not None]
        nonspec_ids = [int(i) for i, b in zip(ids, bands) if b is None]
        if spec_ids:
            cells = np.zeros(n_bins)
            filled = np.zeros(n_bins, dtype=bool)
            bin_of = {}
            for fid in spec_ids:
                w = wavelength_of(schema.bands[fid], axis)
                b = min(int((w - axis.lambda_min_nm) / span * n_bins), n_bins - 1)
                bin_of.setdefault(b, []).append(fid)
            for b, members in bin_of.items():
                cells[b] = abs_phi[:, members].mean()
                filled[b] = True
            spectral_rows.append(name)
            spectral_cells.append(cells)
            spectral_filled.append(filled)
        if nonspec_ids:
            nonspectral_rows.append(name)
            nonspectral_cells.append(float(abs_phi[:, nonspec_ids].mean()))

    return BandGroupMatrix(
        row_groups=spectral_rows,
        bin_edges=edges,
        cells=np.array(spectral_cells) if spectral_cells else np.zeros((0, n_bins)),
        filled=np.array(spectral_filled) if spectral_filled else np.zeros((0, n_bins), bool),
        nonspectral_groups=nonspectral_rows,
        nonspectral_cells=np.array(nonspectral_cells),
    )


def save_importance_csv(imp: np.ndarray, schema: FeatureSchema, path) -> None:
    bands = [(-1 if b is None else int(b)) for b in schema.bands]
    wavelengths = [
        float("nan") if b < 0 else wavelength_of(b, schema.axis) for b in bands
    ]
    df = pd.DataFrame(
        {
            "feature_id": np.arange(schema.n_features),
            "group": list(schema.groups),
            "band": bands,
            "wavelength_nm": wavelengths,
            "importance": imp,
        }
    )
    df.to_csv(path, index=False)


def save_groups_csv(group_imp: dict, path) -> None:
    pd.DataFrame(
        {"group": list(group_imp), "importance": list(group_imp.values())}
    ).to_csv(path, index=False)


def save_heatmap(bgm: BandGroupMatrix, csv_path, json_path) -> None:
    df = pd.DataFrame(bgm.cells, index=bgm.row_groups, columns=bgm.bin_labels())
    df.index.name = "group"
    df.to_csv(csv_path)
    sidecar = {
        "version": "v1",
        "statistic": HEATMAP_STATISTIC,
        "bin_edges": [float(e) for e in bgm.bin_edges],
        "filled": [[bool(v) for v in row] for row in bgm.filled],
        "nonspectral": {
            g: float(c) for g, c in zip(bgm.nonspectral_groups, bgm.nonspectral_cells)
        },
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
