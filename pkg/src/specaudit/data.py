"""Core data model: band axes, hyperspectral patches, soil targets, datasets.

All types are plain values with explicit invariants; ``validate`` raises
ValidationError on the first violation so no partially-valid object
travels further down the pipeline.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

TARGET_NAMES = ("P", "K", "Mg", "pH")

TRAIN = "train"
TEST = "test"


@dataclass(frozen=True)
class BandAxis:
    """Linear wavelength axis: band i sits at an equally spaced position
    between the two endpoint wavelengths (nm)."""

    n_bands: int
    lambda_min_nm: float
    lambda_max_nm: float

    def __post_init__(self):
        if self.n_bands < 2:
            raise ValidationError(f"n_bands must be >= 2, got {self.n_bands}")
        if not (self.lambda_min_nm < self.lambda_max_nm):
            raise ValidationError(
                f"lambda_min_nm must be < lambda_max_nm, got "
                f"[{self.lambda_min_nm}, {self.lambda_max_nm}]"
            )

    def wavelength(self, band_index: int) -> float:
        return wavelength_of(band_index, self)

    def wavelengths(self) -> np.ndarray:
        """All band center wavelengths, strictly increasing."""
        return np.linspace(self.lambda_min_nm, self.lambda_max_nm, self.n_bands)

    def to_dict(self) -> dict:
        return {
            "n_bands": self.n_bands,
            "lambda_min_nm": self.lambda_min_nm,
            "lambda_max_nm": self.lambda_max_nm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BandAxis":
        try:
            return cls(int(d["n_bands"]), float(d["lambda_min_nm"]), float(d["lambda_max_nm"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed band axis record: {exc}") from exc


def wavelength_of(band_index: int, axis: BandAxis) -> float:
    """Center wavelength (nm) of a band under the linear axis mapping."""
    if not (0 <= band_index < axis.n_bands):
        raise ValidationError(
            f"band index out of range: {band_index} not in [0, {axis.n_bands})"
        )
    step = (axis.lambda_max_nm - axis.lambda_min_nm) / (axis.n_bands - 1)
    return axis.lambda_min_nm + band_index * step


@dataclass
class HyperPatch:
    """One field parcel: reflectance cube laid out [row][col][band] plus a
    per-pixel field mask (True = pixel belongs to the parcel)."""

    cube: np.ndarray  # (height, width, n_bands) float32, finite, >= 0
    mask: np.ndarray  # (height, width) bool, at least one True
    axis: BandAxis

    @property
    def height(self) -> int:
        return self.cube.shape[0]

    @property
    def width(self) -> int:
        return self.cube.shape[1]

    def validate(self, name="patch"):
        if self.cube.ndim != 3:
            raise ValidationError(f"{name}: cube must be 3-dimensional")
        if self.cube.shape[2] != self.axis.n_bands:
            raise ValidationError(
                f"{name}: cube has {self.cube.shape[2]} bands, axis declares {self.axis.n_bands}"
            )
        if self.mask.shape != self.cube.shape[:2]:
            raise ValidationError(
                f"{name}: mask shape {self.mask.shape} does not match cube {self.cube.shape[:2]}"
            )
        if self.cube.dtype != np.float32:
            raise ValidationError(
                f"{name}: cube must be float32 (the on-disk interchange type), "
                f"got {self.cube.dtype}"
            )
        if self.mask.dtype != np.bool_:
            raise ValidationError(f"{name}: mask must be boolean")
        if not self.mask.any():
            raise ValidationError(f"{name}: mask has no field pixels")
        if not np.all(np.isfinite(self.cube)):
            raise ValidationError(f"{name}: non-finite reflectance")
        if np.any(self.cube < 0):
            raise ValidationError(f"{name}: negative reflectance")
        return self

    def masked_pixels(self) -> np.ndarray:
        """Spectra of field pixels, shape (n_masked, n_bands)."""
        return self.cube[self.mask]

    def __eq__(self, other):
        if not isinstance(other, HyperPatch):
            return NotImplemented
        return (
            self.axis == other.axis
            and self.cube.shape == other.cube.shape
            and np.array_equal(self.cube, other.cube)
            and np.array_equal(self.mask, other.mask)
        )


@dataclass(frozen=True)
class SoilTargets:
    """Ground-truth soil parameters for one patch (Mehlich-3 style units)."""

    p: float  # mg/kg
    k: float  # mg/kg
    mg: float  # mg/kg
    ph: float  # unitless

    def __post_init__(self):
        for name in ("p", "k", "mg"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(f"target {name} must be finite and > 0, got {v}")
        if not np.isfinite(self.ph) or not (3.0 <= self.ph <= 10.0):
            raise ValidationError(f"pH must be finite and in [3.0, 10.0], got {self.ph}")

    def value_for(self, target_name: str) -> float:
        try:
            return {"P": self.p, "K": self.k, "Mg": self.mg, "pH": self.ph}[target_name]
        except KeyError:
            raise ValidationError(f"unknown target name {target_name!r}") from None

    def to_dict(self) -> dict:
        return {"p": self.p, "k": self.k, "mg": self.mg, "ph": self.ph}

    @classmethod
    def from_dict(cls, d: dict) -> "SoilTargets":
        try:
            return cls(float(d["p"]), float(d["k"]), float(d["mg"]), float(d["ph"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed targets record: {exc}") from exc


@dataclass
class Dataset:
    """Aligned patches, targets and train/test split labels."""

    patches: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    split: list = field(default_factory=list)
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.patches)

    @property
    def axis(self) -> BandAxis:
        return self.patches[0].axis

    def indices(self, split_label: str) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.split) if s == split_label], dtype=np.int64)

    def target_vector(self, target_name: str, split_label=None) -> np.ndarray:
        idx = range(len(self)) if split_label is None else self.indices(split_label)
        return np.array([self.targets[i].value_for(target_name) for i in idx], dtype=np.float64)

    def validate(self):
        if not (len(self.patches) == len(self.targets) == len(self.split)):
            raise ValidationError(
                f"misaligned dataset: {len(self.patches)} patches, "
                f"{len(self.targets)} targets, {len(self.split)} split labels"
            )
        if len(self.patches) == 0:
            raise ValidationError("dataset is empty")
        labels = set(self.split)
        if not labels <= {TRAIN, TEST}:
            raise ValidationError(f"unknown split labels: {sorted(labels - {TRAIN, TEST})}")
        if TRAIN not in labels or TEST not in labels:
            raise ValidationError("both train and test splits must be non-empty")
        axis = self.patches[0].axis
        for i, patch in enumerate(self.patches):
            if patch.axis != axis:
                raise ValidationError(f"patch {i} has a different band axis")
            patch.validate(name=f"patch {i}")
        return self

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.patches == other.patches
            and self.targets == other.targets
            and self.split == other.split
            and self.provenance == other.provenance
        )
