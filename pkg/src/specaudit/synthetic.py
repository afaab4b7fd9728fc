"""Synthetic dataset generator with planted spectral dependencies.

Each patch carries one spectrum per pixel: a fixed smooth base curve minus
Gaussian absorption dips centered at configured bands, where the dip depth
grows monotonically with the corresponding soil-parameter value. With zero
noise the masked mean reflectance at a planted band is therefore a strictly
decreasing function of that target across samples, which is what the
attribution and pruning test harnesses rely on.

Default target marginals are chosen for plausibility, not fidelity to any
particular soil survey: P/K/Mg are right-skewed (log-normal), pH is a
symmetric truncated normal, and a configurable fraction of samples comes
from an inflated-variance tail.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import TARGET_NAMES, TEST, TRAIN, BandAxis, Dataset, HyperPatch, SoilTargets
from .errors import ConfigError
from .validation import stable_digest

# Absorption geometry. Profiles are truncated at +-4 sigma so that dips
# planted at well-separated bands never bleed into each other.
DIP_MAX_DEPTH = 0.35
DIP_SIGMA_BANDS = 1.2
DIP_SUPPORT_SIGMAS = 4.0

# Per-target marginal parameters: (median-scale, log-sd) for the log-normal
# targets, (mean, sd, low, high) for pH. The median-scale value doubles as
# the reference constant of the dip-depth response curve.
LOGNORMAL_PARAMS = {"P": (60.0, 0.35), "K": (210.0, 0.30), "Mg": (120.0, 0.30)}
PH_PARAMS = (6.4, 0.45, 3.0, 10.0)
OUTLIER_SD_FACTOR = 3.0


# Fractional positions of the default planted bands along the axis, spaced
# far enough apart that truncated dip profiles never overlap.
DEFAULT_PLANTED_FRACTIONS = {"P": 8 / 49, "K": 20 / 49, "Mg": 33 / 49, "pH": 44 / 49}


def default_planted_bands(n_bands: int) -> dict:
    return {
        name: (int(round(frac * (n_bands - 1))),)
        for name, frac in DEFAULT_PLANTED_FRACTIONS.items()
    }


@dataclass(frozen=True)
class SyntheticConfig:
    n_train: int = 200
    n_test: int = 80
    axis: BandAxis = field(default_factory=lambda: BandAxis(50, 462.08, 938.37))
    planted_bands: dict = field(default_factory=lambda: default_planted_bands(50))
    patch_size_range: tuple = (8, 24)
    noise_sd: float = 0.01
    outlier_fraction: float = 0.05
    seed: int = 0

    def validate(self):
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must both be >= 1")
        min_side, max_side = self.patch_size_range
        if min_side > max_side:
            raise ConfigError(
                f"degenerate patch size range: min_side {min_side} > max_side {max_side}"
            )
        if min_side < 4:
            raise ConfigError(f"min_side must be >= 4, got {min_side}")
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not (0.0 <= self.outlier_fraction <= 0.2):
            raise ConfigError(
                f"outlier_fraction must lie in [0, 0.2], got {self.outlier_fraction}"
            )
        for name in TARGET_NAMES:
            bands = self.planted_bands.get(name, ())
            if not (1 <= len(bands) <= 3):
                raise ConfigError(f"target {name} needs 1-3 planted bands, got {len(bands)}")
            for b in bands:
                if not (0 <= int(b) < self.axis.n_bands):
                    raise ConfigError(
                        f"planted band {b} for {name} outside [0, {self.axis.n_bands})"
                    )
        extra = set(self.planted_bands) - set(TARGET_NAMES)
        if extra:
            raise ConfigError(f"planted_bands has unknown targets: {sorted(extra)}")
        return self

    def to_dict(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_test": self.n_test,
            "axis": self.axis.to_dict(),
            "planted_bands": {k: list(map(int, v)) for k, v in self.planted_bands.items()},
            "patch_size_range": list(self.patch_size_range),
            "noise_sd": self.noise_sd,
            "outlier_fraction": self.outlier_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        try:
            return cls(
                n_train=int(d["n_train"]),
                n_test=int(d["n_test"]),
                axis=BandAxis.from_dict(d["axis"]),
                planted_bands={k: tuple(int(b) for b in v) for k, v in d["planted_bands"].items()},
                patch_size_range=tuple(d["patch_size_range"]),
                noise_sd=float(d["noise_sd"]),
                outlier_fraction=float(d["outlier_fraction"]),
                seed=int(d["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed synthetic config: {exc}") from exc


def base_curve(n_bands: int) -> np.ndarray:
    """Fixed smooth reflectance baseline shared by every sample."""
    i = np.arange(n_bands, dtype=np.float64)
    t = i / (n_bands - 1)
    return 0.55 + 0.12 * np.sin(2.0 * np.pi * (0.8 * t + 0.05))


def dip_profile(n_bands: int, center: int) -> np.ndarray:
    """Unit-depth Gaussian absorption profile, truncated to +-4 sigma."""
    i = np.arange(n_bands, dtype=np.float64)
    prof = np.exp(-0.5 * ((i - center) / DIP_SIGMA_BANDS) ** 2)
    prof[np.abs(i - center) > DIP_SUPPORT_SIGMAS * DIP_SIGMA_BANDS] = 0.0
    return prof


def dip_depth(target_name: str, value) -> np.ndarray:
    """Dip depth response: strictly increasing, bounded by DIP_MAX_DEPTH."""
    ref = LOGNORMAL_PARAMS[target_name][0] if target_name != "pH" else PH_PARAMS[0]
    v = np.asarray(value, dtype=np.float64)
    return DIP_MAX_DEPTH * v / (v + ref)


def _draw_targets(rng: np.random.Generator, n: int, outlier: np.ndarray) -> list:
    values = {}
    for name in ("P", "K", "Mg"):
        median, sigma = LOGNORMAL_PARAMS[name]
        sd = np.where(outlier, OUTLIER_SD_FACTOR * sigma, sigma)
        values[name] = np.exp(np.log(median) + sd * rng.standard_normal(n))
    mean, sigma, lo, hi = PH_PARAMS
    sd = np.where(outlier, OUTLIER_SD_FACTOR * sigma, sigma)
    ph = mean + sd * rng.standard_normal(n)
    # rejection resampling keeps the truncated-normal shape symmetric
    bad = (ph < lo) | (ph > hi)
    while bad.any():
        ph[bad] = mean + sd[bad] * rng.standard_normal(int(bad.sum()))
        bad = (ph < lo) | (ph > hi)
    values["pH"] = ph
    return [
        SoilTargets(p=values["P"][i], k=values["K"][i], mg=values["Mg"][i], ph=values["pH"][i])
        for i in range(n)
    ]


def _draw_mask(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Full mask half the time, otherwise a non-empty interior rectangle."""
    mask = np.ones((height, width), dtype=bool)
    if rng.random() < 0.5:
        return mask
    top = int(rng.integers(0, height // 3 + 1))
    bottom = height - int(rng.integers(0, height // 3 + 1))
    left = int(rng.integers(0, width // 3 + 1))
    right = width - int(rng.integers(0, width // 3 + 1))
    mask[:] = False
    mask[top:bottom, left:right] = True
    return mask


def gen_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Generate a dataset deterministically from the config (seed included)."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed & ((1 << 64) - 1))
    n = cfg.n_train + cfg.n_test
    n_bands = cfg.axis.n_bands

    outlier = rng.random(n) < cfg.outlier_fraction
    targets = _draw_targets(rng, n, outlier)

    base = base_curve(n_bands)
    profiles = {
        name: np.stack([dip_profile(n_bands, int(b)) for b in cfg.planted_bands[name]])
        for name in TARGET_NAMES
    }

    min_side, max_side = cfg.patch_size_range
    heights = rng.integers(min_side, max_side + 1, size=n)
    widths = rng.integers(min_side, max_side + 1, size=n)

    patches = []
    for i in range(n):
        h, w = int(heights[i]), int(widths[i])
        mask = _draw_mask(rng, h, w)
        spectrum = base.copy()
        for name in TARGET_NAMES:
            depth = dip_depth(name, targets[i].value_for(name))
            spectrum -= depth * profiles[name].sum(axis=0)
        cube = np.broadcast_to(spectrum, (h, w, n_bands)).copy()
        if cfg.noise_sd > 0:
            cube += rng.normal(0.0, cfg.noise_sd, size=(h, w, n_bands))
        np.maximum(cube, 0.0, out=cube)
        patches.append(HyperPatch(cube=cube.astype(np.float32), mask=mask, axis=cfg.axis))

    split = [TRAIN] * cfg.n_train + [TEST] * cfg.n_test
    provenance = "synthetic:" + stable_digest(cfg.to_dict())
    return Dataset(patches=patches, targets=targets, split=split, provenance=provenance).validate()
