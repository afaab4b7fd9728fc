"""On-disk dataset format: a directory holding `manifest.json` plus one
little-endian float32 cube file and one packed-bit mask file per patch.

Loading validates everything the type invariants promise; a dataset that
does not fully validate never leaves this module.
"""

import json
from pathlib import Path

import numpy as np

from .data import BandAxis, Dataset, HyperPatch, SoilTargets
from .errors import ValidationError

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = "v1"


def save_dataset(ds: Dataset, path) -> None:
    ds.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    records = []
    for i, patch in enumerate(ds.patches):
        cube_name = f"patch_{i}.f32"
        mask_name = f"mask_{i}.bits"
        cube = np.ascontiguousarray(patch.cube, dtype="<f4")
        (root / cube_name).write_bytes(cube.tobytes())
        (root / mask_name).write_bytes(np.packbits(patch.mask.reshape(-1)).tobytes())
        records.append(
            {"height": patch.height, "width": patch.width, "cube": cube_name, "mask": mask_name}
        )
    manifest = {
        "version": FORMAT_VERSION,
        "axis": ds.axis.to_dict(),
        "n_patches": len(ds),
        "patches": records,
        "targets": [t.to_dict() for t in ds.targets],
        "split": list(ds.split),
        "provenance": ds.provenance,
    }
    with open(root / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ValidationError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"unparseable manifest {manifest_path}: {exc}") from exc

    if manifest.get("version") != FORMAT_VERSION:
        raise ValidationError(
            f"unsupported dataset format version {manifest.get('version')!r} "
            f"(expected {FORMAT_VERSION!r}) in {manifest_path}"
        )
    axis = BandAxis.from_dict(manifest.get("axis", {}))
    records = manifest.get("patches", [])
    n_declared = manifest.get("n_patches")
    if n_declared != len(records):
        raise ValidationError(
            f"manifest declares {n_declared} patches but lists {len(records)} records"
        )

    patches = []
    for i, rec in enumerate(records):
        patches.append(_load_patch(root, rec, axis, i))

    targets = [SoilTargets.from_dict(d) for d in manifest.get("targets", [])]
    ds = Dataset(
        patches=patches,
        targets=targets,
        split=list(manifest.get("split", [])),
        provenance=str(manifest.get("provenance", "")),
    )
    return ds.validate()


def _load_patch(root: Path, rec: dict, axis: BandAxis, index: int) -> HyperPatch:
    name = f"patch {index}"
    try:
        height, width = int(rec["height"]), int(rec["width"])
        cube_file, mask_file = rec["cube"], rec["mask"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: malformed manifest record: {exc}") from exc
    if height < 1 or width < 1:
        raise ValidationError(f"{name}: non-positive dimensions {height}x{width}")

    cube_path = root / cube_file
    if not cube_path.is_file():
        raise ValidationError(f"{name}: missing cube file {cube_path}")
    raw = cube_path.read_bytes()
    expected = height * width * axis.n_bands * 4
    if len(raw) != expected:
        raise ValidationError(
            f"{name}: cube file {cube_file} has {len(raw)} bytes, "
            f"expected {expected} for {height}x{width}x{axis.n_bands}"
        )
    cube = np.frombuffer(raw, dtype="<f4").reshape(height, width, axis.n_bands)
    cube = cube.astype(np.float32)  # native copy, writable
    if not np.all(np.isfinite(cube)):
        raise ValidationError(f"{name}: non-finite reflectance in {cube_file}")
    if np.any(cube < 0):
        raise ValidationError(f"{name}: negative reflectance in {cube_file}")

    mask_path = root / mask_file
    if not mask_path.is_file():
        raise ValidationError(f"{name}: missing mask file {mask_path}")
    bits = np.frombuffer(mask_path.read_bytes(), dtype=np.uint8)
    n_pix = height * width
    if len(bits) != (n_pix + 7) // 8:
        raise ValidationError(
            f"{name}: mask file {mask_file} has {len(bits)} bytes, "
            f"expected {(n_pix + 7) // 8} for {n_pix} pixels"
        )
    mask = np.unpackbits(bits)[:n_pix].astype(bool).reshape(height, width)
    if not mask.any():
        raise ValidationError(f"{name}: mask has no field pixels")

    return HyperPatch(cube=cube, mask=mask, axis=axis).validate(name=name)
