"""Input validation helpers used by the estimators and pipeline operations."""

import hashlib
import json

import numpy as np

from .errors import ValidationError

_U64 = (1 << 64) - 1


def check_matrix(X, name="X"):
    """Coerce to a finite 2D float64 array or raise ValidationError."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_vector(y, n=None, name="y"):
    """Coerce to a finite 1D float64 array, optionally of length n."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-dimensional, got ndim={arr.ndim}")
    if n is not None and arr.shape[0] != n:
        raise ValidationError(f"{name} has length {arr.shape[0]}, expected {n}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_in_unit_interval(value, name):
    v = float(value)
    if not (0.0 < v < 1.0):
        raise ValidationError(f"{name} must lie in (0, 1), got {value}")
    return v


def canonical_json(obj) -> str:
    """Deterministic JSON rendering (sorted keys, no whitespace drift)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def stable_digest(obj) -> str:
    """sha256 hex digest of the canonical JSON form of obj."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def derive_seed(master_seed: int, *labels) -> int:
    """Derive an independent 64-bit seed from a master seed and string labels.

    Hash-based so that streams for different labels never collide by a
    fixed offset; deterministic across platforms and processes.
    """
    payload = canonical_json([int(master_seed) & _U64, [str(x) for x in labels]])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
