"""Residual diagnostics and red-flag detection.

Two pathologies are flagged: RANGE_COLLAPSE (predictions hugging a narrow
window of the truth distribution while their spread collapses) and
CONCENTRATED_IMPORTANCE (a tiny feature subset carrying most of the total
importance). Threshold defaults are heuristics, configurable per run, not
contracts.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ValidationError
from .validation import check_in_unit_interval, check_vector

RANGE_COLLAPSE = "RANGE_COLLAPSE"
CONCENTRATED_IMPORTANCE = "CONCENTRATED_IMPORTANCE"

N_HIST_BINS = 20
TOP_FEATURES_PER_CASE = 5


def mae(pred, truth) -> float:
    pred = check_vector(pred, name="pred")
    truth = check_vector(truth, name="truth")
    if len(pred) != len(truth):
        raise ValidationError(f"length mismatch: {len(pred)} predictions, {len(truth)} truths")
    if len(pred) == 0:
        raise ValidationError("mae needs at least one sample")
    return float(np.mean(np.abs(pred - truth)))


@dataclass
class ResidualSummary:
    residuals: np.ndarray  # pred - truth
    mean: float
    sd: float  # population form
    q25: float
    q50: float
    q75: float
    hist_counts: np.ndarray  # (20,)
    hist_edges: np.ndarray  # (21,)
    scatter: np.ndarray  # (n, 2) columns (truth, pred)
    pred_sd_ratio: float
    central_coverage: float

    @property
    def n(self) -> int:
        return len(self.residuals)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "q25": self.q25,
            "q50": self.q50,
            "q75": self.q75,
            "histogram": {
                "counts": [int(c) for c in self.hist_counts],
                "edges": [float(e) for e in self.hist_edges],
            },
            "pred_sd_ratio": self.pred_sd_ratio,
            "central_coverage": self.central_coverage,
        }


def residual_summary(pred, truth) -> ResidualSummary:
    """Residual statistics; quantiles interpolate linearly between order
    statistics. Needs n >= 10 so the decile window is supported."""
    pred = check_vector(pred, name="pred")
    truth = check_vector(truth, name="truth")
    if len(pred) != len(truth):
        raise ValidationError(f"length mismatch: {len(pred)} predictions, {len(truth)} truths")
    n = len(pred)
    if n < 10:
        raise ValidationError(f"residual summary needs n >= 10, got {n}")

    r = pred - truth
    q25, q50, q75 = np.quantile(r, [0.25, 0.50, 0.75], method="linear")
    counts, edges = np.histogram(r, bins=N_HIST_BINS)  # range defaults to [min, max]
    truth_sd = float(truth.std())
    pred_sd = float(pred.std())
    if truth_sd > 0:
        ratio = pred_sd / truth_sd
    else:
        ratio = 0.0 if pred_sd == 0 else float("inf")
    q10, q90 = np.quantile(truth, [0.10, 0.90], method="linear")
    coverage = float(np.mean((pred >= q10) & (pred <= q90)))

    return ResidualSummary(
        residuals=r,
        mean=float(r.mean()),
        sd=float(r.std()),
        q25=float(q25),
        q50=float(q50),
        q75=float(q75),
        hist_counts=counts,
        hist_edges=edges,
        scatter=np.column_stack([truth, pred]),
        pred_sd_ratio=ratio,
        central_coverage=coverage,
    )


@dataclass(frozen=True)
class AuditThresholds:
    range_sd_ratio: float = 0.5  # flag when pred sd / truth sd falls below
    range_coverage: float = 0.9  # ... and this share of predictions sits in the decile window
    mass_threshold: float = 0.5  # importance mass the smallest subset must carry
    feature_fraction: float = 0.01  # subset size cap as a fraction of all features

    def validate(self):
        for name in ("range_sd_ratio", "range_coverage", "mass_threshold", "feature_fraction"):
            check_in_unit_interval(getattr(self, name), name)
        return self

    def to_dict(self) -> dict:
        return {
            "range_sd_ratio": self.range_sd_ratio,
            "range_coverage": self.range_coverage,
            "mass_threshold": self.mass_threshold,
            "feature_fraction": self.feature_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditThresholds":
        try:
            return cls(**{k: float(v) for k, v in d.items()}).validate()
        except TypeError as exc:
            raise ValidationError(f"malformed audit thresholds: {exc}") from exc


@dataclass
class RedFlagReport:
    flags: list
    evidence: dict

    def to_dict(self) -> dict:
        return {"flags": list(self.flags), "evidence": self.evidence}


def detect_red_flags(rs: ResidualSummary, imp, thresholds=None) -> RedFlagReport:
    thresholds = (thresholds or AuditThresholds()).validate()
    imp = np.asarray(imp, dtype=np.float64)
    if imp.ndim != 1 or np.any(imp < 0):
        raise ValidationError("importance vector must be 1D and nonnegative")

    flags, evidence = [], {}

    range_hit = (
        rs.pred_sd_ratio < thresholds.range_sd_ratio
        and rs.central_coverage > thresholds.range_coverage
    )
    evidence[RANGE_COLLAPSE] = {
        "pred_sd_ratio": rs.pred_sd_ratio,
        "central_coverage": rs.central_coverage,
        "sd_ratio_threshold": thresholds.range_sd_ratio,
        "coverage_threshold": thresholds.range_coverage,
        "raised": bool(range_hit),
    }
    if range_hit:
        flags.append(RANGE_COLLAPSE)

    total = float(imp.sum())
    n_features = len(imp)
    if total == 0:
        evidence[CONCENTRATED_IMPORTANCE] = {
            "raised": False,
            "note": "total importance is zero; concentration undefined",
        }
    else:
        desc = np.sort(imp)[::-1]
        cumulative = np.cumsum(desc)
        subset_size = int(np.searchsorted(cumulative, thresholds.mass_threshold * total) + 1)
        size_cap = thresholds.feature_fraction * n_features
        conc_hit = subset_size <= size_cap
        evidence[CONCENTRATED_IMPORTANCE] = {
            "subset_size": subset_size,
            "mass_threshold": thresholds.mass_threshold,
            "size_cap": size_cap,
            "n_features": n_features,
            "raised": bool(conc_hit),
        }
        if conc_hit:
            flags.append(CONCENTRATED_IMPORTANCE)

    return RedFlagReport(flags=flags, evidence=evidence)


@dataclass
class ExtremeCase:
    sample_id: int
    residual: float
    top_features: list  # (feature_id, phi), descending |phi|

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "residual": self.residual,
            "top_features": [
                {"feature_id": int(f), "phi": float(p)} for f, p in self.top_features
            ],
        }


@dataclass
class ExtremeCases:
    overestimated: list = field(default_factory=list)
    underestimated: list = field(default_factory=list)
    best: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "overestimated": [c.to_dict() for c in self.overestimated],
            "underestimated": [c.to_dict() for c in self.underestimated],
            "best": [c.to_dict() for c in self.best],
        }


def explain_extremes(sm, pred, truth, n_cases: int) -> ExtremeCases:
    """Top-attribution breakdowns for the largest over- and under-
    estimations and the closest predictions."""
    pred = check_vector(pred, name="pred")
    truth = check_vector(truth, name="truth")
    n = len(pred)
    if len(truth) != n or sm.n_samples != n:
        raise ValidationError("pred, truth and attribution matrix must align")
    if n_cases < 1:
        raise ValidationError(f"n_cases must be >= 1, got {n_cases}")
    if 3 * n_cases > n:
        raise ValidationError(
            f"insufficient samples: need 3*{n_cases} <= {n} for disjoint case sets"
        )

    r = pred - truth
    order = np.argsort(r, kind="stable")

    def build(indices):
        cases = []
        for i in indices:
            phi = sm.values[i]
            top = np.lexsort((np.arange(len(phi)), -np.abs(phi)))[:TOP_FEATURES_PER_CASE]
            cases.append(
                ExtremeCase(
                    sample_id=int(sm.sample_ids[i]),
                    residual=float(r[i]),
                    top_features=[(int(f), float(phi[f])) for f in top],
                )
            )
        return cases

    over = build(order[::-1][:n_cases])  # most positive residuals first
    under = build(order[:n_cases])  # most negative residuals first
    best = build(np.argsort(np.abs(r), kind="stable")[:n_cases])
    return ExtremeCases(overestimated=over, underestimated=under, best=best)


def save_residuals_csv(rs: ResidualSummary, sample_ids, path) -> None:
    df = pd.DataFrame(
        {
            "sample_id": np.asarray(sample_ids, dtype=np.int64),
            "truth": rs.scatter[:, 0],
            "pred": rs.scatter[:, 1],
            "residual": rs.residuals,
        }
    )
    df.to_csv(path, index=False)
