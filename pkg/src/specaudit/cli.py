"""Command-line pipeline: gen-data, extract, train, explain, aggregate,
prune, audit, report.

Every stage reads and writes the documented file formats, so runs are
resumable and scriptable stage by stage. Configuration comes from one
versioned JSON document plus flag overrides (flags win); the master seed
lives in the config, never the wall clock, so identical configs produce
byte-identical reports.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 internal
invariant breach.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import aggregate as agg
from .audit import (
    AuditThresholds,
    detect_red_flags,
    explain_extremes,
    mae,
    residual_summary,
    save_residuals_csv,
)
from .data import TARGET_NAMES, TEST, TRAIN, BandAxis, Dataset
from .errors import ConfigError, InternalInvariantError, ValidationError
from .features import FeatureTable, extract_dataset
from .forest import ForestParams, ForestRegressor, load_forest, save_forest
from .prune import K_LADDER, format_percent_delta, select_top_k
from .shapley import explain_dataset, load_shap_matrix, save_shap_matrix
from .storage import load_dataset, save_dataset
from .synthetic import SyntheticConfig, default_planted_bands, gen_synthetic
from .validation import derive_seed, stable_digest

log = logging.getLogger("specaudit")

CONFIG_VERSION = "v1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_INTERNAL = 3


def _features_csv(workdir: Path, split: str) -> Path:
    return workdir / f"features_{split}.csv"


def _features_meta(workdir: Path, split: str) -> Path:
    return workdir / f"features_{split}.csv.meta.json"


def _forest_json(workdir: Path, target: str) -> Path:
    return workdir / f"forest_{target}.json"


def _shap_csv(workdir: Path, target: str, split: str) -> Path:
    return workdir / f"shap_{target}_{split}.csv"


@dataclass
class RunConfig:
    seed: int = 1234
    spatial: bool = False
    dataset_mode: str = "synthetic"  # or "load"
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    load_path: str = ""
    dataset_dir: str = "dataset"
    workdir: str = "work"
    forest: dict = field(default_factory=dict)  # shared params (no seed)
    forest_per_target: dict = field(default_factory=dict)
    prune_ladder: tuple = K_LADDER
    prune_tol: float = 0.10
    audit_thresholds: AuditThresholds = field(default_factory=AuditThresholds)
    n_extreme_cases: int = 3
    n_bins: int = 10
    group_mode: str = "attribution"
    threads: int = 1

    def forest_params(self, target: str) -> ForestParams:
        merged = {**ForestParams().to_dict(), **self.forest}
        merged.update(self.forest_per_target.get(target, {}))
        merged["seed"] = self.seed  # master seed; fit streams derive from it
        return ForestParams.from_dict(merged)

    def fit_seed(self, target: str) -> int:
        return derive_seed(self.seed, "fit", target)

    def semantic_dict(self) -> dict:
        """Config echo for reports: everything except filesystem paths."""
        return {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "spatial": self.spatial,
            "dataset_mode": self.dataset_mode,
            "synthetic": self.synthetic.to_dict() if self.dataset_mode == "synthetic" else None,
            "forest": {**ForestParams().to_dict(), **self.forest},
            "forest_per_target": self.forest_per_target,
            "pruning": {"ladder": list(self.prune_ladder), "tol": self.prune_tol},
            "audit": {
                **self.audit_thresholds.to_dict(),
                "n_extreme_cases": self.n_extreme_cases,
            },
            "aggregate": {"n_bins": self.n_bins, "group_mode": self.group_mode},
        }


def load_run_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"unparseable config {path}: {exc}") from exc
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(
            f"unsupported config version {doc.get('version')!r} in {path} "
            f"(expected {CONFIG_VERSION!r})"
        )
    return doc


def resolve_config(args) -> RunConfig:
    """defaults < config file < command-line flags."""
    cfg = RunConfig()
    doc = load_run_config(args.config) if getattr(args, "config", None) else {}

    try:
        if "seed" in doc:
            cfg.seed = int(doc["seed"])
        if "spatial" in doc:
            cfg.spatial = bool(doc["spatial"])
        ds = doc.get("dataset", {})
        syn_doc = {}
        if ds:
            cfg.dataset_mode = ds.get("mode", "synthetic")
            if cfg.dataset_mode == "synthetic":
                syn_doc = dict(ds.get("synthetic", {}))
            elif cfg.dataset_mode == "load":
                cfg.load_path = str(ds.get("path", ""))
            else:
                raise ConfigError(f"unknown dataset mode {cfg.dataset_mode!r}")
        paths = doc.get("paths", {})
        cfg.dataset_dir = str(paths.get("dataset_dir", cfg.dataset_dir))
        cfg.workdir = str(paths.get("workdir", cfg.workdir))
        forest = dict(doc.get("forest", {}))
        cfg.forest_per_target = {
            str(k): dict(v) for k, v in forest.pop("per_target", {}).items()
        }
        forest.pop("seed", None)  # master seed governs; per-params seed ignored
        cfg.forest = forest
        pruning = doc.get("pruning", {})
        if "ladder" in pruning:
            cfg.prune_ladder = tuple(int(k) for k in pruning["ladder"])
        if "tol" in pruning:
            cfg.prune_tol = float(pruning["tol"])
        audit_doc = dict(doc.get("audit", {}))
        cfg.n_extreme_cases = int(audit_doc.pop("n_extreme_cases", cfg.n_extreme_cases))
        if audit_doc:
            cfg.audit_thresholds = AuditThresholds.from_dict(
                {**cfg.audit_thresholds.to_dict(), **audit_doc}
            )
        agg_doc = doc.get("aggregate", {})
        cfg.n_bins = int(agg_doc.get("n_bins", cfg.n_bins))
        cfg.group_mode = str(agg_doc.get("group_mode", cfg.group_mode))
        if "threads" in doc:
            cfg.threads = int(doc["threads"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    _apply_flag_overrides(cfg, args)
    cfg.synthetic = _resolve_synthetic(cfg, syn_doc, args)

    if cfg.threads < 1:
        raise ConfigError(f"threads must be >= 1, got {cfg.threads}")
    if cfg.prune_tol <= 0:
        raise ConfigError(f"pruning tol must be > 0, got {cfg.prune_tol}")
    cfg.audit_thresholds.validate()
    return cfg


def _apply_flag_overrides(cfg: RunConfig, args) -> None:
    def picked(name):
        return getattr(args, name, None) is not None

    if picked("seed"):
        cfg.seed = args.seed
    if picked("spatial"):
        cfg.spatial = args.spatial
    if picked("dataset_dir"):
        cfg.dataset_dir = args.dataset_dir
    if picked("workdir"):
        cfg.workdir = args.workdir
    if picked("threads"):
        cfg.threads = args.threads
    for flag, key in (
        ("n_trees", "n_trees"),
        ("max_depth", "max_depth"),
        ("min_samples_leaf", "min_samples_leaf"),
        ("features_per_split", "features_per_split"),
    ):
        if picked(flag):
            cfg.forest[key] = getattr(args, flag)
    if picked("bootstrap"):
        cfg.forest["bootstrap"] = args.bootstrap
    if picked("tol"):
        cfg.prune_tol = args.tol
    if picked("ladder"):
        cfg.prune_ladder = tuple(args.ladder)
    if picked("n_bins"):
        cfg.n_bins = args.n_bins
    if picked("group_mode"):
        cfg.group_mode = args.group_mode
    if picked("n_cases"):
        cfg.n_extreme_cases = args.n_cases


def _resolve_synthetic(cfg: RunConfig, syn_doc: dict, args) -> SyntheticConfig:
    """Overlay defaults < config document < generator flags; planted bands
    rescale with the band count unless the config pins them."""
    syn = dict(SyntheticConfig().to_dict())
    syn.update(syn_doc)
    for flag, key in (
        ("n_train", "n_train"),
        ("n_test", "n_test"),
        ("noise_sd", "noise_sd"),
        ("outlier_fraction", "outlier_fraction"),
    ):
        if getattr(args, flag, None) is not None:
            syn[key] = getattr(args, flag)
    if getattr(args, "bands", None) is not None:
        syn["axis"] = {**syn["axis"], "n_bands": args.bands}
    if getattr(args, "patch_min", None) is not None:
        syn["patch_size_range"] = [args.patch_min, syn["patch_size_range"][1]]
    if getattr(args, "patch_max", None) is not None:
        syn["patch_size_range"] = [syn["patch_size_range"][0], args.patch_max]
    if "planted_bands" not in syn_doc:
        syn["planted_bands"] = {
            k: list(v) for k, v in default_planted_bands(int(syn["axis"]["n_bands"])).items()
        }
    syn["seed"] = cfg.seed
    return SyntheticConfig.from_dict(syn)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(cfg: RunConfig) -> None:
    if cfg.dataset_mode != "synthetic":
        raise ConfigError("gen-data requires dataset mode 'synthetic'")
    ds = gen_synthetic(cfg.synthetic)
    save_dataset(ds, cfg.dataset_dir)
    log.info("wrote dataset with %d patches to %s", len(ds), cfg.dataset_dir)


def _load_input_dataset(cfg: RunConfig) -> Dataset:
    path = cfg.load_path if cfg.dataset_mode == "load" else cfg.dataset_dir
    return load_dataset(path)


def cmd_extract(cfg: RunConfig) -> None:
    ds = _load_input_dataset(cfg)
    workdir = Path(cfg.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    table = extract_dataset(ds, cfg.spatial)
    for split in (TRAIN, TEST):
        idx = ds.indices(split)
        part = table.rows(idx)
        part.to_csv(_features_csv(workdir, split))
        meta = {
            "version": "v1",
            "axis": ds.axis.to_dict(),
            "spatial": cfg.spatial,
            "fingerprint": table.fingerprint(),
        }
        with open(_features_meta(workdir, split), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log.info("wrote %d x %d features for split %s", len(idx), table.schema.n_features, split)


def _load_features(workdir: Path, split: str) -> FeatureTable:
    meta_path = _features_meta(workdir, split)
    if not meta_path.is_file():
        raise ValidationError(f"missing feature sidecar {meta_path}; run extract first")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"unparseable sidecar {meta_path}: {exc}") from exc
    if meta.get("version") != "v1":
        raise ValidationError(f"unsupported feature sidecar version in {meta_path}")
    axis = BandAxis.from_dict(meta["axis"])
    table = FeatureTable.from_csv(_features_csv(workdir, split), axis, bool(meta["spatial"]))
    if table.fingerprint() != meta.get("fingerprint"):
        raise ValidationError(
            f"{_features_csv(workdir, split)}: feature columns do not match "
            f"recorded schema fingerprint"
        )
    return table


def cmd_train(cfg: RunConfig) -> None:
    ds = _load_input_dataset(cfg)
    workdir = Path(cfg.workdir)
    train_table = _load_features(workdir, TRAIN)
    for target in TARGET_NAMES:
        params = cfg.forest_params(target)
        fitted = ForestRegressor.from_params(
            ForestParams(**{**params.to_dict(), "seed": cfg.fit_seed(target)}),
            target_name=target,
        ).fit(train_table, ds.target_vector(target, TRAIN))
        save_forest(fitted, _forest_json(workdir, target))
        log.info("trained forest for %s (%d trees)", target, params.n_trees)


def cmd_explain(cfg: RunConfig) -> None:
    workdir = Path(cfg.workdir)
    tables = {split: _load_features(workdir, split) for split in (TRAIN, TEST)}
    for target in TARGET_NAMES:
        forest = load_forest(_forest_json(workdir, target))
        for split, table in tables.items():
            sm = explain_dataset(forest, table)
            save_shap_matrix(sm, table.schema, _shap_csv(workdir, target, split))
        log.info("explained %s on both splits", target)


def cmd_aggregate(cfg: RunConfig) -> None:
    workdir = Path(cfg.workdir)
    table = _load_features(workdir, TRAIN)
    for target in TARGET_NAMES:
        sm = load_shap_matrix(_shap_csv(workdir, target, TRAIN))
        out = workdir / "aggregate" / target
        out.mkdir(parents=True, exist_ok=True)
        imp = agg.global_importance(sm)
        agg.save_importance_csv(imp, table.schema, out / "importance.csv")
        group_imp = agg.transformation_importance(sm, table.schema, mode=cfg.group_mode)
        agg.save_groups_csv(group_imp, out / "groups.csv")
        bgm = agg.band_transformation_matrix(sm, table.schema, cfg.n_bins)
        agg.save_heatmap(bgm, out / "heatmap.csv", out / "heatmap.json")
        log.info("aggregated %s: top feature id %d", target, int(agg.importance_order(imp)[0]))


def cmd_prune(cfg: RunConfig) -> None:
    """Ladder search per target, reusing the trained forests and train-split
    explanations already on disk (selection never sees test targets)."""
    ds = _load_input_dataset(cfg)
    workdir = Path(cfg.workdir)
    train_table = _load_features(workdir, TRAIN)
    test_table = _load_features(workdir, TEST)
    n_features = train_table.schema.n_features

    targets_doc = {}
    for target in TARGET_NAMES:
        forest = load_forest(_forest_json(workdir, target))
        if forest.schema_fingerprint_ != train_table.fingerprint():
            raise ValidationError(
                f"{_forest_json(workdir, target)}: schema fingerprint does not "
                f"match extracted features"
            )
        sm = load_shap_matrix(_shap_csv(workdir, target, TRAIN))
        if sm.schema_fingerprint != train_table.fingerprint():
            raise ValidationError(
                f"{_shap_csv(workdir, target, TRAIN)}: attribution fingerprint "
                f"does not match extracted features"
            )
        imp = agg.global_importance(sm)
        y_train = ds.target_vector(target, TRAIN)
        y_test = ds.target_vector(target, TEST)
        baseline = mae(forest.predict(test_table), y_test)

        params = cfg.forest_params(target)
        ladder, results, chosen = [], {}, -1
        for k in sorted({min(int(k), n_features) for k in cfg.prune_ladder}):
            selected = select_top_k(imp, k)
            refit_seed = derive_seed(cfg.seed, "refit", target, k)
            pruned = ForestRegressor.from_params(
                ForestParams(**{**params.to_dict(), "seed": refit_seed}), target_name=target
            ).fit(train_table.matrix[:, selected], y_train)
            pruned_mae = mae(pruned.predict(test_table.matrix[:, selected]), y_test)
            ratio = pruned_mae / baseline
            ladder.append([int(k), ratio])
            results[int(k)] = {
                "selected_ids": [int(i) for i in selected],
                "pruned_mae": pruned_mae,
                "ratio": ratio,
                "percent_delta": format_percent_delta(ratio),
                "refit_seed": refit_seed,
                "selection_hash": stable_digest([int(i) for i in selected]),
            }
            if ratio <= 1.0 + cfg.prune_tol:
                chosen = int(k)
                break
        targets_doc[target] = {
            "n_features": n_features,
            "baseline_mae": baseline,
            "k": chosen,
            "found": chosen >= 0,
            "pruned_mae": results[chosen]["pruned_mae"] if chosen >= 0 else None,
            "percent_delta": results[chosen]["percent_delta"] if chosen >= 0 else None,
            "ladder": ladder,
            "results": results,
        }
        log.info("pruned %s: k=%s of %d features", target, chosen, n_features)

    doc = {
        "version": "v1",
        "tol": cfg.prune_tol,
        "ladder": sorted({min(int(k), n_features) for k in cfg.prune_ladder}),
        "targets": targets_doc,
    }
    _write_json(workdir / "prune_report.json", doc)


def cmd_audit(cfg: RunConfig) -> None:
    ds = _load_input_dataset(cfg)
    workdir = Path(cfg.workdir)
    test_table = _load_features(workdir, TEST)
    test_ids = ds.indices(TEST)

    targets_doc = {}
    for target in TARGET_NAMES:
        forest = load_forest(_forest_json(workdir, target))
        y_test = ds.target_vector(target, TEST)
        pred = forest.predict(test_table)
        rs = residual_summary(pred, y_test)
        # importance concentration is judged on train-split explanations,
        # consistent with selection; extreme cases come from the test split
        sm_train = load_shap_matrix(_shap_csv(workdir, target, TRAIN))
        sm_test = load_shap_matrix(_shap_csv(workdir, target, TEST))
        if sm_test.schema_fingerprint != test_table.fingerprint():
            raise ValidationError(
                f"{_shap_csv(workdir, target, TEST)}: attribution fingerprint "
                f"does not match extracted features"
            )
        imp = agg.global_importance(sm_train)
        report = detect_red_flags(rs, imp, cfg.audit_thresholds)
        extremes = explain_extremes(sm_test, pred, y_test, cfg.n_extreme_cases)
        save_residuals_csv(rs, test_ids, workdir / f"residuals_{target}.csv")
        targets_doc[target] = {
            "mae": mae(pred, y_test),
            "residuals": rs.to_dict(),
            "flags": report.flags,
            "evidence": report.evidence,
            "extremes": extremes.to_dict(),
        }
        log.info("audited %s: flags=%s", target, report.flags or "none")

    doc = {
        "version": "v1",
        "thresholds": cfg.audit_thresholds.to_dict(),
        "n_extreme_cases": cfg.n_extreme_cases,
        "targets": targets_doc,
    }
    _write_json(workdir / "audit_report.json", doc)


def cmd_report(cfg: RunConfig) -> None:
    workdir = Path(cfg.workdir)
    prune_doc = _read_json(workdir / "prune_report.json")
    audit_doc = _read_json(workdir / "audit_report.json")
    doc = {
        "version": "v1",
        "config": cfg.semantic_dict(),
        "prune": prune_doc,
        "audit": audit_doc,
    }
    _write_json(workdir / "report.json", doc)
    (workdir / "report.md").write_text(_render_markdown(doc), encoding="utf-8")
    log.info("wrote report.json and report.md to %s", workdir)


def _render_markdown(doc: dict) -> str:
    prune = doc["prune"]["targets"]
    audit_targets = doc["audit"]["targets"]
    n_features = next(iter(prune.values()))["n_features"]

    def fmt(v):
        return f"{v:.4g}"

    lines = [
        "# Model audit report",
        "",
        "## Feature-selection parity (MAE on the test split)",
        "",
        "| F. selection | " + " | ".join(TARGET_NAMES) + " |",
        "|" + "---|" * (len(TARGET_NAMES) + 1),
    ]
    full_cells = [fmt(prune[t]["baseline_mae"]) for t in TARGET_NAMES]
    lines.append(f"| x ({n_features}) | " + " | ".join(full_cells) + " |")
    pruned_cells, k_cells = [], []
    for t in TARGET_NAMES:
        row = prune[t]
        if row["found"]:
            pruned_cells.append(f"{fmt(row['pruned_mae'])} {row['percent_delta']}")
            k_cells.append(str(row["k"]))
        else:
            pruned_cells.append("no ladder point passed")
            k_cells.append("-")
    lines.append(f"| ok ({'/'.join(k_cells)}) | " + " | ".join(pruned_cells) + " |")
    lines += [
        "",
        "## Red flags",
        "",
        "| Target | MAE | Flags |",
        "|---|---|---|",
    ]
    for t in TARGET_NAMES:
        row = audit_targets[t]
        flags = ", ".join(row["flags"]) if row["flags"] else "none"
        lines.append(f"| {t} | {fmt(row['mae'])} | {flags} |")
    lines.append("")
    return "\n".join(lines)


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path) -> dict:
    if not path.is_file():
        raise ValidationError(f"missing input artifact {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"unparseable {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specaudit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run config (flags override it)")
        p.add_argument("--dataset-dir", dest="dataset_dir", help="dataset directory")
        p.add_argument("--workdir", help="artifact directory")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--spatial", action="store_true", default=None,
                       help="include spatial feature groups")
        p.add_argument("--threads", type=int,
                       help="worker cap; results are identical at any setting")
        p.add_argument("-v", "--verbose", action="store_true", help="info logging")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset directory")
    common(p)
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--bands", type=int, help="number of spectral bands")
    p.add_argument("--noise-sd", dest="noise_sd", type=float)
    p.add_argument("--outlier-fraction", dest="outlier_fraction", type=float)
    p.add_argument("--patch-min", dest="patch_min", type=int)
    p.add_argument("--patch-max", dest="patch_max", type=int)

    p = sub.add_parser("extract", help="extract feature CSVs per split")
    common(p)

    p = sub.add_parser("train", help="train one forest per soil target")
    common(p)
    p.add_argument("--n-trees", dest="n_trees", type=int, help="default 200")
    p.add_argument("--max-depth", dest="max_depth", type=int, help="default 12")
    p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int, help="default 2")
    p.add_argument("--features-per-split", dest="features_per_split", type=float,
                   help="fraction of features tried per split, default 0.33")
    p.add_argument("--bootstrap", dest="bootstrap", action="store_true", default=None)
    p.add_argument("--no-bootstrap", dest="bootstrap", action="store_false", default=None)

    p = sub.add_parser("explain", help="attribution CSVs per target and split")
    common(p)

    p = sub.add_parser("aggregate", help="importance, group and heatmap CSVs")
    common(p)
    p.add_argument("--n-bins", dest="n_bins", type=int, help="wavelength bins, default 10")
    p.add_argument("--group-mode", dest="group_mode", choices=("attribution", "importance"))

    p = sub.add_parser("prune", help="ladder search and parity report")
    common(p)
    p.add_argument("--tol", type=float, help="MAE ratio tolerance, default 0.10")
    p.add_argument("--ladder", type=int, nargs="+", help="candidate k values")
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    p.add_argument("--features-per-split", dest="features_per_split", type=float)
    p.add_argument("--bootstrap", dest="bootstrap", action="store_true", default=None)
    p.add_argument("--no-bootstrap", dest="bootstrap", action="store_false", default=None)

    p = sub.add_parser("audit", help="residual diagnostics and red flags")
    common(p)
    p.add_argument("--n-cases", dest="n_cases", type=int,
                   help="extreme cases per category, default 3")

    p = sub.add_parser("report", help="merge stage outputs into report.json/.md")
    common(p)

    return parser


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "extract": cmd_extract,
    "train": cmd_train,
    "explain": cmd_explain,
    "aggregate": cmd_aggregate,
    "prune": cmd_prune,
    "audit": cmd_audit,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        _COMMANDS[args.command](cfg)
    except InternalInvariantError as exc:
        print(f"specaudit: internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValidationError as exc:
        print(f"specaudit: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"specaudit: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
