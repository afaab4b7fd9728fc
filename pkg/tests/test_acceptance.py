"""Acceptance suite: one test per release criterion, each printing a
single pass/fail line (run with `pytest tests/test_acceptance.py -v -s`).

Scales and tolerances are pinned here and are not calibration knobs:
oracle agreement 1e-9, additivity 1e-6 relative, conservation 1e-12,
pruning tolerance 0.10 on the k-ladder, byte-identical reports, and a
3-minute full-pipeline budget.
"""

import json
import re
import time

import numpy as np
import pytest

from specaudit import (
    CONCENTRATED_IMPORTANCE,
    RANGE_COLLAPSE,
    AuditThresholds,
    BandAxis,
    ForestParams,
    ForestRegressor,
    GroupMap,
    SyntheticConfig,
    brute_shap,
    detect_red_flags,
    explain_dataset,
    extract_dataset,
    gen_synthetic,
    global_importance,
    group_attribution,
    importance_order,
    minimal_k,
    residual_summary,
    tree_shap,
)
from specaudit.cli import main
from specaudit.shapley import TreeShapExplainer
from specaudit.validation import derive_seed

TARGETS = ("P", "K", "Mg", "pH")


def emit(criterion: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


# -- criterion 2/3/7 share one desk-scale dataset -----------------------------


@pytest.fixture(scope="module")
def desk_dataset():
    cfg = SyntheticConfig(
        n_train=140,
        n_test=60,
        axis=BandAxis(50, 462.08, 938.37),
        patch_size_range=(16, 16),
        noise_sd=0.01,
        seed=90,
    )
    ds = gen_synthetic(cfg)
    table = extract_dataset(ds, spatial=False)
    return cfg, ds, table


@pytest.fixture(scope="module")
def desk_explanations(desk_dataset):
    cfg, ds, table = desk_dataset
    out = {}
    for target in TARGETS:
        params = ForestParams(seed=derive_seed(90, "fit", target))
        forest = ForestRegressor.from_params(params, target_name=target).fit(
            table.rows(ds.indices("train")), ds.target_vector(target, "train")
        )
        sm = explain_dataset(forest, table)
        out[target] = (forest, sm)
    return out


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(424242)
    start = time.time()
    worst = 0.0
    n_pairs = 100
    for trial in range(n_pairs):
        n, p = 30, 10
        X = rng.normal(size=(n, p))
        y = 2.0 * X[:, 0] + np.sin(3.0 * X[:, 4]) + rng.normal(0, 0.3, n)
        forest = ForestRegressor(
            n_trees=int(rng.integers(1, 6)),
            max_depth=int(rng.integers(1, 5)),
            min_samples_leaf=int(rng.integers(1, 4)),
            features_per_split=float(rng.uniform(0.2, 1.0)),
            bootstrap=bool(trial % 2),
            seed=trial,
        ).fit(X, y)
        assert len(forest.used_features()) <= 10
        x = rng.normal(size=p)
        worst = max(worst, float(np.abs(tree_shap(forest, x) - brute_shap(forest, x)).max()))
    elapsed = time.time() - start
    emit(
        "criterion 1 (oracle equivalence)",
        worst <= 1e-9 and elapsed < 60.0,
        f"max |tree_shap - brute_shap| = {worst:.2e} over {n_pairs} pairs in {elapsed:.1f}s",
    )


def test_criterion_2_local_accuracy(desk_dataset, desk_explanations):
    _, ds, table = desk_dataset
    worst_rel = 0.0
    for target, (forest, sm) in desk_explanations.items():
        pred = forest.predict(table)
        err = np.abs(sm.base_value + sm.values.sum(axis=1) - pred)
        rel = err / np.maximum(1.0, np.abs(pred))
        worst_rel = max(worst_rel, float(rel.max()))
    emit(
        "criterion 2 (local accuracy)",
        worst_rel <= 1e-6,
        f"worst relative additivity error {worst_rel:.2e} over "
        f"{len(TARGETS)} targets x {table.n_samples} samples",
    )


def test_criterion_3_dummy_exactness(desk_dataset):
    _, ds, table = desk_dataset
    n_injected = 12
    X = np.column_stack([table.matrix, np.full((table.n_samples, n_injected), 0.775)])
    train = ds.indices("train")
    forest = ForestRegressor(n_trees=100, max_depth=10, seed=17).fit(
        X[train], ds.target_vector("P", "train")
    )
    injected = set(range(table.schema.n_features, table.schema.n_features + n_injected))
    never_used = injected.isdisjoint(forest.used_features().tolist())
    phi = TreeShapExplainer(forest).shap_values(X)
    all_zero = all(np.all(phi[:, i] == 0.0) for i in injected)
    emit(
        "criterion 3 (dummy exactness)",
        never_used and all_zero,
        f"{n_injected} injected constant features: unused={never_used}, "
        f"phi bit-exact zero={all_zero}",
    )


def test_criterion_4_planted_band_recovery():
    seeds_hit = 0
    for s in range(5):
        cfg = SyntheticConfig(seed=1000 + s)  # standard config, noise_sd 0.01
        ds = gen_synthetic(cfg)
        table = extract_dataset(ds, spatial=False)
        train = ds.indices("train")
        all_hit = True
        for target in TARGETS:
            forest = ForestRegressor(n_trees=60, max_depth=10, seed=s).fit(
                table.rows(train), ds.target_vector(target, "train")
            )
            sm = explain_dataset(forest, table.rows(train))
            top5 = importance_order(global_importance(sm))[:5]
            planted = cfg.planted_bands[target][0]
            hit = any(
                table.schema.bands[i] is not None and abs(table.schema.bands[i] - planted) <= 1
                for i in top5
            )
            all_hit = all_hit and hit
        seeds_hit += all_hit
    emit(
        "criterion 4 (planted-band recovery)",
        seeds_hit >= 4,
        f"top-5 importance within +-1 band of the planted band for all targets "
        f"in {seeds_hit}/5 master seeds",
    )


def test_criterion_5_pruning_parity():
    delta_pattern = re.compile(r"^\([+-]?\d+%\)$")
    seeds_ok = 0
    sample_delta = None
    for s in range(5):
        cfg = SyntheticConfig(seed=2000 + s)
        ds = gen_synthetic(cfg)
        table = extract_dataset(ds, spatial=False)
        params = ForestParams(n_trees=60, max_depth=10, seed=s)
        ok = True
        for target in TARGETS:
            res = minimal_k(ds, table, target, params, tol=0.10)
            ok = ok and res.found and res.k <= 8
            if res.found:
                delta = res.results[res.k].percent_delta()
                assert delta_pattern.match(delta), delta
                sample_delta = delta
        seeds_ok += ok
    emit(
        "criterion 5 (pruning parity)",
        seeds_ok >= 4,
        f"minimal_k(tol=0.10) <= 8 (~4% of 197 features) for every target in "
        f"{seeds_ok}/5 seeds; deltas formatted like {sample_delta}",
    )


def test_criterion_6_red_flags():
    rng = np.random.default_rng(33)
    thresholds = AuditThresholds()

    truth = rng.normal(50.0, 8.0, 120)
    constant = detect_red_flags(
        residual_summary(np.full(120, truth.mean()), truth), np.ones(500), thresholds
    )
    a = RANGE_COLLAPSE in constant.flags

    X = rng.normal(size=(80, 500))
    y = 5.0 * X[:, 7] + rng.normal(0, 0.05, 80)
    forest = ForestRegressor(n_trees=30, max_depth=4, features_per_split=1.0, seed=1).fit(X, y)
    imp = np.abs(TreeShapExplainer(forest).shap_values(X)).sum(axis=0)
    dominated = detect_red_flags(
        residual_summary(truth + rng.normal(0, 1.0, 120), truth), imp, thresholds
    )
    b = CONCENTRATED_IMPORTANCE in dominated.flags

    perfect = detect_red_flags(
        residual_summary(truth.copy(), truth), np.ones(200), thresholds
    )
    c = perfect.flags == []

    emit(
        "criterion 6 (red flags)",
        a and b and c,
        f"constant->RANGE_COLLAPSE={a}, dominant-of-500->CONCENTRATED={b}, "
        f"perfect->none={c}",
    )


def test_criterion_7_aggregation_conservation(desk_dataset, desk_explanations):
    _, _, table = desk_dataset
    gm = GroupMap.from_schema(table.schema)
    assert gm.coverage
    worst = 0.0
    for target, (_, sm) in desk_explanations.items():
        for j in range(sm.n_samples):
            parts = group_attribution(sm.values[j], gm)
            worst = max(worst, abs(sum(parts.values()) - sm.values[j].sum()))
    emit(
        "criterion 7 (aggregation conservation)",
        worst <= 1e-12,
        f"max |sum(group sums) - sum(phi)| = {worst:.2e} across all samples and targets",
    )


SMALL_CHAIN = [
    ("gen-data", ["--n-train", "30", "--n-test", "15", "--bands", "12",
                  "--patch-min", "5", "--patch-max", "8"]),
    ("extract", []),
    ("train", ["--n-trees", "15", "--max-depth", "5"]),
    ("explain", []),
    ("aggregate", []),
    ("prune", ["--n-trees", "15", "--max-depth", "5"]),
    ("audit", ["--n-cases", "2"]),
    ("report", []),
]


def run_small_chain(root):
    common = ["--dataset-dir", str(root / "data"), "--workdir", str(root / "work"),
              "--seed", "7"]
    for cmd, extra in SMALL_CHAIN:
        assert main([cmd] + common + extra) == 0, cmd


def test_criterion_8_determinism(tmp_path):
    run_small_chain(tmp_path / "a")
    run_small_chain(tmp_path / "b")
    ra = (tmp_path / "a/work/report.json").read_bytes()
    rb = (tmp_path / "b/work/report.json").read_bytes()
    emit(
        "criterion 8 (determinism)",
        ra == rb,
        f"two end-to-end runs, identical config: report.json byte-identical "
        f"({len(ra)} bytes)",
    )


def test_criterion_9_desk_scale_runtime(tmp_path):
    # defaults everywhere: 200 train + 80 test, 50 bands, 200 trees x 4 targets
    common = ["--dataset-dir", str(tmp_path / "data"), "--workdir",
              str(tmp_path / "work"), "--seed", "4242"]
    start = time.time()
    for cmd in ("gen-data", "extract", "train", "explain", "aggregate", "prune",
                "audit", "report"):
        rc = main([cmd] + common)
        assert rc == 0, cmd
    elapsed = time.time() - start

    prune_doc = json.loads((tmp_path / "work/prune_report.json").read_text())
    deltas = [prune_doc["targets"][t]["percent_delta"] for t in TARGETS]
    delta_ok = all(d is not None and re.match(r"^\([+-]?\d+%\)$", d) for d in deltas)

    emit(
        "criterion 9 (desk-scale runtime)",
        elapsed < 180.0 and delta_ok,
        f"gen-data through report in {elapsed:.1f}s (< 180s budget); "
        f"prune_report deltas {deltas}",
    )
