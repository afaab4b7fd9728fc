"""specaudit: red-teaming toolkit for hyperspectral soil-parameter regressors."""

from .aggregate import (
    BandGroupMatrix,
    GroupMap,
    band_transformation_matrix,
    global_importance,
    group_attribution,
    importance_order,
    transformation_importance,
)
from .audit import (
    CONCENTRATED_IMPORTANCE,
    RANGE_COLLAPSE,
    AuditThresholds,
    ExtremeCases,
    RedFlagReport,
    ResidualSummary,
    detect_red_flags,
    explain_extremes,
    mae,
    residual_summary,
)
from .data import (
    TARGET_NAMES,
    TEST,
    TRAIN,
    BandAxis,
    Dataset,
    HyperPatch,
    SoilTargets,
    wavelength_of,
)
from .errors import (
    ConfigError,
    InternalInvariantError,
    OracleIntractableError,
    SpecAuditError,
    ValidationError,
)
from .features import (
    FeatureSchema,
    FeatureTable,
    PatchFeaturizer,
    TransformationGroup,
    extract_dataset,
    extract_patch,
)
from .forest import (
    ForestParams,
    ForestRegressor,
    eval_conditional,
    forest_conditional,
    load_forest,
    save_forest,
)
from .prune import (
    K_LADDER,
    MinimalKResult,
    PruneResult,
    minimal_k,
    prune_and_retrain,
    select_top_k,
)
from .shapley import (
    ShapMatrix,
    TreeShapExplainer,
    beeswarm_data,
    brute_shap,
    dependency_data,
    explain_dataset,
    tree_shap,
)
from .storage import load_dataset, save_dataset
from .synthetic import SyntheticConfig, gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "AuditThresholds",
    "BandAxis",
    "BandGroupMatrix",
    "CONCENTRATED_IMPORTANCE",
    "ConfigError",
    "Dataset",
    "ExtremeCases",
    "FeatureSchema",
    "FeatureTable",
    "ForestParams",
    "ForestRegressor",
    "GroupMap",
    "HyperPatch",
    "InternalInvariantError",
    "K_LADDER",
    "MinimalKResult",
    "OracleIntractableError",
    "PatchFeaturizer",
    "PruneResult",
    "RANGE_COLLAPSE",
    "RedFlagReport",
    "ResidualSummary",
    "ShapMatrix",
    "SoilTargets",
    "SpecAuditError",
    "SyntheticConfig",
    "TARGET_NAMES",
    "TEST",
    "TRAIN",
    "TransformationGroup",
    "TreeShapExplainer",
    "ValidationError",
    "band_transformation_matrix",
    "beeswarm_data",
    "brute_shap",
    "dependency_data",
    "detect_red_flags",
    "eval_conditional",
    "explain_dataset",
    "explain_extremes",
    "extract_dataset",
    "extract_patch",
    "forest_conditional",
    "gen_synthetic",
    "global_importance",
    "group_attribution",
    "importance_order",
    "load_dataset",
    "load_forest",
    "mae",
    "minimal_k",
    "prune_and_retrain",
    "residual_summary",
    "save_dataset",
    "save_forest",
    "select_top_k",
    "transformation_importance",
    "tree_shap",
    "wavelength_of",
]
