"""Radiomics texture features, local maps and a small training kit."""

from ._radfuse import (
    TEXTURE_KEYS,
    alpha_schedule,
    average_precision,
    binary_metrics,
    decorr_loss,
    default_feature_keys,
    extract_global,
    fit_lasso,
    local_feature_map,
    roc_auc,
    rolling_folds,
    run_experiment,
    synth_phantom,
    total_loss,
)

__all__ = [
    "TEXTURE_KEYS",
    "alpha_schedule",
    "average_precision",
    "binary_metrics",
    "decorr_loss",
    "default_feature_keys",
    "extract_global",
    "fit_lasso",
    "local_feature_map",
    "roc_auc",
    "rolling_folds",
    "run_experiment",
    "synth_phantom",
    "total_loss",
]
