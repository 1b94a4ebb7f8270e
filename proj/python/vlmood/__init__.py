"""Prompt-based out-of-distribution scoring for VLM embedding bundles."""

from ._core import (
    BundleError,
    ConfigError,
    InvalidArgument,
    auroc,
    cosine,
    fpr_at_tpr,
    generate_synthetic,
    pearson_r,
    run_sweep,
    score_bundle,
    score_energy,
    score_id,
    score_id_ood,
    score_maxlogit,
    score_msp,
    score_odin,
    validate_bundle,
)

__all__ = [
    "BundleError",
    "ConfigError",
    "InvalidArgument",
    "auroc",
    "cosine",
    "fpr_at_tpr",
    "generate_synthetic",
    "pearson_r",
    "run_sweep",
    "score_bundle",
    "score_energy",
    "score_id",
    "score_id_ood",
    "score_maxlogit",
    "score_msp",
    "score_odin",
    "validate_bundle",
]
