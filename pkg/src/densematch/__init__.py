"""Probabilistic dense correspondence via hierarchical match densities.

Estimates per-pixel discrete distributions over displacements for
optical flow and stereo, decomposed across a coarse-to-fine pyramid.
Point estimates and calibrated confidence fall out of the same
densities, which also drive outlier detection and label propagation.
"""

from .density import (
    FullDensity,
    MatchDensity,
    Support,
    SupportWindow,
    compose_full_density,
    compose_residual_fields,
    confidence_map,
    density_mode,
    density_to_vector,
    kl_loss,
    mean_log_likelihood,
    select_peak_window,
    vector_to_density,
)
from .fields import MotionField, ScalarImage, downsample_field, upsample_field, warp_backward
from .features import CENSUS_BITS, FeaturePyramid, build_pyramid, census_transform, match_cost
from .matcher import LevelOutput, MatchConfig, evaluate_levels, match_level, match_pair
from .metrics import EvalReport, compute_epe_fl
from .propagation import (
    LabelProbMap,
    hard_labels,
    propagate_sequence,
    score_segmentation,
    splat_forward,
)
from .reliability import (
    OutlierReport,
    classify_by_fb_consistency,
    classify_by_uncertainty,
    score_classification,
)

__version__ = "0.1.0"

__all__ = [
    "CENSUS_BITS",
    "EvalReport",
    "FeaturePyramid",
    "FullDensity",
    "LabelProbMap",
    "LevelOutput",
    "MatchConfig",
    "MatchDensity",
    "MotionField",
    "OutlierReport",
    "ScalarImage",
    "Support",
    "SupportWindow",
    "build_pyramid",
    "census_transform",
    "classify_by_fb_consistency",
    "classify_by_uncertainty",
    "compose_full_density",
    "compose_residual_fields",
    "confidence_map",
    "compute_epe_fl",
    "density_mode",
    "density_to_vector",
    "downsample_field",
    "evaluate_levels",
    "hard_labels",
    "kl_loss",
    "match_cost",
    "match_level",
    "match_pair",
    "mean_log_likelihood",
    "propagate_sequence",
    "score_classification",
    "score_segmentation",
    "select_peak_window",
    "splat_forward",
    "upsample_field",
    "vector_to_density",
    "warp_backward",
]
