from gtalab.evaluation.evaluate import accuracy, evaluate_model
from gtalab.evaluation.maps import AttentionMap, attention_grids, attention_map, threshold_mask, upsample
from gtalab.evaluation.metrics import (
    LogitDistance,
    accuracy_from_logits,
    foreground_mass,
    jaccard,
    logit_distance_stats,
    mask_to_grid,
    threshold_grid,
)
from gtalab.evaluation.overlay import emit_overlay, overlay_pixels

__all__ = [
    "AttentionMap",
    "LogitDistance",
    "accuracy",
    "accuracy_from_logits",
    "attention_grids",
    "attention_map",
    "emit_overlay",
    "evaluate_model",
    "foreground_mass",
    "jaccard",
    "logit_distance_stats",
    "mask_to_grid",
    "overlay_pixels",
    "threshold_grid",
    "threshold_mask",
    "upsample",
]
