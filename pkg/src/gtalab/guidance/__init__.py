from gtalab.guidance.freeze import apply_freeze_policy, weight_decay_mask
from gtalab.guidance.losses import (
    LossBreakdown,
    feature_guide_loss,
    gta_loss,
    l2sp_penalty,
    total_loss,
)

__all__ = [
    "LossBreakdown",
    "apply_freeze_policy",
    "feature_guide_loss",
    "gta_loss",
    "l2sp_penalty",
    "total_loss",
    "weight_decay_mask",
]
