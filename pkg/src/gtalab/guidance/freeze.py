from collections.abc import Mapping

import numpy as np

from gtalab.core.enums import FreezePolicy
from gtalab.model.vit import parameter_group

TRAINABLE_GROUPS = {
    FreezePolicy.NONE: {"attention", "ffn", "norm", "embedding", "head"},
    FreezePolicy.ATTENTION_ONLY: {"attention", "head"},
    FreezePolicy.FFN_ONLY: {"ffn", "head"},
}


def apply_freeze_policy(policy: FreezePolicy, params: Mapping[str, np.ndarray]) -> dict[str, bool]:
    """
    Trainable mask over a parameter map.

    attention-only keeps Wq/Wk/Wv/Wproj and the head trainable; ffn-only
    keeps the feed-forward weights and the head. Norm and embedding
    parameters are frozen under both.
    """
    groups = TRAINABLE_GROUPS[FreezePolicy(policy)]
    return {name: parameter_group(name) in groups for name in params}


def weight_decay_mask(params: Mapping[str, np.ndarray]) -> dict[str, bool]:
    """Weight matrices decay; biases, norms, [cls] token and positions do not."""
    return {
        name: np.ndim(value) == 2 and name != "pos_embed"  # noqa: PLR2004
        for name, value in params.items()
    }
