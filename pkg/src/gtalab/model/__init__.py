from gtalab.model.trace import AttentionTrace
from gtalab.model.vit import (
    ViTModel,
    attention_head,
    cls_attention_row,
    forward,
    msa,
    parameter_count,
    parameter_shapes,
    patch_embed,
    transformer_block,
)

__all__ = [
    "AttentionTrace",
    "ViTModel",
    "attention_head",
    "cls_attention_row",
    "forward",
    "msa",
    "parameter_count",
    "parameter_shapes",
    "patch_embed",
    "transformer_block",
]
