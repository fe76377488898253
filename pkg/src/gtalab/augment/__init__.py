from gtalab.augment.basic import apply_augment, basic_augment, sample_augment_params
from gtalab.augment.mixing import (
    box_patch_mask,
    cls_patch_attention,
    mix_images,
    mixed_label,
    sample_cut_box,
    soft_targets,
    transmix_coefficient,
)

__all__ = [
    "apply_augment",
    "basic_augment",
    "box_patch_mask",
    "cls_patch_attention",
    "mix_images",
    "mixed_label",
    "sample_augment_params",
    "sample_cut_box",
    "soft_targets",
    "transmix_coefficient",
]
