"""Box mixing of image pairs and TransMix label mixing from [cls] attention."""

import math

import numpy as np

from gtalab.core.constants import EPS
from gtalab.core.errors import ContractError, DimensionError
from gtalab.core.types import CutBox, MixedLabel, ViTConfig
from gtalab.model.trace import AttentionTrace

NORMALIZATION_TOLERANCE = 1e-6


def sample_cut_box(rng: np.random.Generator, height: int, width: int, fraction: float) -> CutBox:
    """
    Box with sides sqrt(fraction) * (W, H), placed uniformly among the
    positions where it fits inside the image.
    """
    if not 0.0 <= fraction <= 1.0:
        msg = f"Box area fraction must lie in [0, 1], got {fraction}"
        raise ContractError(msg)
    side = math.sqrt(fraction)
    box_w = round(width * side)
    box_h = round(height * side)
    x0 = int(rng.integers(0, width - box_w + 1))
    y0 = int(rng.integers(0, height - box_h + 1))
    return CutBox(x0=x0, y0=y0, x1=x0 + box_w, y1=y0 + box_h)


def mix_images(img_a: np.ndarray, img_b: np.ndarray, box: CutBox) -> np.ndarray:
    """Pixels inside the box come from img_b, the rest from img_a. Works on single images and batches."""
    if img_a.shape != img_b.shape:
        msg = f"Cannot mix images of shapes {img_a.shape} and {img_b.shape}"
        raise DimensionError(msg)
    height, width = img_a.shape[-2:]
    if box.x1 > width or box.y1 > height:
        msg = f"{box} does not fit a {height}x{width} image"
        raise ContractError(msg)
    mixed = np.array(img_a, dtype=np.float64, copy=True)
    mixed[..., box.y0 : box.y1, box.x0 : box.x1] = img_b[..., box.y0 : box.y1, box.x0 : box.x1]
    return mixed


def box_patch_mask(box: CutBox, config: ViTConfig) -> np.ndarray:
    """
    Boolean mask over the N patches (row-major) marking patches whose pixel
    majority lies inside the box. Exactly half counts as inside.
    """
    p = config.patch_size
    inside = np.zeros((config.image_size, config.image_size), dtype=np.float64)
    inside[box.y0 : box.y1, box.x0 : box.x1] = 1.0
    coverage = inside.reshape(config.grid_size, p, config.grid_size, p).mean(axis=(1, 3))
    return (coverage >= 0.5).reshape(-1)  # noqa: PLR2004


def transmix_coefficient(cls_attention: np.ndarray, patch_mask: np.ndarray) -> float:
    """Share of the [cls] attention that falls on the masked patches."""
    attention = np.asarray(cls_attention, dtype=np.float64)
    mask = np.asarray(patch_mask, dtype=bool)
    if attention.shape != mask.shape or attention.ndim != 1:
        msg = f"Attention {attention.shape} and patch mask {mask.shape} must be equal 1-D shapes"
        raise DimensionError(msg)
    if np.any(attention < 0) or abs(attention.sum() - 1.0) > NORMALIZATION_TOLERANCE:
        msg = f"TransMix attention must be a probability vector (sum={attention.sum():.8f})"
        raise ContractError(msg)
    return float(np.clip(attention[mask].sum(), 0.0, 1.0))


def cls_patch_attention(trace: AttentionTrace) -> np.ndarray:
    """
    Final-block [cls] attention over the N patches: softmax of each head's
    logit row, restricted to patches, re-normalized and averaged over heads.
    Returns shape (N,) or (B, N).
    """
    rows = []
    for logits in trace.logits[-1]:
        row = logits.data[..., 0, :]
        shifted = np.exp(row - row.max(axis=-1, keepdims=True))
        patches = (shifted / shifted.sum(axis=-1, keepdims=True))[..., 1:]
        rows.append(patches / np.maximum(patches.sum(axis=-1, keepdims=True), EPS))
    return np.mean(rows, axis=0)


def mixed_label(label_a: int, label_b: int, cls_attention: np.ndarray, patch_mask: np.ndarray) -> MixedLabel:
    return MixedLabel(
        label_a=int(label_a),
        label_b=int(label_b),
        coefficient=transmix_coefficient(cls_attention, patch_mask),
    )


def soft_targets(labels: list[MixedLabel], num_classes: int) -> np.ndarray:
    """(B, C) target rows with 1-c on label_a and c on label_b."""
    targets = np.zeros((len(labels), num_classes))
    for row, label in enumerate(labels):
        targets[row, label.label_a] += 1.0 - label.coefficient
        targets[row, label.label_b] += label.coefficient
    return targets
