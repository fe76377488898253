from dataclasses import dataclass

import numpy as np

from gtalab.core.errors import ContractError, DimensionError
from gtalab.model.trace import AttentionTrace

MASS_TOLERANCE = 1e-12


def accuracy_from_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    """Top-1 accuracy; argmax ties resolve to the lowest class index."""
    if len(labels) == 0:
        msg = "accuracy needs a nonempty dataset"
        raise ContractError(msg)
    predictions = np.argmax(logits, axis=-1)
    return float(np.mean(predictions == np.asarray(labels)))


def threshold_grid(values: np.ndarray, mass_fraction: float) -> np.ndarray:
    """
    Keep cells in descending value order until their share of the total mass
    reaches `mass_fraction`. Equal values are taken in row-major order.
    """
    if not 0.0 < mass_fraction <= 1.0:
        msg = f"mass_fraction must lie in (0, 1], got {mass_fraction}"
        raise ContractError(msg)
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0):
        msg = "Attention maps must be nonnegative"
        raise ContractError(msg)
    flat = values.reshape(-1)
    total = flat.sum()
    keep = np.zeros(flat.shape, dtype=bool)
    if total <= 0:
        return keep.reshape(values.shape)
    order = np.argsort(-flat, kind="stable")
    cumulative = np.cumsum(flat[order] / total)
    count = int(np.searchsorted(cumulative, mass_fraction - MASS_TOLERANCE, side="left")) + 1
    keep[order[: min(count, flat.size)]] = True
    return keep.reshape(values.shape)


def jaccard(pred: np.ndarray, truth: np.ndarray) -> float:
    """|pred & truth| / |pred | truth|; 0 for an empty prediction."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        msg = f"jaccard: mask shapes {pred.shape} and {truth.shape} differ"
        raise DimensionError(msg)
    if not truth.any():
        msg = "jaccard: ground-truth mask is empty"
        raise ContractError(msg)
    union = np.logical_or(pred, truth).sum()
    return float(np.logical_and(pred, truth).sum() / union)


def mask_to_grid(mask: np.ndarray, patch_size: int) -> np.ndarray:
    """Downsample an H x W mask to the patch grid; a patch is foreground when at least half its pixels are."""
    height, width = mask.shape
    grid = mask.astype(np.float64).reshape(height // patch_size, patch_size, width // patch_size, patch_size)
    return grid.mean(axis=(1, 3)) >= 0.5  # noqa: PLR2004


def foreground_mass(values: np.ndarray, truth: np.ndarray) -> float:
    """Share of a nonnegative map's mass that falls on foreground cells."""
    total = float(np.sum(values))
    if total <= 0:
        return 0.0
    return float(np.sum(np.where(truth, values, 0.0)) / total)


@dataclass
class LogitDistance:
    """Per-(block, head) L2 distance of [cls] logit rows, averaged over a batch."""

    per_head: np.ndarray
    mean: float
    max: float


def logit_distance_stats(src_trace: AttentionTrace, tgt_trace: AttentionTrace) -> LogitDistance:
    tgt_trace.check_compatible(src_trace)
    per_head = np.zeros((tgt_trace.num_blocks, tgt_trace.num_heads))
    for m, (src_block, tgt_block) in enumerate(zip(src_trace.logits, tgt_trace.logits, strict=True)):
        for l, (src, tgt) in enumerate(zip(src_block, tgt_block, strict=True)):  # noqa: E741
            diff = tgt.data[..., 0, 1:] - src.data[..., 0, 1:]
            per_head[m, l] = float(np.mean(np.sqrt(np.sum(diff * diff, axis=-1))))
    return LogitDistance(per_head=per_head, mean=float(per_head.mean()), max=float(per_head.max()))
