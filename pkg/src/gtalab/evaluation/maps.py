from dataclasses import dataclass

import numpy as np

from gtalab.core.enums import MapMode
from gtalab.core.errors import ContractError
from gtalab.evaluation.metrics import threshold_grid
from gtalab.model.trace import AttentionTrace


@dataclass
class AttentionMap:
    """
    [cls] attention of one image on the patch grid and upsampled to pixels.

    `source` is "block <m>" or "max over all blocks"; `normalization` says
    how the per-head rows were made comparable.
    """

    grid: np.ndarray
    values: np.ndarray
    source: str
    normalization: str = "softmax-over-patches"

    @property
    def patch_size(self) -> int:
        return self.values.shape[0] // self.grid.shape[0]


def _softmax_patches(logits: np.ndarray) -> np.ndarray:
    row = logits[..., 0, 1:]
    shifted = np.exp(row - row.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def attention_grids(trace: AttentionTrace, mode: MapMode = MapMode.FINAL_BLOCK) -> np.ndarray:
    """Max-aggregated softmax [cls] rows on the patch grid: (g, g) or (B, g, g)."""
    if not trace.logits:
        msg = "attention maps need a captured trace"
        raise ContractError(msg)
    mode = MapMode(mode)
    blocks = trace.logits[-1:] if mode == MapMode.FINAL_BLOCK else trace.logits
    rows = [_softmax_patches(logits.data) for block in blocks for logits in block]
    combined = np.max(np.stack(rows), axis=0)
    grid = trace.config.grid_size
    return combined.reshape(*combined.shape[:-1], grid, grid)


def upsample(grid: np.ndarray, patch_size: int) -> np.ndarray:
    """Nearest-neighbour upsampling of the last two axes by the patch size."""
    return np.repeat(np.repeat(grid, patch_size, axis=-2), patch_size, axis=-1)


def attention_map(
    trace: AttentionTrace, mode: MapMode = MapMode.FINAL_BLOCK, sample: int = 0
) -> AttentionMap:
    grids = attention_grids(trace, mode)
    grid = grids[sample] if grids.ndim == 3 else grids  # noqa: PLR2004
    if MapMode(mode) == MapMode.FINAL_BLOCK:
        source = f"block {trace.num_blocks - 1}"
    else:
        source = "max over all blocks"
    return AttentionMap(grid=grid, values=upsample(grid, trace.config.patch_size), source=source)


def threshold_mask(attention: AttentionMap, mass_fraction: float) -> np.ndarray:
    """Pixel mask (H x W) of the patch cells that hold `mass_fraction` of the map's mass."""
    return upsample(threshold_grid(attention.grid, mass_fraction), attention.patch_size)
