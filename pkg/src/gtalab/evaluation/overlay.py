from pathlib import Path

import numpy as np
from PIL import Image

from gtalab.data.image_dir import quantize
from gtalab.evaluation.maps import AttentionMap

OVERLAY_ALPHA = 0.5


def overlay_pixels(
    image: np.ndarray, attention: AttentionMap | np.ndarray, alpha: float = OVERLAY_ALPHA
) -> np.ndarray:
    """
    H x W x 3 uint8 overlay: the grayscale image with red opacity equal to
    the max-normalized map, green and blue dimmed by alpha times the map.
    """
    if isinstance(attention, AttentionMap):
        values = attention.values
    else:
        values = np.asarray(attention, dtype=np.float64)
    peak = values.max()
    weight = values / peak if peak > 0 else np.zeros_like(values)
    gray = image.mean(axis=0)
    red = gray + weight * (1.0 - gray)
    green_blue = gray * (1.0 - alpha * weight)
    return quantize(np.stack([red, green_blue, green_blue], axis=-1))


def emit_overlay(image: np.ndarray, attention: AttentionMap | np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(overlay_pixels(image, attention)).save(path, format="PPM")
    return path
