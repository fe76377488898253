import numpy as np

from gtalab.core.types import AugmentParams

PAD = 4


def sample_augment_params(rng: np.random.Generator, pad: int = PAD) -> AugmentParams:
    return AugmentParams(
        flip=bool(rng.random() < 0.5),  # noqa: PLR2004
        dy=int(rng.integers(0, 2 * pad + 1)),
        dx=int(rng.integers(0, 2 * pad + 1)),
    )


def apply_augment(image: np.ndarray, params: AugmentParams, pad: int = PAD) -> np.ndarray:
    """Optional horizontal flip, then zero-pad by `pad` and crop back to H x W at (dy, dx)."""
    height, width = image.shape[-2:]
    out = image[..., ::-1] if params.flip else image
    padded = np.pad(out, [(0, 0)] * (image.ndim - 2) + [(pad, pad), (pad, pad)])
    return np.ascontiguousarray(padded[..., params.dy : params.dy + height, params.dx : params.dx + width])


def basic_augment(image: np.ndarray, rng: np.random.Generator, pad: int = PAD) -> np.ndarray:
    return apply_augment(image, sample_augment_params(rng, pad), pad)
