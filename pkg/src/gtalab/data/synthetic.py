"""
Synthetic glyph-on-texture classification task.

Each class is a parametric glyph (disk, ring, cross or bars with a
class-specific size and orientation) drawn over one of B procedural
stripe textures. In the train split the texture id matches the class-linked
id with probability rho; in the test and upstream splits textures are
assigned independently of the class.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from gtalab.core.constants import MAX_SYNTHETIC_CLASSES
from gtalab.core.enums import Split
from gtalab.core.errors import ContractError
from gtalab.core.types import Dataset, Sample, SyntheticSpec

logger = logging.getLogger(__name__)

FAMILIES = ("disk", "ring", "cross", "bars")
SUPERSAMPLE = 4
SIZE_BASE = 0.46
SIZE_STEP = 0.06
SIZE_JITTER = 0.025
CENTER_JITTER = 0.15
UPSTREAM_SIZE_SHIFT = 0.03
UPSTREAM_ANGLE_SHIFT = math.pi / 8
GLYPH_COLOR = np.array([1.0, 0.92, 0.35])
MASK_FRACTION_RANGE = (0.05, 0.40)

_SPLIT_CODES = {Split.UPSTREAM_TRAIN: 0, Split.TRAIN: 1, Split.TEST: 2}


@dataclass(frozen=True)
class GlyphParams:
    family: str
    size: float
    angle: float


def class_glyph(label: int, split: Split) -> GlyphParams:
    """
    Glyph parameters of a class; the upstream split uses a disjoint size/angle range.

    Every class gets its own (family, size) pair, so glyphs stay distinct even
    for rotation-invariant families.
    """
    if not 0 <= label < MAX_SYNTHETIC_CLASSES:
        msg = f"Class {label} has no glyph; at most {MAX_SYNTHETIC_CLASSES} classes are supported"
        raise ContractError(msg)
    variant = label // len(FAMILIES)
    size = SIZE_BASE + SIZE_STEP * variant
    angle = variant * math.pi / 4
    if split == Split.UPSTREAM_TRAIN:
        size += UPSTREAM_SIZE_SHIFT
        angle += UPSTREAM_ANGLE_SHIFT
    return GlyphParams(family=FAMILIES[label % len(FAMILIES)], size=size, angle=angle)


def _glyph_inside(glyph: GlyphParams, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    r = glyph.size
    if glyph.family == "disk":
        return u * u + v * v <= r * r
    if glyph.family == "ring":
        rr = u * u + v * v
        return (rr <= r * r) & (rr >= (0.55 * r) ** 2)
    if glyph.family == "cross":
        half = 0.25 * r
        horizontal = (np.abs(u) <= r) & (np.abs(v) <= half)
        vertical = (np.abs(v) <= r) & (np.abs(u) <= half)
        return horizontal | vertical
    half = 0.2 * r
    offset = 0.5 * r
    in_length = np.abs(u) <= r
    return in_length & ((np.abs(v - offset) <= half) | (np.abs(v + offset) <= half))


def render_glyph(glyph: GlyphParams, center: tuple[float, float], image_size: int) -> np.ndarray:
    """Anti-aliased glyph coverage in [0, 1] on an H x W grid (supersampled)."""
    fine = image_size * SUPERSAMPLE
    coords = (np.arange(fine) + 0.5) / fine * 2.0 - 1.0
    x, y = np.meshgrid(coords - center[0], coords - center[1])
    cos_a, sin_a = math.cos(glyph.angle), math.sin(glyph.angle)
    u = cos_a * x + sin_a * y
    v = -sin_a * x + cos_a * y
    inside = _glyph_inside(glyph, u, v).astype(np.float64)
    return inside.reshape(image_size, SUPERSAMPLE, image_size, SUPERSAMPLE).mean(axis=(1, 3))


def render_texture(texture_id: int, num_textures: int, image_size: int, phase: float) -> np.ndarray:
    """Oriented stripe texture with a per-id palette, shape (3, H, W), values in [0.1, 0.7]."""
    coords = np.arange(image_size) / image_size
    x, y = np.meshgrid(coords, coords)
    angle = texture_id * math.pi / num_textures
    frequency = 2 + texture_id % 3
    along = math.cos(angle) * x + math.sin(angle) * y
    wave = 0.5 + 0.5 * np.sin(2 * math.pi * frequency * along + phase)
    hue = texture_id / num_textures
    base = 0.4 + 0.3 * np.cos(2 * math.pi * (hue + np.array([0.0, 1 / 3, 2 / 3])))
    return np.clip(base[:, None, None] * (0.5 + 0.5 * wave)[None], 0.1, 0.7)


def _background_id(spec: SyntheticSpec, split: Split, label: int, k: int, rng: np.random.Generator) -> int:
    if split == Split.TRAIN:
        if rng.random() < spec.rho:
            return label
        return int(rng.integers(spec.num_textures))
    # stratified so that every (class, texture) pair occurs equally often
    return (label + k) % spec.num_textures


def generate_sample(spec: SyntheticSpec, seed: int, split: Split, label: int, k: int) -> Sample:
    index = label * spec.per_class + k
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_SPLIT_CODES[split], index)))
    background = _background_id(spec, split, label, k, rng)
    glyph = class_glyph(label, split)
    glyph = GlyphParams(glyph.family, glyph.size * (1 + rng.uniform(-SIZE_JITTER, SIZE_JITTER)), glyph.angle)
    center = tuple(rng.uniform(-CENTER_JITTER, CENTER_JITTER, size=2))
    coverage = render_glyph(glyph, center, spec.image_size)
    texture = render_texture(background, spec.num_textures, spec.image_size, rng.uniform(0, 2 * math.pi))
    image = texture * (1.0 - coverage) + GLYPH_COLOR[:, None, None] * coverage
    image = np.clip(image + rng.normal(0.0, spec.noise, size=image.shape), 0.0, 1.0)
    mask = coverage >= 0.5  # noqa: PLR2004
    fraction = mask.mean()
    if not MASK_FRACTION_RANGE[0] <= fraction <= MASK_FRACTION_RANGE[1]:
        msg = f"Glyph {glyph} covers {fraction:.3f} of the image, outside {MASK_FRACTION_RANGE}"
        raise ContractError(msg)
    name = f"{split.value}_{index:05d}"
    return Sample(image=image, label=label, mask=mask, background_id=background, name=name)


def generate_synthetic_dataset(spec: SyntheticSpec, seed: int, split: Split | str) -> Dataset:
    """Deterministic function of (spec, seed, split); samples are ordered class by class."""
    split = Split(split)
    samples = [
        generate_sample(spec, seed, split, label, k)
        for label in range(spec.classes)
        for k in range(spec.per_class)
    ]
    msg = f"Generated {len(samples)} {split.value} samples ({spec.classes} classes, rho={spec.rho})"
    logger.info(msg)
    return Dataset(samples=samples, split=split, seed=seed, spec=spec)
