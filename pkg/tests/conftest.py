"""Shared pytest fixtures and configuration."""

import numpy as np
import pytest

from gtalab.core.enums import Split
from gtalab.core.types import Dataset, Sample, SyntheticSpec, ViTConfig
from gtalab.data import generate_synthetic_dataset
from gtalab.model.vit import ViTModel


@pytest.fixture
def tiny_config():
    """Depth-2, two-head model on 16x16 images with 4x4 patches."""
    return ViTConfig(image_size=16, patch_size=4, embed_dim=8, heads=2, depth=2, num_classes=3)


@pytest.fixture
def micro_config():
    """Smallest useful model: 8x8 images, four patches, for finite-difference checks."""
    return ViTConfig(image_size=8, patch_size=4, embed_dim=4, heads=2, depth=2, num_classes=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model(tiny_config, rng):
    return ViTModel.initialize(tiny_config, rng)


@pytest.fixture
def toy_dataset(tiny_config, rng):
    """Four random 16x16 samples over three classes, with foreground masks."""
    samples = []
    for i, label in enumerate([0, 1, 2, 1]):
        mask = np.zeros((16, 16), dtype=bool)
        mask[4 : 8 + i, 4:10] = True
        samples.append(Sample(image=rng.random((3, 16, 16)), label=label, mask=mask, name=f"toy_{i}"))
    return Dataset(samples=samples, split=Split.TRAIN, num_classes=tiny_config.num_classes)


@pytest.fixture
def synthetic_spec():
    return SyntheticSpec(classes=3, per_class=4, image_size=16, rho=0.95, num_textures=3, noise=0.02)


@pytest.fixture
def synthetic_train(synthetic_spec):
    return generate_synthetic_dataset(synthetic_spec, seed=0, split=Split.TRAIN)
