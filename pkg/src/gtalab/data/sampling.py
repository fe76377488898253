import math

import numpy as np

from gtalab.core.errors import ConfigError, DataIngestionError
from gtalab.core.types import Dataset

_FLOOR_SLACK = 1e-9


def subset_per_class(dataset: Dataset, rate: float, seed: int) -> Dataset:
    """
    Keep floor(rate * count) samples of every class (at least one), drawn
    uniformly without replacement. Surviving samples keep their order.
    """
    if not 0.0 < rate <= 1.0:
        msg = f"Sampling rate must lie in (0, 1], got {rate}"
        raise ConfigError(msg)
    rng = np.random.default_rng(seed)
    labels = dataset.labels
    keep: list[int] = []
    for label in range(dataset.num_classes):
        members = np.flatnonzero(labels == label)
        if members.size == 0:
            msg = f"Class {label} has no samples in the {dataset.split.value} split"
            raise DataIngestionError(msg)
        count = max(1, math.floor(rate * members.size + _FLOOR_SLACK))
        keep.extend(int(i) for i in rng.choice(members, size=count, replace=False))
    return Dataset(
        samples=[dataset.samples[i] for i in sorted(keep)],
        split=dataset.split,
        seed=dataset.seed,
        spec=dataset.spec,
        num_classes=dataset.num_classes,
    )
