import numpy as np
import pytest

from gtalab.core.enums import Split
from gtalab.core.errors import ConfigError, DataIngestionError
from gtalab.core.types import Dataset, Sample
from gtalab.data import subset_per_class


def _balanced(per_class, classes=3):
    samples = [
        Sample(image=np.full((3, 4, 4), i / 100), label=i % classes, name=f"s{i}")
        for i in range(per_class * classes)
    ]
    return Dataset(samples=samples, split=Split.TRAIN, num_classes=classes)


class TestSubsetPerClass:
    """Test per-class sampling."""

    def test_floor_of_rate(self):
        subset = subset_per_class(_balanced(10), 0.3, seed=0)
        assert subset.class_counts() == {0: 3, 1: 3, 2: 3}

    def test_fifteen_percent_of_twenty(self):
        assert subset_per_class(_balanced(20), 0.15, seed=0).class_counts() == {0: 3, 1: 3, 2: 3}

    def test_at_least_one_per_class(self):
        assert subset_per_class(_balanced(2), 0.15, seed=0).class_counts() == {0: 1, 1: 1, 2: 1}

    def test_full_rate_is_identity(self):
        dataset = _balanced(5)
        subset = subset_per_class(dataset, 1.0, seed=9)
        assert [s.name for s in subset.samples] == [s.name for s in dataset.samples]

    def test_stable_under_seed(self):
        dataset = _balanced(10)
        first = subset_per_class(dataset, 0.5, seed=4)
        second = subset_per_class(dataset, 0.5, seed=4)
        assert [s.name for s in first.samples] == [s.name for s in second.samples]

    def test_order_preserved(self):
        subset = subset_per_class(_balanced(10), 0.5, seed=1)
        indices = [int(s.name[1:]) for s in subset.samples]
        assert indices == sorted(indices)

    def test_invalid_rate(self):
        with pytest.raises(ConfigError):
            subset_per_class(_balanced(4), 0.0, seed=0)

    def test_empty_class(self):
        dataset = _balanced(4)
        dataset.num_classes = 4
        with pytest.raises(DataIngestionError, match="Class 3"):
            subset_per_class(dataset, 0.5, seed=0)
