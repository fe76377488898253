import numpy as np
import pytest

from gtalab.core.enums import MapMode
from gtalab.core.errors import ContractError
from gtalab.evaluation import attention_grids, attention_map, threshold_mask, upsample
from gtalab.model.trace import AttentionTrace
from gtalab.ndtensor import Tensor


@pytest.fixture
def trace(tiny_config, rng):
    logits = [[Tensor(rng.normal(size=(17, 17))) for _ in range(2)] for _ in range(2)]
    return AttentionTrace(config=tiny_config, pass_id=0, logits=logits)


def _softmax(row):
    e = np.exp(row - row.max())
    return e / e.sum()


class TestAttentionMaps:
    """Test [cls] attention maps and their thresholded masks."""

    def test_final_block_is_max_over_heads(self, trace):
        expected = np.maximum(*(_softmax(h.data[0, 1:]) for h in trace.logits[-1])).reshape(4, 4)
        np.testing.assert_allclose(attention_grids(trace, MapMode.FINAL_BLOCK), expected)

    def test_all_blocks_dominates_final(self, trace):
        final = attention_grids(trace, MapMode.FINAL_BLOCK)
        every = attention_grids(trace, MapMode.ALL_BLOCKS_MAX)
        assert np.all(every >= final)

    def test_upsampled_map_constant_within_patches(self, trace):
        attention = attention_map(trace)
        assert attention.values.shape == (16, 16)
        assert attention.patch_size == 4
        for i in range(4):
            for j in range(4):
                cell = attention.values[4 * i : 4 * i + 4, 4 * j : 4 * j + 4]
                assert np.all(cell == attention.grid[i, j])

    def test_source_label(self, trace):
        assert attention_map(trace).source == "block 1"
        assert attention_map(trace, MapMode.ALL_BLOCKS_MAX).source == "max over all blocks"

    def test_batched_trace(self, tiny_config, rng):
        logits = [[Tensor(rng.normal(size=(3, 17, 17))) for _ in range(2)]]
        batched = AttentionTrace(config=tiny_config, pass_id=0, logits=logits)
        assert attention_grids(batched).shape == (3, 4, 4)
        rows = [[Tensor(h.data[2]) for h in logits[0]]]
        single = AttentionTrace(config=tiny_config, pass_id=0, logits=rows)
        np.testing.assert_allclose(attention_map(batched, sample=2).grid, attention_grids(single))

    def test_threshold_mask_covers_whole_patches(self, trace):
        mask = threshold_mask(attention_map(trace), 0.6)
        assert mask.shape == (16, 16)
        np.testing.assert_array_equal(mask, upsample(mask[::4, ::4], 4))
        assert mask.any()

    def test_empty_trace(self, tiny_config):
        with pytest.raises(ContractError):
            attention_grids(AttentionTrace(config=tiny_config, pass_id=0))
