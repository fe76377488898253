import numpy as np
import pytest

from gtalab.core.errors import ContractError, DimensionError
from gtalab.train import OptimizerState, adamw_step, cosine_lr


class TestCosineLr:
    """Test the cosine schedule."""

    def test_endpoints(self):
        assert cosine_lr(0, 100, 1e-3) == 1e-3
        assert cosine_lr(100, 100, 1e-3) == 0.0

    def test_midpoint(self):
        assert cosine_lr(50, 100, 1e-3) == pytest.approx(5e-4)

    def test_monotone(self):
        values = [cosine_lr(step, 40, 0.1) for step in range(41)]
        assert all(a >= b for a, b in zip(values, values[1:], strict=False))

    def test_out_of_range(self):
        with pytest.raises(ContractError):
            cosine_lr(101, 100, 1e-3)


class TestAdamW:
    """Test the AdamW update."""

    def test_zero_gradient_no_decay(self):
        params = {"w": np.array([1.0, -2.0])}
        updated, state = adamw_step(params, {"w": np.zeros(2)}, OptimizerState.zeros(params), lr=0.1)
        np.testing.assert_array_equal(updated["w"], params["w"])
        assert state.step == 1

    def test_first_step_closed_form(self):
        params = {"w": np.array(1.0)}
        updated, _ = adamw_step(
            params, {"w": np.array(1.0)}, OptimizerState.zeros(params), lr=0.1, betas=(0.9, 0.999), eps=1e-8
        )
        assert abs(float(updated["w"]) - 0.9) < 1e-7

    def test_decoupled_weight_decay(self):
        params = {"w": np.array([2.0])}
        state = OptimizerState.zeros(params)
        updated, _ = adamw_step(params, {"w": np.zeros(1)}, state, lr=0.1, weight_decay=0.5)
        np.testing.assert_allclose(updated["w"], [2.0 - 0.1 * 0.5 * 2.0])

    def test_decay_mask(self):
        params = {"w": np.array([2.0]), "b": np.array([2.0])}
        grads = {"w": np.zeros(1), "b": np.zeros(1)}
        updated, _ = adamw_step(
            params, grads, OptimizerState.zeros(params), lr=0.1, weight_decay=0.5, decay_mask={"w": True}
        )
        assert updated["w"][0] < 2.0
        assert updated["b"][0] == 2.0

    def test_frozen_tensor_untouched(self):
        params = {"w": np.array([1.0]), "frozen": np.array([3.0])}
        grads = {"w": np.ones(1), "frozen": np.ones(1)}
        state = OptimizerState.zeros(params)
        updated, new_state = adamw_step(params, grads, state, lr=0.1, mask={"w": True, "frozen": False})
        assert updated["frozen"] is params["frozen"]
        np.testing.assert_array_equal(new_state.m["frozen"], 0.0)
        assert updated["w"][0] != 1.0

    def test_does_not_mutate_inputs(self):
        params = {"w": np.array([1.0, 2.0])}
        state = OptimizerState.zeros(params)
        adamw_step(params, {"w": np.ones(2)}, state, lr=0.1, weight_decay=0.1)
        np.testing.assert_array_equal(params["w"], [1.0, 2.0])
        assert state.step == 0
        np.testing.assert_array_equal(state.m["w"], 0.0)

    def test_gradient_shape_mismatch(self):
        params = {"w": np.zeros(2)}
        with pytest.raises(DimensionError):
            adamw_step(params, {"w": np.zeros(3)}, OptimizerState.zeros(params), lr=0.1)
