import math

import numpy as np
import pytest

from gtalab.core.enums import FeatureKind, GuidanceMethod
from gtalab.core.errors import CheckpointIncompatibleError, ConfigError, ContractError
from gtalab.core.types import GuidanceSpec, ViTConfig
from gtalab.guidance import feature_guide_loss, gta_loss, l2sp_penalty, total_loss
from gtalab.model.trace import AttentionTrace
from gtalab.model.vit import ViTModel, forward
from gtalab.ndtensor import Tape, Tensor, finite_diff_check_params, no_grad
from gtalab.ndtensor import ops
from gtalab.train.optimizer import OptimizerState, adamw_step

CONFIG = ViTConfig(image_size=8, patch_size=4, embed_dim=4, heads=1, depth=1, num_classes=2)


def _trace(blocks, msa_outputs=None, block_outputs=None, config=CONFIG):
    return AttentionTrace(
        config=config,
        pass_id=0,
        logits=[[Tensor(a) if not isinstance(a, Tensor) else a for a in heads] for heads in blocks],
        msa_outputs=msa_outputs or [],
        block_outputs=block_outputs or [],
    )


def _logits_with_cls_row(row):
    matrix = np.zeros((len(row) + 1, len(row) + 1))
    matrix[0, 1:] = row
    return matrix


class TestGtaLoss:
    """Test the [cls]-logit guidance term."""

    def test_identical_traces(self, rng):
        logits = rng.normal(size=(3, 3))
        assert gta_loss(_trace([[logits]]), _trace([[logits]])).item() == 0.0

    def test_single_head_distance(self):
        src = _trace([[_logits_with_cls_row([1.0, 2.0])]])
        tgt = _trace([[_logits_with_cls_row([1.0, 3.0])]])
        assert gta_loss(src, tgt).item() == pytest.approx(1.0)

    def test_sums_over_blocks_and_heads(self):
        src = _trace([[np.zeros((3, 3)), np.zeros((3, 3))], [np.zeros((3, 3)), np.zeros((3, 3))]])
        tgt = _trace(
            [
                [_logits_with_cls_row([1.0, 0.0]), _logits_with_cls_row([0.0, 2.0])],
                [np.zeros((3, 3)), _logits_with_cls_row([1.0, 1.0])],
            ]
        )
        assert gta_loss(src, tgt).item() == pytest.approx(1.0 + 4.0 + 2.0)

    def test_averages_over_batch(self):
        src = _trace([[np.zeros((2, 3, 3))]])
        batch = np.stack([_logits_with_cls_row([1.0, 0.0]), _logits_with_cls_row([3.0, 0.0])])
        assert gta_loss(src, _trace([[batch]])).item() == pytest.approx((1.0 + 9.0) / 2)

    def test_gradient_wrt_target_row(self):
        src = _trace([[np.zeros((3, 3))]])
        with Tape() as tape:
            tgt_logits = tape.variable(_logits_with_cls_row([1.0, -1.0]))
            grads = tape.backward(gta_loss(src, _trace([[tgt_logits]])))
        np.testing.assert_allclose(grads[tgt_logits.node_id].numpy(), _logits_with_cls_row([2.0, -2.0]))

    def test_gradient_equals_twice_the_difference(self, rng):
        src_logits = rng.normal(size=(5, 5))
        tgt_values = rng.normal(size=(5, 5))
        with Tape() as tape:
            tgt_logits = tape.variable(tgt_values)
            grads = tape.backward(gta_loss(_trace([[src_logits]]), _trace([[tgt_logits]])))
        expected = np.zeros((5, 5))
        expected[0, 1:] = 2.0 * (tgt_values[0, 1:] - src_logits[0, 1:])
        assert np.max(np.abs(grads[tgt_logits.node_id].numpy() - expected)) < 1e-10

    def test_only_cls_row_without_self_logit_matters(self, rng):
        src_logits = rng.normal(size=(4, 4))
        tgt_logits = rng.normal(size=(4, 4))
        base = gta_loss(_trace([[src_logits]]), _trace([[tgt_logits]])).item()
        for row, col in [(0, 0), (1, 2), (3, 0), (2, 2)]:
            for logits in (src_logits, tgt_logits):
                perturbed = logits.copy()
                perturbed[row, col] += 7.5
                if logits is src_logits:
                    value = gta_loss(_trace([[perturbed]]), _trace([[tgt_logits]])).item()
                else:
                    value = gta_loss(_trace([[src_logits]]), _trace([[perturbed]])).item()
                assert value == base

    def test_nonnegative(self, rng):
        for _ in range(20):
            value = gta_loss(_trace([[rng.normal(size=(3, 3))]]), _trace([[rng.normal(size=(3, 3))]])).item()
            assert value >= 0.0

    def test_incompatible_layouts(self):
        with pytest.raises(ConfigError):
            gta_loss(_trace([[np.zeros((3, 3))]]), _trace([[np.zeros((3, 3)), np.zeros((3, 3))]]))

    def test_source_receives_no_gradient(self, micro_config, rng):
        source = ViTModel.initialize(micro_config, rng)
        target = ViTModel.initialize(micro_config, rng)
        images = rng.random((2, 3, 8, 8))
        with Tape() as tape:
            src_params = tape.bind(source.params)
            tgt_params = tape.bind(target.params)
            _, src_trace = forward(images, src_params, micro_config, capture=True)
            logits, tgt_trace = forward(images, tgt_params, micro_config, capture=True)
            ce = ops.cross_entropy(logits, ops.one_hot(np.array([0, 1]), 2))
            spec = GuidanceSpec(method=GuidanceMethod.GTA, lam=10.0)
            breakdown = total_loss(ce, spec, src_trace, tgt_trace)
            grads = tape.gradients(breakdown.total, src_params)
        assert breakdown.reg.item() > 0.0
        for grad in grads.values():
            np.testing.assert_array_equal(grad, 0.0)

    @pytest.mark.parametrize("config_name", ["micro_config", "tiny_config"])
    def test_full_objective_gradient(self, config_name, request, rng):
        config = request.getfixturevalue(config_name)
        source = ViTModel.initialize(config, rng)
        target = ViTModel.initialize(config, rng)
        images = rng.random((2, 3, config.image_size, config.image_size))
        targets = ops.one_hot(np.array([1, 0]), config.num_classes)
        with no_grad():
            _, src_trace = forward(images, source.bind(), config, capture=True)
        spec = GuidanceSpec(method=GuidanceMethod.GTA, lam=0.7)

        def loss(params):
            logits, trace = forward(images, params, config, capture=True)
            return total_loss(ops.cross_entropy(logits, targets), spec, src_trace, trace).total

        errors = finite_diff_check_params(loss, target.params)
        assert max(errors.values()) < 1e-5


class TestFeatureGuideLoss:
    """Test the MSA-output and block-output guidance variants."""

    def test_identical_traces(self, rng):
        features = [Tensor(rng.normal(size=(3, 2)))]
        src = _trace([[np.zeros((3, 3))]], msa_outputs=features, block_outputs=features)
        tgt = _trace([[np.zeros((3, 3))]], msa_outputs=features, block_outputs=features)
        assert feature_guide_loss(FeatureKind.MSA_OUTPUT, src, tgt).item() == 0.0

    def test_all_ones_difference(self):
        src = _trace([[np.zeros((3, 3))]], block_outputs=[Tensor(np.zeros((2, 2)))])
        tgt = _trace([[np.zeros((3, 3))]], block_outputs=[Tensor(np.ones((2, 2)))])
        assert feature_guide_loss(FeatureKind.BLOCK_OUTPUT, src, tgt).item() == pytest.approx(4.0)

    def test_zero_projection_gives_zero_msa_distance(self, micro_config, rng):
        models = []
        for _ in range(2):
            model = ViTModel.initialize(micro_config, rng)
            for block in range(micro_config.depth):
                model.params[f"blocks.{block}.attn.proj.weight"] = np.zeros((4, 4))
            models.append(model)
        image = rng.random((3, 8, 8))
        _, src = models[0].forward(image, capture=True)
        _, tgt = models[1].forward(image, capture=True)
        assert feature_guide_loss(FeatureKind.MSA_OUTPUT, src, tgt).item() == 0.0
        assert feature_guide_loss(FeatureKind.BLOCK_OUTPUT, src, tgt).item() > 0.0


class TestL2SP:
    """Test the starting-point penalty."""

    def test_at_initialization(self, tiny_model):
        assert l2sp_penalty(tiny_model.params, tiny_model.params).item() == 0.0

    def test_single_weight_difference(self):
        init = {"w": np.zeros(2), "v": np.ones(3)}
        params = {"w": np.ones(2), "v": np.ones(3)}
        assert l2sp_penalty(params, init).item() == pytest.approx(2.0)

    def test_head_is_excluded(self, tiny_model):
        params = dict(tiny_model.params)
        params["head.weight"] = params["head.weight"] + 5.0
        assert l2sp_penalty(params, tiny_model.params).item() == 0.0

    def test_mismatched_maps(self):
        with pytest.raises(CheckpointIncompatibleError):
            l2sp_penalty({"w": np.zeros(2)}, {"u": np.zeros(2)})

    def test_increases_after_update(self, tiny_model, rng):
        init = tiny_model.params
        grads = {name: rng.normal(size=value.shape) for name, value in init.items()}
        updated, _ = adamw_step(init, grads, OptimizerState.zeros(init), lr=1e-3)
        assert l2sp_penalty(updated, init).item() > l2sp_penalty(init, init).item()


class TestTotalLoss:
    """Test L = CE + lambda * regularizer."""

    def test_zero_lambda_returns_ce_itself(self):
        ce = Tensor(0.42)
        breakdown = total_loss(ce, GuidanceSpec(method=GuidanceMethod.GTA, lam=0.0))
        assert breakdown.total is ce
        assert breakdown.reg.item() == 0.0

    def test_method_none_ignores_lambda(self):
        ce = Tensor(0.42)
        breakdown = total_loss(ce, GuidanceSpec(method=GuidanceMethod.NONE, lam=5.0))
        assert breakdown.total is ce

    def test_identical_source_and_target(self, tiny_model, rng):
        image = rng.random((3, 16, 16))
        logits, src = tiny_model.forward(image, capture=True)
        _, tgt = tiny_model.forward(image, capture=True)
        ce = Tensor(0.5)
        breakdown = total_loss(ce, GuidanceSpec(method="gta", lam=1.0), src, tgt)
        assert breakdown.reg.item() == 0.0
        assert breakdown.total.item() == ce.item()
        assert logits.shape == (3,)

    def test_arithmetic(self):
        params = {"w": Tensor([1.0, math.sqrt(0.5)])}
        spec = GuidanceSpec(method=GuidanceMethod.L2SP, lam=2.0)
        breakdown = total_loss(Tensor(0.7), spec, params=params, init_params={"w": np.zeros(2)})
        assert breakdown.reg.item() == pytest.approx(1.5)
        assert breakdown.total.item() == pytest.approx(3.7)
        assert breakdown.as_floats()["ce"] == pytest.approx(0.7)

    def test_trace_methods_need_traces(self):
        with pytest.raises(ContractError):
            total_loss(Tensor(0.1), GuidanceSpec(method=GuidanceMethod.MSA_GUIDE, lam=1.0))

    def test_l2sp_needs_parameters(self):
        with pytest.raises(ContractError):
            total_loss(Tensor(0.1), GuidanceSpec(method=GuidanceMethod.L2SP, lam=1.0))

    def test_negative_lambda(self):
        with pytest.raises(ConfigError):
            GuidanceSpec(method=GuidanceMethod.GTA, lam=-1.0)

    def test_method_aliases(self):
        assert GuidanceSpec(method="gta-attn-logits", lam=1.0).method == GuidanceMethod.GTA
        assert GuidanceSpec(method="block-output-guide", lam=1.0).method == GuidanceMethod.BLOCK_GUIDE
