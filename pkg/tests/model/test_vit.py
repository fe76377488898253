import numpy as np
import pytest

from gtalab.core.errors import ConfigError
from gtalab.core.types import ViTConfig
from gtalab.model.vit import (
    ViTModel,
    attention_head,
    classify,
    cls_attention_row,
    forward,
    msa,
    parameter_count,
    parameter_group,
    parameter_shapes,
    patch_embed,
    transformer_block,
)
from gtalab.ndtensor import Tensor, finite_diff_check_params
from gtalab.ndtensor import ops


def _constants(params):
    return {name: Tensor(value) for name, value in params.items()}


class TestViTConfig:
    """Test config validation and derived sizes."""

    def test_patch_count(self, tiny_config):
        assert tiny_config.num_patches == 16
        assert tiny_config.num_tokens == 17
        assert tiny_config.head_dim == 4

    def test_image_not_multiple_of_patch(self):
        with pytest.raises(ConfigError, match="multiple"):
            ViTConfig(image_size=10, patch_size=4, embed_dim=8, heads=2, depth=1, num_classes=2)

    def test_embed_not_divisible_by_heads(self):
        with pytest.raises(ConfigError, match="divisible"):
            ViTConfig(image_size=8, patch_size=4, embed_dim=9, heads=2, depth=1, num_classes=2)

    def test_presets(self):
        config = ViTConfig.preset("tiny", num_classes=8)
        assert (config.image_size, config.patch_size, config.depth) == (16, 4, 4)
        with pytest.raises(ConfigError):
            ViTConfig.preset("huge", num_classes=8)

    def test_parameter_count_golden(self, tiny_config):
        assert parameter_count(tiny_config) == 2259

    def test_parameter_groups(self):
        assert parameter_group("blocks.0.attn.head1.wq") == "attention"
        assert parameter_group("blocks.1.ffn.fc2.bias") == "ffn"
        assert parameter_group("blocks.0.norm1.gamma") == "norm"
        assert parameter_group("norm.beta") == "norm"
        assert parameter_group("pos_embed") == "embedding"
        assert parameter_group("head.weight") == "head"


class TestPatchEmbed:
    """Test tokenization of images into [cls] + patch tokens."""

    def test_shape(self, tiny_model, rng):
        tokens = patch_embed(rng.random((3, 16, 16)), _constants(tiny_model.params), tiny_model.config)
        assert tokens.shape == (17, 8)

    def test_single_patch(self, rng):
        config = ViTConfig(image_size=4, patch_size=4, embed_dim=4, heads=1, depth=1, num_classes=2)
        model = ViTModel.initialize(config, rng)
        assert patch_embed(rng.random((3, 4, 4)), _constants(model.params), config).shape == (2, 4)

    def test_zero_image_keeps_cls_token(self, tiny_model):
        params = _constants(tiny_model.params)
        params["patch_embed.bias"] = Tensor(np.zeros(8))
        params["pos_embed"] = Tensor(np.zeros((17, 8)))
        params["cls_token"] = Tensor(np.arange(8.0))
        tokens = patch_embed(np.zeros((3, 16, 16)), params, tiny_model.config).numpy()
        np.testing.assert_array_equal(tokens[0], np.arange(8.0))
        np.testing.assert_array_equal(tokens[1:], 0.0)

    def test_wrong_image_size(self, tiny_model):
        with pytest.raises(ConfigError):
            patch_embed(np.zeros((3, 8, 8)), _constants(tiny_model.params), tiny_model.config)


class TestAttentionHead:
    """Test a single self-attention head."""

    def test_hand_computed_scalar_case(self):
        one = Tensor([[1.0]])
        logits, out = attention_head(Tensor([[1.0], [1.0]]), one, one, one)
        np.testing.assert_allclose(logits.numpy(), [[1.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose(out.numpy(), [[1.0], [1.0]])

    def test_zero_query_gives_uniform_attention(self, rng):
        z = rng.normal(size=(5, 4))
        wv = rng.normal(size=(4, 2))
        wk = Tensor(rng.normal(size=(4, 2)))
        logits, out = attention_head(Tensor(z), Tensor(np.zeros((4, 2))), wk, Tensor(wv))
        np.testing.assert_array_equal(logits.numpy(), 0.0)
        v = z @ wv
        np.testing.assert_allclose(out.numpy(), np.tile(v.mean(axis=0), (5, 1)), atol=1e-12)

    def test_logits_scaled_by_inverse_sqrt_head_dim(self, rng):
        z = rng.normal(size=(3, 4))
        wq, wk = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        logits, _ = attention_head(Tensor(z), Tensor(wq), Tensor(wk), Tensor(np.eye(4)))
        np.testing.assert_allclose(logits.numpy(), (z @ wq) @ (z @ wk).T / 2.0, atol=1e-12)


class TestMsaAndBlock:
    """Test multi-head attention and the pre-norm block."""

    @pytest.fixture
    def one_head_config(self):
        return ViTConfig(image_size=4, patch_size=4, embed_dim=2, heads=1, depth=1, num_classes=2)

    def test_single_head_identity_projection(self, one_head_config, rng):
        z = Tensor(rng.normal(size=(2, 2)))
        weights = {name: Tensor(rng.normal(size=(2, 2))) for name in ("wq", "wk", "wv")}
        params = {f"blocks.0.attn.head0.{name}": value for name, value in weights.items()}
        params["blocks.0.attn.proj.weight"] = Tensor(np.eye(2))
        out, head_logits = msa(z, params, one_head_config, 0)
        _, expected = attention_head(z, weights["wq"], weights["wk"], weights["wv"])
        np.testing.assert_allclose(out.numpy(), expected.numpy())
        assert len(head_logits) == 1

    def test_identical_heads_give_identical_halves(self, tiny_model, rng):
        params = _constants(tiny_model.params)
        for proj in ("wq", "wk", "wv"):
            params[f"blocks.0.attn.head1.{proj}"] = params[f"blocks.0.attn.head0.{proj}"]
        params["blocks.0.attn.proj.weight"] = Tensor(np.eye(8))
        out, _ = msa(Tensor(rng.normal(size=(17, 8))), params, tiny_model.config, 0)
        np.testing.assert_array_equal(out.numpy()[:, :4], out.numpy()[:, 4:])

    def test_zero_weights_pass_residual_through(self, tiny_model, rng):
        params = {name: Tensor(np.zeros_like(value)) for name, value in tiny_model.params.items()}
        z = Tensor(rng.normal(size=(17, 8)))
        out, head_logits, _ = transformer_block(z, params, tiny_model.config, 0)
        np.testing.assert_allclose(out.numpy(), z.numpy())
        assert len(head_logits) == 2

    def test_depth_two_composes_blocks(self, tiny_model, rng):
        image = rng.random((3, 16, 16))
        params = _constants(tiny_model.params)
        z = patch_embed(image, params, tiny_model.config)
        for block in range(2):
            z, _, _ = transformer_block(z, params, tiny_model.config, block)
        logits, _ = forward(image, params, tiny_model.config)
        np.testing.assert_array_equal(classify(z, params).numpy(), logits.numpy())

    def test_msa_gradient(self, one_head_config, rng):
        z = rng.normal(size=(3, 2))
        weights = {f"blocks.0.attn.head0.{name}": rng.normal(size=(2, 2)) for name in ("wq", "wk", "wv")}
        weights["blocks.0.attn.proj.weight"] = rng.normal(size=(2, 2))

        def loss(params):
            out, _ = msa(Tensor(z), params, one_head_config, 0)
            return ops.sum(ops.square(out))

        errors = finite_diff_check_params(loss, weights)
        assert max(errors.values()) < 1e-6


class TestForward:
    """Test the full forward pass and its attention trace."""

    def test_trace_layout(self, tiny_model, rng):
        _, trace = tiny_model.forward(rng.random((3, 16, 16)), capture=True)
        assert trace.num_blocks == 2
        assert trace.num_heads == 2
        assert all(a.shape == (17, 17) for a in trace.all_logits())
        assert len(trace.msa_outputs) == len(trace.block_outputs) == 2

    def test_capture_does_not_change_logits(self, tiny_model, rng):
        image = rng.random((3, 16, 16))
        plain, trace = tiny_model.forward(image)
        captured, _ = tiny_model.forward(image, capture=True)
        assert trace is None
        np.testing.assert_array_equal(plain.numpy(), captured.numpy())

    def test_deterministic(self, tiny_model, rng):
        images = rng.random((2, 3, 16, 16))
        first, _ = tiny_model.forward(images)
        second, _ = tiny_model.forward(images)
        np.testing.assert_array_equal(first.numpy(), second.numpy())

    def test_batch_matches_single_images(self, tiny_model, rng):
        images = rng.random((3, 3, 16, 16))
        batched, _ = tiny_model.forward(images)
        for i in range(3):
            single, _ = tiny_model.forward(images[i])
            np.testing.assert_allclose(batched.numpy()[i], single.numpy(), atol=1e-12)

    def test_class_probabilities_sum_to_one(self, tiny_model, rng):
        logits, _ = tiny_model.forward(rng.random((3, 16, 16)))
        assert ops.softmax_rows(logits).numpy().sum() == pytest.approx(1.0, abs=1e-12)

    def test_attention_rows_are_stochastic(self, tiny_config):
        rng = np.random.default_rng(5)
        for _ in range(100):
            model = ViTModel.initialize(tiny_config, rng)
            _, trace = model.forward(rng.random((3, 16, 16)), capture=True)
            for logits in trace.all_logits():
                rows = ops.softmax_rows(logits).numpy().sum(axis=-1)
                assert np.max(np.abs(rows - 1.0)) < 1e-12

    def test_full_gradient_matches_finite_differences(self, tiny_config, rng):
        model = ViTModel.initialize(tiny_config, rng)
        images = rng.random((2, 3, 16, 16))
        targets = ops.one_hot(np.array([0, 2]), tiny_config.num_classes)

        def loss(params):
            logits, _ = forward(images, params, tiny_config)
            return ops.cross_entropy(logits, targets)

        errors = finite_diff_check_params(loss, model.params)
        assert max(errors.values()) < 1e-5


class TestViTModel:
    """Test parameter registry handling."""

    def test_shapes_follow_registry(self, tiny_model):
        assert list(tiny_model.params) == list(parameter_shapes(tiny_model.config))
        assert tiny_model.num_parameters == parameter_count(tiny_model.config)

    def test_init_scheme(self, tiny_model):
        np.testing.assert_array_equal(tiny_model.params["cls_token"], 0.0)
        np.testing.assert_array_equal(tiny_model.params["blocks.0.norm1.gamma"], 1.0)
        assert np.max(np.abs(tiny_model.params["pos_embed"])) <= 0.04

    def test_missing_parameter(self, tiny_model):
        params = dict(tiny_model.params)
        params.pop("pos_embed")
        with pytest.raises(ConfigError, match="pos_embed"):
            ViTModel(tiny_model.config, params)

    def test_new_head_keeps_backbone(self, tiny_model, rng):
        target = tiny_model.with_new_head(rng, num_classes=5)
        assert target.config.num_classes == 5
        assert target.params["head.weight"].shape == (8, 5)
        name = "blocks.1.attn.head0.wq"
        np.testing.assert_array_equal(target.params[name], tiny_model.params[name])


class TestClsAttentionRow:
    """Test [cls]-row extraction."""

    def test_extraction(self):
        row = cls_attention_row(Tensor([[9.0, 1.0, 2.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
        assert row.numpy().tolist() == [1.0, 2.0]

    def test_length_is_patch_count(self, tiny_model, rng):
        _, trace = tiny_model.forward(rng.random((3, 16, 16)), capture=True)
        assert cls_attention_row(trace.logits[0][0]).shape == (16,)
