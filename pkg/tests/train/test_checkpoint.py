import numpy as np
import pytest

from gtalab.core.errors import CheckpointIncompatibleError, CorruptCheckpointError
from gtalab.core.types import ViTConfig
from gtalab.train import (
    Checkpoint,
    OptimizerState,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)


class TestCheckpoint:
    """Test the GTAC checkpoint format."""

    def test_round_trip_is_bit_identical(self, tiny_model, tmp_path):
        path = save_checkpoint(tiny_model, tmp_path / "model.gtac")
        loaded = load_checkpoint(path)
        assert loaded.config == tiny_model.config
        assert list(loaded.params) == list(tiny_model.params)
        for name, value in tiny_model.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)

    def test_save_load_save_bytes(self, tiny_model, tmp_path):
        first = save_checkpoint(tiny_model, tmp_path / "a.gtac", extra={"note": "x"})
        second = save_checkpoint(load_checkpoint(first).model(), tmp_path / "b.gtac", extra={"note": "x"})
        assert first.read_bytes() == second.read_bytes()

    def test_header_layout(self, tiny_model):
        payload = encode_checkpoint(Checkpoint(config=tiny_model.config, params=tiny_model.params))
        assert payload[:4] == b"GTAC"
        assert int.from_bytes(payload[4:8], "little") == 1

    def test_optimizer_state_and_metadata(self, tiny_model):
        state = OptimizerState.zeros(tiny_model.params)
        state.step = 7
        state.m["head.bias"] = np.array([0.1, 0.2, 0.3])
        checkpoint = Checkpoint(
            config=tiny_model.config,
            params=tiny_model.params,
            optimizer_state=state,
            rng_state={"seed": 3},
            train_config={"lr": 0.001},
        )
        decoded = decode_checkpoint(encode_checkpoint(checkpoint))
        assert decoded.optimizer_state.step == 7
        np.testing.assert_array_equal(decoded.optimizer_state.m["head.bias"], [0.1, 0.2, 0.3])
        assert decoded.rng_state == {"seed": 3}
        assert decoded.train_config == {"lr": 0.001}
        assert set(decoded.params) == set(tiny_model.params)

    def test_truncated_file(self, tiny_model, tmp_path):
        path = save_checkpoint(tiny_model, tmp_path / "model.gtac")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_bad_magic(self, tiny_model):
        payload = encode_checkpoint(Checkpoint(config=tiny_model.config, params=tiny_model.params))
        with pytest.raises(CorruptCheckpointError, match="magic"):
            decode_checkpoint(b"XXXX" + payload[4:])

    def test_tiny_payload(self):
        with pytest.raises(CorruptCheckpointError, match="truncated"):
            decode_checkpoint(b"GTAC")

    def test_garbled_header(self, tiny_model):
        payload = bytearray(encode_checkpoint(Checkpoint(config=tiny_model.config, params=tiny_model.params)))
        payload[16] = 0xFF
        with pytest.raises(CorruptCheckpointError):
            decode_checkpoint(bytes(payload))

    def test_mismatched_config(self, tiny_model, tmp_path):
        path = save_checkpoint(tiny_model, tmp_path / "model.gtac")
        other = ViTConfig(image_size=16, patch_size=4, embed_dim=8, heads=2, depth=3, num_classes=3)
        with pytest.raises(CheckpointIncompatibleError):
            load_checkpoint(path, expected_config=other)
