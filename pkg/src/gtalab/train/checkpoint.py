"""
GTAC checkpoint files.

Layout: magic `GTAC`, uint32 LE version, uint64 LE header length, a UTF-8
JSON header (config, tensor table, RNG state, optional optimizer step and
training settings), then raw little-endian float64 data in table order.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from gtalab.core.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from gtalab.core.errors import CheckpointIncompatibleError, ConfigError, CorruptCheckpointError
from gtalab.core.types import ViTConfig
from gtalab.model.vit import ViTModel, parameter_shapes
from gtalab.train.optimizer import OptimizerState

logger = logging.getLogger(__name__)

_PREAMBLE = struct.Struct("<4sIQ")
_FLOAT = np.dtype("<f8")
_MOMENT_PREFIXES = ("optimizer.m.", "optimizer.v.")


@dataclass
class Checkpoint:
    config: ViTConfig
    params: dict[str, np.ndarray]
    optimizer_state: OptimizerState | None = None
    rng_state: dict[str, Any] | None = None
    train_config: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def model(self) -> ViTModel:
        return ViTModel(self.config, self.params)


def _tensor_items(checkpoint: Checkpoint) -> list[tuple[str, np.ndarray]]:
    items = list(checkpoint.params.items())
    state = checkpoint.optimizer_state
    if state is not None:
        for prefix, moments in zip(_MOMENT_PREFIXES, (state.m, state.v), strict=True):
            items.extend((f"{prefix}{name}", value) for name, value in moments.items())
    return items


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    table = []
    chunks = []
    offset = 0
    for name, value in _tensor_items(checkpoint):
        array = np.ascontiguousarray(value, dtype=_FLOAT)
        table.append({"name": name, "shape": list(array.shape), "offset": offset})
        offset += array.size
        chunks.append(array.tobytes(order="C"))
    header = {
        "config": checkpoint.config.to_dict(),
        "tensors": table,
        "optimizer_step": None if checkpoint.optimizer_state is None else checkpoint.optimizer_state.step,
        "rng": checkpoint.rng_state,
        "train_config": checkpoint.train_config,
        "extra": checkpoint.extra,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    preamble = _PREAMBLE.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes))
    return preamble + header_bytes + b"".join(chunks)


def _read_header(payload: bytes, source: str) -> tuple[dict[str, Any], int]:
    if len(payload) < _PREAMBLE.size:
        msg = f"{source}: truncated checkpoint ({len(payload)} bytes)"
        raise CorruptCheckpointError(msg)
    magic, version, header_len = _PREAMBLE.unpack_from(payload)
    if magic != CHECKPOINT_MAGIC:
        msg = f"{source}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}"
        raise CorruptCheckpointError(msg)
    if version != CHECKPOINT_VERSION:
        msg = f"{source}: unsupported checkpoint version {version}"
        raise CorruptCheckpointError(msg)
    start = _PREAMBLE.size
    if len(payload) < start + header_len:
        msg = f"{source}: truncated header"
        raise CorruptCheckpointError(msg)
    try:
        header = json.loads(payload[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        msg = f"{source}: unreadable header ({e})"
        raise CorruptCheckpointError(msg) from e
    if not isinstance(header, dict) or not isinstance(header.get("tensors"), list) or "config" not in header:
        msg = f"{source}: header lacks config or tensor table"
        raise CorruptCheckpointError(msg)
    return header, start + header_len


def _validate_table(table: list[dict[str, Any]], data_len: int, source: str) -> None:
    expected_offset = 0
    for entry in table:
        try:
            shape = [int(d) for d in entry["shape"]]
            offset = int(entry["offset"])
        except (KeyError, TypeError, ValueError) as e:
            msg = f"{source}: malformed tensor table entry {entry}"
            raise CorruptCheckpointError(msg) from e
        if offset != expected_offset or any(d < 0 for d in shape):
            msg = f"{source}: tensor {entry.get('name')} has inconsistent offset or shape"
            raise CorruptCheckpointError(msg)
        expected_offset += int(np.prod(shape, dtype=np.int64))
    if expected_offset * _FLOAT.itemsize != data_len:
        msg = (
            f"{source}: shape table describes {expected_offset * _FLOAT.itemsize} data bytes, "
            f"file holds {data_len}"
        )
        raise CorruptCheckpointError(msg)


def decode_checkpoint(
    payload: bytes, expected_config: ViTConfig | None = None, source: str = "<bytes>"
) -> Checkpoint:
    """Validate magic, version and the shape table before reading any tensor data."""
    header, data_start = _read_header(payload, source)
    table = header["tensors"]
    _validate_table(table, len(payload) - data_start, source)
    try:
        config = ViTConfig.from_dict(header["config"])
    except ConfigError as e:
        msg = f"{source}: invalid config in header ({e})"
        raise CorruptCheckpointError(msg) from e
    if expected_config is not None and config != expected_config:
        msg = f"{source}: checkpoint config {config} does not match expected {expected_config}"
        raise CheckpointIncompatibleError(msg)
    data = np.frombuffer(payload, dtype=_FLOAT, offset=data_start)
    tensors = {}
    for entry in table:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        values = data[entry["offset"] : entry["offset"] + count].astype(np.float64)
        tensors[entry["name"]] = values.reshape(entry["shape"])

    params = {name: value for name, value in tensors.items() if not name.startswith(_MOMENT_PREFIXES)}
    expected = parameter_shapes(config)
    if set(params) != set(expected) or list(params) != list(expected):
        msg = f"{source}: parameter table does not match the canonical layout of {config}"
        raise CheckpointIncompatibleError(msg)
    state = None
    if header.get("optimizer_step") is not None:
        m_prefix, v_prefix = _MOMENT_PREFIXES
        state = OptimizerState(
            step=int(header["optimizer_step"]),
            m={k.removeprefix(m_prefix): v for k, v in tensors.items() if k.startswith(m_prefix)},
            v={k.removeprefix(v_prefix): v for k, v in tensors.items() if k.startswith(v_prefix)},
        )
    return Checkpoint(
        config=config,
        params=params,
        optimizer_state=state,
        rng_state=header.get("rng"),
        train_config=header.get("train_config"),
        extra=header.get("extra") or {},
    )


def save_checkpoint(  # noqa: PLR0913
    model: ViTModel,
    path: str | Path,
    optimizer_state: OptimizerState | None = None,
    rng_state: dict[str, Any] | None = None,
    train_config: dict[str, Any] | None = None,
    extra: dict[str, Any] | None = None,
) -> Path:
    checkpoint = Checkpoint(
        config=model.config,
        params=model.params,
        optimizer_state=optimizer_state,
        rng_state=rng_state,
        train_config=train_config,
        extra=extra or {},
    )
    return write_checkpoint(checkpoint, path)


def write_checkpoint(checkpoint: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint))
    msg = f"Saved checkpoint {path} ({len(checkpoint.params)} parameter tensors)"
    logger.info(msg)
    return path


def load_checkpoint(path: str | Path, expected_config: ViTConfig | None = None) -> Checkpoint:
    path = Path(path)
    checkpoint = decode_checkpoint(path.read_bytes(), expected_config=expected_config, source=str(path))
    msg = f"Loaded checkpoint {path} ({len(checkpoint.params)} parameter tensors)"
    logger.info(msg)
    return checkpoint
