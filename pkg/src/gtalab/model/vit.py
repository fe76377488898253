import logging
import math
from collections.abc import Mapping

import numpy as np
from scipy.stats import truncnorm

from gtalab.core.constants import FFN_RATIO, INIT_STD, LAYER_NORM_EPS
from gtalab.core.errors import CheckpointIncompatibleError, ConfigError, ContractError
from gtalab.core.types import ViTConfig
from gtalab.model.trace import AttentionTrace, next_pass_id
from gtalab.ndtensor import Tape, Tensor, no_grad
from gtalab.ndtensor import ops

logger = logging.getLogger(__name__)

HEAD_PREFIX = "head."
INIT_SCHEME = {"kind": "truncated-normal", "std": INIT_STD, "truncation": 2.0, "cls_token": "zeros"}


def parameter_shapes(config: ViTConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter names and shapes, in registry order."""
    d, k = config.embed_dim, config.head_dim
    hidden = FFN_RATIO * d
    shapes: dict[str, tuple[int, ...]] = {
        "patch_embed.weight": (config.patch_dim, d),
        "patch_embed.bias": (d,),
        "cls_token": (d,),
        "pos_embed": (config.num_tokens, d),
    }
    for m in range(config.depth):
        prefix = f"blocks.{m}"
        shapes[f"{prefix}.norm1.gamma"] = (d,)
        shapes[f"{prefix}.norm1.beta"] = (d,)
        for head in range(config.heads):
            for proj in ("wq", "wk", "wv"):
                shapes[f"{prefix}.attn.head{head}.{proj}"] = (d, k)
        shapes[f"{prefix}.attn.proj.weight"] = (config.heads * k, d)
        shapes[f"{prefix}.norm2.gamma"] = (d,)
        shapes[f"{prefix}.norm2.beta"] = (d,)
        shapes[f"{prefix}.ffn.fc1.weight"] = (d, hidden)
        shapes[f"{prefix}.ffn.fc1.bias"] = (hidden,)
        shapes[f"{prefix}.ffn.fc2.weight"] = (hidden, d)
        shapes[f"{prefix}.ffn.fc2.bias"] = (d,)
    shapes["norm.gamma"] = (d,)
    shapes["norm.beta"] = (d,)
    shapes["head.weight"] = (d, config.num_classes)
    shapes["head.bias"] = (config.num_classes,)
    return shapes


def parameter_count(config: ViTConfig) -> int:
    return sum(math.prod(shape) for shape in parameter_shapes(config).values())


def parameter_group(name: str) -> str:
    """One of attention, ffn, norm, embedding, head."""
    if name.startswith(HEAD_PREFIX):
        return "head"
    if ".attn." in name:
        return "attention"
    if ".ffn." in name:
        return "ffn"
    if ".norm" in name or name.startswith("norm."):
        return "norm"
    return "embedding"


def _truncated_normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return truncnorm.rvs(-2.0, 2.0, scale=INIT_STD, size=shape, random_state=rng).reshape(shape)


def _init_parameter(name: str, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    if name.endswith(".gamma"):
        return np.ones(shape)
    if name == "cls_token" or name.endswith((".bias", ".beta")):
        return np.zeros(shape)
    return _truncated_normal(rng, shape)


class ViTModel:
    """
    Parameters of a miniature pre-norm Vision Transformer.

    Parameters are plain float64 arrays keyed by canonical name; `bind`
    turns them into Tensors (tape leaves or constants) for a forward pass.
    """

    def __init__(self, config: ViTConfig, params: Mapping[str, np.ndarray]):
        expected = parameter_shapes(config)
        if set(params) != set(expected):
            missing = sorted(set(expected) - set(params))
            unexpected = sorted(set(params) - set(expected))
            msg = f"Parameter names do not match config: missing={missing}, unexpected={unexpected}"
            raise CheckpointIncompatibleError(msg)
        for name, shape in expected.items():
            if np.shape(params[name]) != shape:
                msg = f"Parameter {name} has shape {np.shape(params[name])}, config expects {shape}"
                raise ConfigError(msg)
        self.config = config
        self.params: dict[str, np.ndarray] = {
            name: np.array(params[name], dtype=np.float64) for name in expected
        }

    @classmethod
    def initialize(cls, config: ViTConfig, rng: np.random.Generator) -> "ViTModel":
        params = {
            name: _init_parameter(name, shape, rng) for name, shape in parameter_shapes(config).items()
        }
        return cls(config, params)

    @property
    def num_parameters(self) -> int:
        return sum(value.size for value in self.params.values())

    def copy(self) -> "ViTModel":
        return ViTModel(self.config, {name: value.copy() for name, value in self.params.items()})

    def with_new_head(self, rng: np.random.Generator, num_classes: int | None = None) -> "ViTModel":
        """
        Copy of this model with a freshly initialized classifier head,
        optionally for a different class count.
        """
        num_classes = self.config.num_classes if num_classes is None else num_classes
        config = ViTConfig(**{**self.config.to_dict(), "num_classes": num_classes})
        params = {
            name: value.copy() for name, value in self.params.items() if not name.startswith(HEAD_PREFIX)
        }
        for name, shape in parameter_shapes(config).items():
            if name.startswith(HEAD_PREFIX):
                params[name] = _init_parameter(name, shape, rng)
        return ViTModel(config, params)

    def bind(self, tape: Tape | None = None) -> dict[str, Tensor]:
        if tape is None:
            return {name: Tensor(value) for name, value in self.params.items()}
        return tape.bind(self.params)

    def forward(
        self, images: np.ndarray, *, capture: bool = False, tape: Tape | None = None
    ) -> tuple[Tensor, AttentionTrace | None]:
        return forward(images, self.bind(tape), self.config, capture=capture)

    def predict_logits(self, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """Class logits for a (B, 3, H, W) stack, computed without a tape."""
        chunks = []
        with no_grad():
            params = self.bind()
            for start in range(0, len(images), batch_size):
                logits, _ = forward(images[start : start + batch_size], params, self.config)
                chunks.append(logits.numpy())
        return np.concatenate(chunks) if chunks else np.zeros((0, self.config.num_classes))


def extract_patches(images: np.ndarray, config: ViTConfig) -> np.ndarray:
    """
    Flatten non-overlapping PxPx3 patches, row-major over the patch grid.

    (3, H, W) -> (N, P*P*3); (B, 3, H, W) -> (B, N, P*P*3).
    """
    batched = images.ndim == 4  # noqa: PLR2004
    stack = images if batched else images[None]
    expected = (config.channels, config.image_size, config.image_size)
    if stack.ndim != 4 or stack.shape[1:] != expected:  # noqa: PLR2004
        msg = f"Image shape {images.shape} does not match config {expected}"
        raise ConfigError(msg)
    b, c, p, g = stack.shape[0], config.channels, config.patch_size, config.grid_size
    patches = stack.reshape(b, c, g, p, g, p).transpose(0, 2, 4, 3, 5, 1).reshape(b, g * g, p * p * c)
    return patches if batched else patches[0]


def patch_embed(images: np.ndarray, params: Mapping[str, Tensor], config: ViTConfig) -> Tensor:
    """Token sequence [cls; W*patches + b] + pos, shaped (.., N+1, D)."""
    patches = Tensor(extract_patches(images, config))
    tokens = ops.add(ops.matmul(patches, params["patch_embed.weight"]), params["patch_embed.bias"])
    cls_row = ops.reshape(params["cls_token"], (1, config.embed_dim))
    if tokens.ndim > 2:  # noqa: PLR2004
        cls_row = ops.expand(cls_row, (tokens.shape[0], 1, config.embed_dim))
    return ops.add(ops.concat_rows([cls_row, tokens]), params["pos_embed"])


def attention_head(z: Tensor, wq: Tensor, wk: Tensor, wv: Tensor) -> tuple[Tensor, Tensor]:
    """
    One self-attention head.

    Returns the pre-softmax logits A = q k^T / sqrt(k) and softmax(A) v.
    """
    if wq.shape != wk.shape or wq.shape != wv.shape or wq.shape[0] != z.shape[-1]:
        msg = f"Head weights {wq.shape}/{wk.shape}/{wv.shape} do not fit tokens {z.shape}"
        raise ConfigError(msg)
    q = ops.matmul(z, wq)
    k = ops.matmul(z, wk)
    v = ops.matmul(z, wv)
    logits = ops.scale(ops.matmul(q, ops.transpose(k)), 1.0 / math.sqrt(wq.shape[1]))
    return logits, ops.matmul(ops.softmax_rows(logits), v)


def msa(
    z: Tensor, params: Mapping[str, Tensor], config: ViTConfig, block: int
) -> tuple[Tensor, list[Tensor]]:
    prefix = f"blocks.{block}.attn"
    head_logits, head_outputs = [], []
    for head in range(config.heads):
        logits, out = attention_head(
            z,
            params[f"{prefix}.head{head}.wq"],
            params[f"{prefix}.head{head}.wk"],
            params[f"{prefix}.head{head}.wv"],
        )
        head_logits.append(logits)
        head_outputs.append(out)
    merged = head_outputs[0] if len(head_outputs) == 1 else ops.concat_last_dim(head_outputs)
    return ops.matmul(merged, params[f"{prefix}.proj.weight"]), head_logits


def transformer_block(
    z: Tensor, params: Mapping[str, Tensor], config: ViTConfig, block: int
) -> tuple[Tensor, list[Tensor], Tensor]:
    """
    Pre-norm block: z + MSA(LN(z)), then + FFN(LN(.)).

    Returns (z', head logits, MSA output).
    """
    prefix = f"blocks.{block}"
    normed = ops.layer_norm(
        z, params[f"{prefix}.norm1.gamma"], params[f"{prefix}.norm1.beta"], LAYER_NORM_EPS
    )
    attn_out, head_logits = msa(normed, params, config, block)
    hidden = ops.add(z, attn_out)
    normed = ops.layer_norm(
        hidden, params[f"{prefix}.norm2.gamma"], params[f"{prefix}.norm2.beta"], LAYER_NORM_EPS
    )
    ffn = ops.matmul(normed, params[f"{prefix}.ffn.fc1.weight"])
    ffn = ops.gelu(ops.add(ffn, params[f"{prefix}.ffn.fc1.bias"]))
    ffn = ops.add(ops.matmul(ffn, params[f"{prefix}.ffn.fc2.weight"]), params[f"{prefix}.ffn.fc2.bias"])
    return ops.add(hidden, ffn), head_logits, attn_out


def classify(z: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """Final layer norm, then the linear head on the [cls] token."""
    normed = ops.layer_norm(z, params["norm.gamma"], params["norm.beta"], LAYER_NORM_EPS)
    cls_row = ops.slice_rows(normed, 0, 1)
    logits = ops.add(ops.matmul(cls_row, params["head.weight"]), params["head.bias"])
    return ops.reshape(logits, logits.shape[:-2] + logits.shape[-1:])


def forward(
    images: np.ndarray,
    params: Mapping[str, Tensor],
    config: ViTConfig,
    *,
    capture: bool = False,
) -> tuple[Tensor, AttentionTrace | None]:
    """
    Class logits for one image (3, H, W) -> (C,) or a batch -> (B, C), plus
    the attention trace when `capture` is set.
    """
    z = patch_embed(images, params, config)
    trace = AttentionTrace(config=config, pass_id=next_pass_id()) if capture else None
    for block in range(config.depth):
        z, head_logits, attn_out = transformer_block(z, params, config, block)
        if trace is not None:
            trace.logits.append(head_logits)
            trace.msa_outputs.append(attn_out)
            trace.block_outputs.append(z)
    return classify(z, params), trace


def cls_attention_row(logits: Tensor) -> Tensor:
    """
    The [cls]-query row of a logit matrix without its self-logit:
    row 0, entries 1..N. Works on (N+1, N+1) and batched (B, N+1, N+1).
    """
    side = logits.shape[-1]
    if logits.ndim < 2 or logits.shape[-2] != side or side < 2:  # noqa: PLR2004
        msg = f"cls_attention_row needs a square logit matrix with side >= 2, got {logits.shape}"
        raise ContractError(msg)
    return ops.getitem(logits, (..., 0, slice(1, None)))
