import itertools
from dataclasses import dataclass, field

from gtalab.core.errors import ConfigError
from gtalab.core.types import ViTConfig
from gtalab.ndtensor import Tensor

_PASS_IDS = itertools.count()


def next_pass_id() -> int:
    return next(_PASS_IDS)


@dataclass
class AttentionTrace:
    """
    Intermediate tensors of one forward pass.

    `logits[m][l]` is the pre-softmax logit matrix of head l in block m,
    shaped (N+1, N+1) or (B, N+1, N+1) for a batch. `msa_outputs[m]` and
    `block_outputs[m]` are the (.., N+1, D) MSA and block outputs.
    """

    config: ViTConfig
    pass_id: int
    logits: list[list[Tensor]] = field(default_factory=list)
    msa_outputs: list[Tensor] = field(default_factory=list)
    block_outputs: list[Tensor] = field(default_factory=list)

    @property
    def num_blocks(self) -> int:
        return len(self.logits)

    @property
    def num_heads(self) -> int:
        return len(self.logits[0]) if self.logits else 0

    @property
    def batch_size(self) -> int:
        if not self.logits:
            return 1
        first = self.logits[0][0]
        return first.shape[0] if first.ndim > 2 else 1  # noqa: PLR2004

    def all_logits(self) -> list[Tensor]:
        return [a for block in self.logits for a in block]

    def detach(self) -> "AttentionTrace":
        """Copy holding constants only, so no gradient can flow into its model."""
        return AttentionTrace(
            config=self.config,
            pass_id=self.pass_id,
            logits=[[a.detach() for a in block] for block in self.logits],
            msa_outputs=[t.detach() for t in self.msa_outputs],
            block_outputs=[t.detach() for t in self.block_outputs],
        )

    def check_compatible(self, other: "AttentionTrace") -> None:
        if self.config.backbone != other.config.backbone:
            msg = f"Traces come from different backbones: {self.config} vs {other.config}"
            raise ConfigError(msg)
        if (self.num_blocks, self.num_heads) != (other.num_blocks, other.num_heads):
            msg = (
                f"Trace layouts differ: {self.num_blocks}x{self.num_heads} vs "
                f"{other.num_blocks}x{other.num_heads} (blocks x heads)"
            )
            raise ConfigError(msg)
        for mine, theirs in zip(self.all_logits(), other.all_logits(), strict=True):
            if mine.shape != theirs.shape:
                msg = f"Trace logit shapes differ: {mine.shape} vs {theirs.shape}"
                raise ConfigError(msg)
