from enum import Enum


class GuidanceMethod(str, Enum):
    """
    Regularizer applied on top of the cross-entropy during fine-tuning.
    """

    NONE = "none"
    GTA = "gta"
    MSA_GUIDE = "msa-guide"
    BLOCK_GUIDE = "block-guide"
    L2SP = "l2sp"

    @classmethod
    def parse(cls, value: "str | GuidanceMethod") -> "GuidanceMethod":
        if isinstance(value, GuidanceMethod):
            return value
        aliases = {
            "gta-attn-logits": cls.GTA,
            "msa-output-guide": cls.MSA_GUIDE,
            "block-output-guide": cls.BLOCK_GUIDE,
        }
        if value in aliases:
            return aliases[value]
        return cls(value)

    @property
    def needs_trace(self) -> bool:
        return self in (GuidanceMethod.GTA, GuidanceMethod.MSA_GUIDE, GuidanceMethod.BLOCK_GUIDE)


class FreezePolicy(str, Enum):
    """
    Which parameter groups stay trainable during fine-tuning.
    """

    NONE = "none"
    ATTENTION_ONLY = "attention-only"
    FFN_ONLY = "ffn-only"


class FeatureKind(str, Enum):
    MSA_OUTPUT = "msa-output"
    BLOCK_OUTPUT = "block-output"


class Split(str, Enum):
    """Dataset split tags."""

    UPSTREAM_TRAIN = "upstream-train"
    TRAIN = "train"
    TEST = "test"


class MapMode(str, Enum):
    """How per-head [cls] attention rows are combined into a map."""

    FINAL_BLOCK = "final-block"
    ALL_BLOCKS_MAX = "all-blocks-max"


class RunKind(str, Enum):
    PRETRAIN = "pretrain"
    FINETUNE = "finetune"


class RunStatus(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"
