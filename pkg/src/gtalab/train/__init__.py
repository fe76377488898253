from gtalab.train.checkpoint import (
    Checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
    write_checkpoint,
)
from gtalab.train.config import TrainConfig
from gtalab.train.loop import Trainer, finetune, init_source, init_target, pretrain_source
from gtalab.train.optimizer import OptimizerState, adamw_step, cosine_lr
from gtalab.train.report import REPORT_FILE, RunReport

__all__ = [
    "REPORT_FILE",
    "Checkpoint",
    "OptimizerState",
    "RunReport",
    "TrainConfig",
    "Trainer",
    "adamw_step",
    "cosine_lr",
    "decode_checkpoint",
    "encode_checkpoint",
    "finetune",
    "init_source",
    "init_target",
    "load_checkpoint",
    "pretrain_source",
    "save_checkpoint",
    "write_checkpoint",
]
