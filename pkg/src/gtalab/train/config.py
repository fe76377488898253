from dataclasses import dataclass, field, replace
from typing import Any

from gtalab.core.errors import ConfigError
from gtalab.core.types import GuidanceSpec


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimization settings of one run.

    Defaults are desk scale: batch 32, 1500 iterations, lr 1e-3, weight
    decay 0.05, AdamW betas (0.9, 0.999).
    """

    iterations: int = 1500
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.05
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    guidance: GuidanceSpec = field(default_factory=GuidanceSpec)
    transmix: bool = False
    transmix_prob: float = 1.0
    transmix_fraction: float | None = None
    augment: bool = True
    seed: int = 0
    eval_interval: int = 250
    log_interval: int = 50
    check_numerics: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            msg = f"iterations must be >= 1, got {self.iterations}"
            raise ConfigError(msg)
        if self.batch_size < 1:
            msg = f"batch_size must be >= 1, got {self.batch_size}"
            raise ConfigError(msg)
        if not self.lr > 0:
            msg = f"lr must be positive, got {self.lr}"
            raise ConfigError(msg)
        if self.weight_decay < 0:
            msg = f"weight_decay must be nonnegative, got {self.weight_decay}"
            raise ConfigError(msg)
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):  # noqa: PLR2004
            msg = f"betas must be two values in [0, 1), got {self.betas}"
            raise ConfigError(msg)
        if not self.eps > 0:
            msg = f"eps must be positive, got {self.eps}"
            raise ConfigError(msg)
        if not 0.0 <= self.transmix_prob <= 1.0:
            msg = f"transmix_prob must lie in [0, 1], got {self.transmix_prob}"
            raise ConfigError(msg)
        if self.transmix_fraction is not None and not 0.0 <= self.transmix_fraction <= 1.0:
            msg = f"transmix_fraction must lie in [0, 1], got {self.transmix_fraction}"
            raise ConfigError(msg)
        if self.eval_interval < 1 or self.log_interval < 1:
            msg = "eval_interval and log_interval must be >= 1"
            raise ConfigError(msg)
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))

    def with_guidance(self, guidance: GuidanceSpec) -> "TrainConfig":
        return replace(self, guidance=guidance)

    def to_dict(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "betas": list(self.betas),
            "eps": self.eps,
            "guidance": self.guidance.to_dict(),
            "transmix": self.transmix,
            "transmix_prob": self.transmix_prob,
            "transmix_fraction": self.transmix_fraction,
            "augment": self.augment,
            "seed": self.seed,
            "eval_interval": self.eval_interval,
            "log_interval": self.log_interval,
            "check_numerics": self.check_numerics,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainConfig":
        values = dict(data)
        if "guidance" in values:
            values["guidance"] = GuidanceSpec(**values["guidance"])
        if "betas" in values:
            values["betas"] = tuple(values["betas"])
        try:
            return cls(**values)
        except TypeError as e:
            msg = f"Invalid TrainConfig fields: {sorted(data)}"
            raise ConfigError(msg) from e
