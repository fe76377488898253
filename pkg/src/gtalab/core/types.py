from dataclasses import asdict, dataclass, field
from typing import Any, ClassVar

import numpy as np

from gtalab.core.constants import MAX_SYNTHETIC_CLASSES
from gtalab.core.enums import FreezePolicy, GuidanceMethod, MapMode, Split
from gtalab.core.errors import ConfigError, ContractError


@dataclass(frozen=True)
class ViTConfig:
    """
    Shape hyperparameters of the miniature Vision Transformer.

    N = (image_size / patch_size)^2 patch tokens plus one [cls] token; each of
    the `heads` attention heads works in `embed_dim / heads` dimensions.
    """

    image_size: int
    patch_size: int
    embed_dim: int
    heads: int
    depth: int
    num_classes: int
    channels: int = 3

    PRESETS: ClassVar[dict[str, dict[str, int]]] = {
        "tiny": {"image_size": 16, "patch_size": 4, "embed_dim": 32, "heads": 4, "depth": 4},
        "small": {"image_size": 32, "patch_size": 4, "embed_dim": 64, "heads": 4, "depth": 6},
    }

    def __post_init__(self):
        for name in ("image_size", "patch_size", "embed_dim", "heads", "depth", "num_classes", "channels"):
            if getattr(self, name) < 1:
                msg = f"ViTConfig.{name} must be positive, got {getattr(self, name)}"
                raise ConfigError(msg)
        if self.image_size % self.patch_size != 0:
            msg = f"image_size {self.image_size} is not a multiple of patch_size {self.patch_size}"
            raise ConfigError(msg)
        if self.embed_dim % self.heads != 0:
            msg = f"embed_dim {self.embed_dim} is not divisible by heads {self.heads}"
            raise ConfigError(msg)

    @classmethod
    def preset(cls, name: str, num_classes: int) -> "ViTConfig":
        if name not in cls.PRESETS:
            msg = f"Unknown config size {name!r}; expected one of {sorted(cls.PRESETS)}"
            raise ConfigError(msg)
        return cls(num_classes=num_classes, **cls.PRESETS[name])

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_size * self.grid_size

    @property
    def num_tokens(self) -> int:
        return self.num_patches + 1

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch_size * self.patch_size

    @property
    def backbone(self) -> tuple[int, ...]:
        """Every shape field except the class count; models sharing it can guide each other."""
        return (self.image_size, self.patch_size, self.embed_dim, self.heads, self.depth, self.channels)

    def to_dict(self) -> dict[str, int]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ViTConfig":
        try:
            return cls(**{key: int(value) for key, value in data.items()})
        except TypeError as e:
            msg = f"Invalid ViTConfig fields: {sorted(data)}"
            raise ConfigError(msg) from e


@dataclass(frozen=True)
class GuidanceSpec:
    """Regularizer selection: method, coefficient lambda and freeze policy."""

    method: GuidanceMethod = GuidanceMethod.NONE
    lam: float = 0.0
    freeze_policy: FreezePolicy = FreezePolicy.NONE

    def __post_init__(self):
        object.__setattr__(self, "method", GuidanceMethod.parse(self.method))
        object.__setattr__(self, "freeze_policy", FreezePolicy(self.freeze_policy))
        if not self.lam >= 0.0:
            msg = f"lambda must be nonnegative, got {self.lam}"
            raise ConfigError(msg)

    @property
    def active(self) -> bool:
        """False when the regularizer contributes exactly nothing (method none or lambda 0)."""
        return self.method != GuidanceMethod.NONE and self.lam > 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"method": self.method.value, "lam": self.lam, "freeze_policy": self.freeze_policy.value}


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Parameters of the synthetic glyph-on-texture classification task.

    `rho` is the probability that a training sample is drawn on its
    class-linked background texture; otherwise the texture is uniform over
    all `num_textures` ids.
    """

    classes: int = 8
    per_class: int = 40
    image_size: int = 32
    rho: float = 0.95
    num_textures: int = 8
    noise: float = 0.03

    def __post_init__(self):
        if self.classes < 2:  # noqa: PLR2004
            msg = f"SyntheticSpec needs at least 2 classes, got {self.classes}"
            raise ConfigError(msg)
        if self.classes > MAX_SYNTHETIC_CLASSES:
            msg = f"SyntheticSpec supports at most {MAX_SYNTHETIC_CLASSES} classes, got {self.classes}"
            raise ConfigError(msg)
        if self.num_textures < self.classes:
            msg = f"num_textures ({self.num_textures}) must be >= classes ({self.classes})"
            raise ConfigError(msg)
        if self.per_class < 1:
            msg = f"per_class must be positive, got {self.per_class}"
            raise ConfigError(msg)
        if not 0.0 <= self.rho <= 1.0:
            msg = f"rho must lie in [0, 1], got {self.rho}"
            raise ConfigError(msg)
        if self.noise < 0.0:
            msg = f"noise must be nonnegative, got {self.noise}"
            raise ConfigError(msg)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class Sample:
    image: np.ndarray
    label: int
    mask: np.ndarray | None = None
    background_id: int = -1
    name: str | None = None

    def __post_init__(self):
        if self.image.ndim != 3:  # noqa: PLR2004
            msg = f"Sample image must be 3xHxW, got shape {self.image.shape}"
            raise ContractError(msg)
        if self.mask is not None and self.mask.shape != self.image.shape[1:]:
            msg = f"Mask shape {self.mask.shape} does not match image {self.image.shape}"
            raise ContractError(msg)


@dataclass
class Dataset:
    samples: list[Sample]
    split: Split
    seed: int | None = None
    spec: SyntheticSpec | None = None
    num_classes: int | None = None

    def __post_init__(self):
        if self.num_classes is None:
            if self.spec is not None:
                self.num_classes = self.spec.classes
            else:
                self.num_classes = max((s.label for s in self.samples), default=-1) + 1

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def images(self, indices: np.ndarray | list[int] | None = None) -> np.ndarray:
        """Stack images into a (B, 3, H, W) array."""
        chosen = self.samples if indices is None else [self.samples[i] for i in indices]
        return np.stack([s.image for s in chosen])

    @property
    def has_masks(self) -> bool:
        return bool(self.samples) and all(s.mask is not None for s in self.samples)

    def class_counts(self) -> dict[int, int]:
        labels, counts = np.unique(self.labels, return_counts=True)
        return {int(label): int(count) for label, count in zip(labels, counts, strict=True)}


@dataclass(frozen=True)
class CutBox:
    """Half-open pixel box [x0, x1) x [y0, y1); may be empty."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 <= self.x1 and 0 <= self.y0 <= self.y1):
            msg = f"Invalid box coordinates {self}"
            raise ContractError(msg)

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def is_empty(self) -> bool:
        return self.area == 0


@dataclass(frozen=True)
class MixedLabel:
    """Label of a mixed image; `coefficient` is the weight of label_b."""

    label_a: int
    label_b: int
    coefficient: float

    def __post_init__(self):
        if not 0.0 <= self.coefficient <= 1.0:
            msg = f"Mixing coefficient must lie in [0, 1], got {self.coefficient}"
            raise ContractError(msg)


@dataclass(frozen=True)
class AugmentParams:
    """Decisions of one basic_augment draw: flip and crop offsets into the padded image."""

    flip: bool
    dy: int
    dx: int


@dataclass
class EvalRecord:
    accuracy: float
    jaccard: float | None = None
    foreground_mass: float | None = None
    logit_distance: float | None = None
    mass_fraction: float = 0.6
    map_mode: MapMode = MapMode.FINAL_BLOCK
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        record = {
            "accuracy": self.accuracy,
            "jaccard": self.jaccard,
            "foreground_mass": self.foreground_mass,
            "logit_distance": self.logit_distance,
            "mass_fraction": self.mass_fraction,
            "map_mode": self.map_mode.value,
        }
        record.update(self.extra)
        return {key: value for key, value in record.items() if value is not None}
