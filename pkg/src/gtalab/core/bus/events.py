from dataclasses import dataclass, field
from datetime import UTC, datetime
from typing import Any

from gtalab.core.enums import RunKind, RunStatus
from gtalab.core.types import EvalRecord


@dataclass(kw_only=True)
class BaseEvent:
    timestamp: datetime | None = None
    """Base class for all events in the event bus."""

    def __post_init__(self):
        if self.timestamp is None:
            self.timestamp = datetime.now(tz=UTC)


@dataclass(kw_only=True)
class RunStartedEvent(BaseEvent):
    run_id: str
    kind: RunKind
    settings: dict[str, Any] = field(default_factory=dict)
    out_dir: str | None = None
    """A pre-training or fine-tuning run is about to take its first step."""

    def __repr__(self):
        return f"RunStartedEvent(run_id={self.run_id}, kind={self.kind.value})"


@dataclass(kw_only=True)
class StepEvent(BaseEvent):
    run_id: str
    step: int
    lr: float
    ce: float
    reg: float
    total: float
    lam: float = 0.0

    def __repr__(self):
        return f"StepEvent(step={self.step}, total={self.total:.6f})"


@dataclass(kw_only=True)
class EvalEvent(BaseEvent):
    run_id: str
    step: int
    train_accuracy: float
    record: EvalRecord

    def __repr__(self):
        return f"EvalEvent(step={self.step}, test_accuracy={self.record.accuracy:.4f})"


@dataclass(kw_only=True)
class RunFinishedEvent(BaseEvent):
    run_id: str
    status: RunStatus
    summary: dict[str, Any] = field(default_factory=dict)

    def __repr__(self):
        return f"RunFinishedEvent(run_id={self.run_id}, status={self.status.value})"
