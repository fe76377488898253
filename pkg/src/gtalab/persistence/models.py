from datetime import UTC, datetime

from sqlmodel import Field, Relationship, SQLModel

from gtalab.core.enums import RunKind, RunStatus


class TimestampedModel(SQLModel):
    """Base model with timestamp fields."""

    created_at: datetime = Field(default_factory=lambda: datetime.now(UTC), index=True)
    updated_at: datetime = Field(
        default_factory=lambda: datetime.now(UTC),
        index=True,
        sa_column_kwargs={"onupdate": lambda: datetime.now(UTC)},
    )


class ExperimentRun(TimestampedModel, table=True):
    """Model for one pre-training or fine-tuning run."""

    run_id: str = Field(primary_key=True)
    kind: RunKind = Field(default=RunKind.FINETUNE, index=True)
    method: str = Field(default="none", index=True)
    freeze_policy: str = Field(default="none")
    lam: float = 0.0
    rate: float | None = Field(default=None, index=True)
    seed: int = 0
    status: RunStatus = Field(default=RunStatus.RUNNING, index=True)
    out_dir: str | None = None
    started_at: datetime
    finished_at: datetime | None = Field(default=None, index=True)
    final_test_accuracy: float | None = None

    evals: list["EvalResult"] = Relationship(back_populates="run")


class EvalResult(SQLModel, table=True):
    """Model for one evaluation of a run at a given step."""

    id: int | None = Field(default=None, primary_key=True)
    step: int
    train_accuracy: float
    test_accuracy: float
    jaccard: float | None = None
    foreground_mass: float | None = None
    logit_distance: float | None = None

    run_id: str = Field(foreign_key="experimentrun.run_id", index=True)
    run: ExperimentRun = Relationship(back_populates="evals")
