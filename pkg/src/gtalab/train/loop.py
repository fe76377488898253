"""
Iteration-based training of the miniature ViT.

Every step draws its randomness (batch indices, flips and crops, TransMix
box) from its own stream derived from (seed, step), so a run is a pure
function of seed, settings and data.
"""

import json
import logging
import math
import uuid
from datetime import UTC, datetime
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from gtalab.augment import (
    apply_augment,
    box_patch_mask,
    cls_patch_attention,
    mix_images,
    mixed_label,
    sample_augment_params,
    sample_cut_box,
    soft_targets,
)
from gtalab.core.bus.event_bus import EventBus
from gtalab.core.bus.events import EvalEvent, RunFinishedEvent, RunStartedEvent, StepEvent
from gtalab.core.bus.subscribers import setup_run_subscribers
from gtalab.core.enums import RunKind, RunStatus
from gtalab.core.errors import ConfigError, NonFiniteLossError, NumericalError
from gtalab.core.types import Dataset, GuidanceSpec, ViTConfig
from gtalab.evaluation import accuracy, evaluate_model
from gtalab.guidance import LossBreakdown, apply_freeze_policy, total_loss, weight_decay_mask
from gtalab.model.vit import ViTModel, forward
from gtalab.ndtensor import Tape, check_numerics, no_grad
from gtalab.ndtensor import ops
from gtalab.train.config import TrainConfig
from gtalab.train.optimizer import OptimizerState, adamw_step, cosine_lr
from gtalab.train.report import REPORT_FILE, RunReport

if TYPE_CHECKING:
    from gtalab.persistence.storage import ExperimentStorage

logger = logging.getLogger(__name__)

STEP_STREAM = 1
HEAD_STREAM = 2
INIT_STREAM = 3


def step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STEP_STREAM, step)))


def init_source(config: ViTConfig, seed: int) -> ViTModel:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(INIT_STREAM,)))
    return ViTModel.initialize(config, rng)


def init_target(source: ViTModel, num_classes: int, seed: int) -> ViTModel:
    """Source weights with a freshly initialized classifier head for `num_classes`."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(HEAD_STREAM,)))
    return source.with_new_head(rng, num_classes)


def _jsonable(value: float) -> float | str:
    return value if math.isfinite(value) else str(value)


class Trainer:
    """
    Runs one pre-training or fine-tuning job and publishes its progress on
    an event bus (steps, evaluations, start and finish).
    """

    def __init__(  # noqa: PLR0913
        self,
        model: ViTModel,
        dataset: Dataset,
        config: TrainConfig,
        *,
        kind: RunKind = RunKind.FINETUNE,
        source: ViTModel | None = None,
        test_set: Dataset | None = None,
        bus: EventBus | None = None,
        out_dir: str | Path | None = None,
        run_id: str | None = None,
        tags: dict[str, Any] | None = None,
        mass_fraction: float = 0.6,
        storage: "ExperimentStorage | None" = None,
    ):
        if len(dataset) == 0:
            msg = "Training needs a nonempty dataset"
            raise ConfigError(msg)
        if dataset.num_classes != model.config.num_classes:
            msg = f"Dataset has {dataset.num_classes} classes, model head has {model.config.num_classes}"
            raise ConfigError(msg)
        if source is not None and source.config.backbone != model.config.backbone:
            msg = f"Source config {source.config} does not match target config {model.config}"
            raise ConfigError(msg)
        spec = config.guidance
        if spec.active and spec.method.needs_trace and source is None:
            msg = f"Guidance method {spec.method.value} needs a source model"
            raise ConfigError(msg)
        self.model = model
        self.dataset = dataset
        self.config = config
        self.kind = kind
        self.source = source
        self.test_set = test_set
        self.bus = bus or EventBus()
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.run_id = run_id or f"{kind.value}_{datetime.now(tz=UTC):%Y%m%d_%H%M%S}_{uuid.uuid4().hex[:8]}"
        self.tags = tags or {}
        self.mass_fraction = mass_fraction
        self.storage = storage
        self.params = {name: value.copy() for name, value in model.params.items()}
        self.init_params = {name: value.copy() for name, value in model.params.items()}
        self.trainable = apply_freeze_policy(spec.freeze_policy, self.params)
        self.decay = weight_decay_mask(self.params)
        self.state = OptimizerState.zeros(self.params)
        self.report = RunReport(self.out_dir / REPORT_FILE if self.out_dir is not None else None)

    @property
    def vit_config(self) -> ViTConfig:
        return self.model.config

    @property
    def current_model(self) -> ViTModel:
        return ViTModel(self.vit_config, self.params)

    def settings(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "vit": self.vit_config.to_dict(),
            "train": self.config.to_dict(),
            "train_size": len(self.dataset),
            **self.tags,
        }

    def _sample_batch(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        indices = rng.integers(0, len(self.dataset), size=self.config.batch_size)
        images = self.dataset.images(indices)
        if self.config.augment:
            images = np.stack([apply_augment(image, sample_augment_params(rng)) for image in images])
        return images, self.dataset.labels[indices]

    def _loss(self, tape: Tape, images: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> tuple:
        config = self.config
        spec: GuidanceSpec = config.guidance
        num_classes = self.vit_config.num_classes
        box = None
        if config.transmix and rng.random() < config.transmix_prob:
            fraction = config.transmix_fraction if config.transmix_fraction is not None else rng.uniform()
            size = self.vit_config.image_size
            box = sample_cut_box(rng, size, size, fraction)
            images = mix_images(images, images[::-1], box)

        needs_trace = spec.active and spec.method.needs_trace
        bound = tape.bind(self.params)
        logits, trace = forward(images, bound, self.vit_config, capture=needs_trace or box is not None)
        if box is not None:
            attention = cls_patch_attention(trace)
            patches = box_patch_mask(box, self.vit_config)
            mixed = [
                mixed_label(a, b, attention[i], patches)
                for i, (a, b) in enumerate(zip(labels, labels[::-1], strict=True))
            ]
            targets = soft_targets(mixed, num_classes)
        else:
            targets = ops.one_hot(labels, num_classes)
        ce = ops.cross_entropy(logits, targets)

        src_trace = None
        if needs_trace:
            with no_grad():
                _, src_trace = forward(images, self.source.bind(), self.source.config, capture=True)
        breakdown = total_loss(ce, spec, src_trace, trace, bound, self.init_params)
        return breakdown, bound

    def _abort(self, step: int, lr: float, breakdown: LossBreakdown | None, cause: str) -> None:
        dump_path = None
        if self.out_dir is not None:
            dump = {
                "step": step,
                "lr": lr,
                "cause": cause,
                "loss": {k: _jsonable(v) for k, v in breakdown.as_floats().items()} if breakdown else None,
                "parameters": {
                    name: {
                        "finite": bool(np.all(np.isfinite(v))),
                        "max_abs": _jsonable(float(np.max(np.abs(v)))),
                    }
                    for name, v in self.params.items()
                },
            }
            dump_path = self.out_dir / f"abort_step_{step}.json"
            dump_path.parent.mkdir(parents=True, exist_ok=True)
            dump_path.write_text(json.dumps(dump, indent=2, sort_keys=True), encoding="utf-8")
        msg = f"Non-finite loss at step {step} ({cause})"
        logger.error(msg)
        summary = {"steps": step - 1, "error": msg}
        self.bus.publish(RunFinishedEvent(run_id=self.run_id, status=RunStatus.FAILED, summary=summary))
        raise NonFiniteLossError(msg, step, str(dump_path) if dump_path else None)

    def train_step(self, step: int) -> LossBreakdown:
        """Optimizer step number `step` (1-based)."""
        config = self.config
        rng = step_rng(config.seed, step)
        lr = cosine_lr(step - 1, config.iterations, config.lr)
        images, labels = self._sample_batch(rng)
        breakdown = None
        try:
            with check_numerics(config.check_numerics), Tape() as tape:
                breakdown, bound = self._loss(tape, images, labels, rng)
                if not math.isfinite(breakdown.total.item()):
                    self._abort(step, lr, breakdown, "total loss is not finite")
                grads = tape.gradients(breakdown.total, bound)
        except NonFiniteLossError:
            raise
        except NumericalError as e:
            self._abort(step, lr, breakdown, str(e))
        self.params, self.state = adamw_step(
            self.params,
            grads,
            self.state,
            lr,
            betas=config.betas,
            eps=config.eps,
            weight_decay=config.weight_decay,
            mask=self.trainable,
            decay_mask=self.decay,
        )
        values = breakdown.as_floats()
        self.bus.publish(StepEvent(run_id=self.run_id, step=step, lr=lr, lam=breakdown.lam, **values))
        return breakdown

    def evaluate(self, step: int) -> EvalEvent:
        model = self.current_model
        eval_set = self.test_set if self.test_set is not None else self.dataset
        record = evaluate_model(model, eval_set, source=self.source, mass_fraction=self.mass_fraction)
        train_accuracy = accuracy(model, self.dataset)
        event = EvalEvent(run_id=self.run_id, step=step, train_accuracy=train_accuracy, record=record)
        self.bus.publish(event)
        return event

    def run(self) -> tuple[ViTModel, RunReport]:
        setup_run_subscribers(self.bus, self.report, self.storage, log_interval=self.config.log_interval)
        self.bus.publish(
            RunStartedEvent(
                run_id=self.run_id,
                kind=self.kind,
                settings=self.settings(),
                out_dir=str(self.out_dir) if self.out_dir else None,
            )
        )
        msg = (
            f"Starting {self.kind.value} run {self.run_id}: {self.config.iterations} steps, "
            f"method={self.config.guidance.method.value}, lambda={self.config.guidance.lam}"
        )
        logger.info(msg)
        breakdown = None
        last_eval = None
        for step in range(1, self.config.iterations + 1):
            breakdown = self.train_step(step)
            if step % self.config.eval_interval == 0 or step == self.config.iterations:
                last_eval = self.evaluate(step)
        summary: dict[str, Any] = {"steps": self.config.iterations, "final_total": breakdown.total.item()}
        if last_eval is not None:
            summary["final_train_acc"] = last_eval.train_accuracy
            summary["final_test_acc"] = last_eval.record.accuracy
            if last_eval.record.jaccard is not None:
                summary["final_jaccard"] = last_eval.record.jaccard
        self.bus.publish(RunFinishedEvent(run_id=self.run_id, status=RunStatus.COMPLETED, summary=summary))
        return self.current_model, self.report

    def rng_state(self) -> dict[str, Any]:
        return {"seed": self.config.seed, "steps_taken": self.state.step, "stream": "seed-sequence"}


def finetune(  # noqa: PLR0913
    source: ViTModel,
    target: ViTModel,
    dataset: Dataset,
    test_set: Dataset | None,
    config: TrainConfig,
    **kwargs: Any,
) -> tuple[ViTModel, RunReport]:
    """Fine-tune `target` (normally `init_target(source, ...)`) under the configured guidance."""
    trainer = Trainer(
        target, dataset, config, kind=RunKind.FINETUNE, source=source, test_set=test_set, **kwargs
    )
    return trainer.run()


def pretrain_source(
    dataset: Dataset,
    config: TrainConfig,
    vit_config: ViTConfig,
    test_set: Dataset | None = None,
    **kwargs: Any,
) -> tuple[ViTModel, RunReport]:
    """Supervised cross-entropy training of a fresh model on the upstream split."""
    config = config.with_guidance(GuidanceSpec())
    model = init_source(vit_config, config.seed)
    trainer = Trainer(model, dataset, config, kind=RunKind.PRETRAIN, test_set=test_set, **kwargs)
    return trainer.run()
