import logging
from typing import TYPE_CHECKING

from gtalab.core.bus.event_bus import EventBus
from gtalab.core.bus.events import EvalEvent, RunFinishedEvent, RunStartedEvent, StepEvent

if TYPE_CHECKING:
    from gtalab.persistence.storage import ExperimentStorage
    from gtalab.train.report import RunReport

logger = logging.getLogger(__name__)


class ProgressLogger:
    """Logs every `log_interval`-th step, every evaluation and the end of a run."""

    def __init__(self, log_interval: int = 50):
        self.log_interval = log_interval

    def on_step(self, event: StepEvent) -> None:
        if event.step == 1 or event.step % self.log_interval == 0:
            msg = (
                f"step {event.step}: lr={event.lr:.3e} ce={event.ce:.4f} "
                f"reg={event.reg:.4f} total={event.total:.4f} (lambda={event.lam})"
            )
            logger.info(msg)

    def on_eval(self, event: EvalEvent) -> None:
        record = event.record
        msg = f"eval at step {event.step}: train_acc={event.train_accuracy:.4f}"
        msg += f" test_acc={record.accuracy:.4f}"
        if record.jaccard is not None:
            msg += f" jaccard={record.jaccard:.4f}"
        if record.logit_distance is not None:
            msg += f" drift={record.logit_distance:.4f}"
        logger.info(msg)

    def on_finished(self, event: RunFinishedEvent) -> None:
        msg = f"Run {event.run_id} {event.status.value}: {event.summary}"
        logger.info(msg)


def setup_run_subscribers(
    bus: EventBus,
    report: "RunReport",
    storage: "ExperimentStorage | None" = None,
    log_interval: int = 50,
) -> None:
    progress = ProgressLogger(log_interval)
    bus.subscribe(StepEvent, report.on_step)
    bus.subscribe(StepEvent, progress.on_step)
    bus.subscribe(EvalEvent, report.on_eval)
    bus.subscribe(EvalEvent, progress.on_eval)
    bus.subscribe(RunFinishedEvent, report.on_finished)
    bus.subscribe(RunFinishedEvent, progress.on_finished)
    if storage:
        bus.subscribe(RunStartedEvent, storage.save_run)
        bus.subscribe(EvalEvent, storage.save_eval)
        bus.subscribe(RunFinishedEvent, storage.finish_run)
