from sqlmodel import Session, SQLModel, create_engine, select

from gtalab.core.bus.events import EvalEvent, RunFinishedEvent, RunStartedEvent
from gtalab.persistence.models import EvalResult, ExperimentRun


class ExperimentStorage:
    """
    A class to manage the storage of experiment runs and their evaluations.
    """

    def __init__(self, database_url: str = "sqlite:///experiments.db"):
        """
        Initializes the ExperimentStorage with a database URL.

        :param database_url: SQLAlchemy URL of the backing database.
        """
        connect_args = {"check_same_thread": False} if database_url.startswith("sqlite") else {}
        self.engine = create_engine(database_url, connect_args=connect_args)
        SQLModel.metadata.create_all(self.engine)

    def save_run(self, event: RunStartedEvent) -> None:
        """
        Saves a newly started run.

        :param event: The start event carrying the run settings.
        """
        guidance = event.settings.get("train", {}).get("guidance", {})
        run = ExperimentRun(
            run_id=event.run_id,
            kind=event.kind,
            method=guidance.get("method", "none"),
            freeze_policy=guidance.get("freeze_policy", "none"),
            lam=guidance.get("lam", 0.0),
            rate=event.settings.get("rate"),
            seed=event.settings.get("train", {}).get("seed", 0),
            out_dir=event.out_dir,
            started_at=event.timestamp,
        )
        with Session(self.engine) as db_session:
            db_session.merge(run)
            db_session.commit()

    def save_eval(self, event: EvalEvent) -> None:
        record = event.record
        result = EvalResult(
            run_id=event.run_id,
            step=event.step,
            train_accuracy=event.train_accuracy,
            test_accuracy=record.accuracy,
            jaccard=record.jaccard,
            foreground_mass=record.foreground_mass,
            logit_distance=record.logit_distance,
        )
        with Session(self.engine) as db_session:
            db_session.add(result)
            db_session.commit()

    def finish_run(self, event: RunFinishedEvent) -> None:
        """
        Marks a run as completed or failed.

        :param event: The finish event with the run summary.
        """
        with Session(self.engine) as db_session:
            run = db_session.get(ExperimentRun, event.run_id)
            if run is None:
                return
            run.status = event.status
            run.finished_at = event.timestamp
            run.final_test_accuracy = event.summary.get("final_test_acc")
            db_session.add(run)
            db_session.commit()

    def runs(self) -> list[ExperimentRun]:
        with Session(self.engine) as db_session:
            return list(db_session.exec(select(ExperimentRun).order_by(ExperimentRun.started_at)))

    def evals(self, run_id: str) -> list[EvalResult]:
        with Session(self.engine) as db_session:
            statement = select(EvalResult).where(EvalResult.run_id == run_id).order_by(EvalResult.step)
            return list(db_session.exec(statement))
