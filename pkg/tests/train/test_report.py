import json

import pytest

from gtalab.core.bus.events import EvalEvent, RunFinishedEvent, StepEvent
from gtalab.core.enums import RunStatus
from gtalab.core.errors import ContractError, NumericalError
from gtalab.core.types import EvalRecord
from gtalab.train import RunReport


def _step(step, total=1.0):
    return StepEvent(run_id="r", step=step, lr=0.1, ce=total, reg=0.0, total=total)


class TestRunReport:
    """Test the JSON Lines run report."""

    def test_header_steps_and_summary(self, tmp_path):
        report = RunReport(tmp_path / "report.jsonl")
        report.on_step(_step(1))
        report.on_step(_step(2, total=0.5))
        report.on_eval(EvalEvent(run_id="r", step=2, train_accuracy=0.75, record=EvalRecord(accuracy=0.5)))
        report.on_finished(RunFinishedEvent(run_id="r", status=RunStatus.COMPLETED, summary={"steps": 2}))
        records = RunReport.read(tmp_path / "report.jsonl")
        assert records[0] == {"schema": "gtalab.run-report", "version": 1}
        assert [r["kind"] for r in records[1:]] == ["step", "step", "eval", "summary"]
        assert records[3]["test_acc"] == 0.5
        assert records[3]["train_acc"] == 0.75
        assert report.summary == {"kind": "summary", "status": "completed", "steps": 2}

    def test_file_matches_memory(self, tmp_path):
        report = RunReport(tmp_path / "report.jsonl")
        report.on_step(_step(1))
        assert (tmp_path / "report.jsonl").read_text(encoding="utf-8") == report.to_jsonl()
        assert json.loads(report.to_jsonl().splitlines()[1])["step"] == 1

    def test_steps_strictly_increase(self):
        report = RunReport()
        report.on_step(_step(1))
        with pytest.raises(ContractError):
            report.on_step(_step(1))

    def test_non_finite_values_are_rejected(self):
        report = RunReport()
        with pytest.raises(NumericalError):
            report.on_step(_step(1, total=float("nan")))

    def test_steps_frame(self):
        report = RunReport()
        for step in (1, 2, 3):
            report.on_step(_step(step, total=1.0 / step))
        frame = report.steps_frame()
        assert list(frame.columns) == ["step", "lr", "ce", "reg", "total"]
        assert frame["step"].tolist() == [1, 2, 3]

    def test_read_rejects_other_files(self, tmp_path):
        path = tmp_path / "other.jsonl"
        path.write_text('{"hello": 1}\n', encoding="utf-8")
        with pytest.raises(ContractError):
            RunReport.read(path)
