"""
RunReport: JSON Lines record of a run.

The first line is a schema header; then one object per optimizer step
(`"kind": "step"`), per evaluation (`"kind": "eval"`) and a closing
summary. Only quantities that the seed, settings and data determine go
into the file, so two equivalent runs produce identical bytes.
"""

import json
import math
from pathlib import Path
from typing import Any

import pandas as pd

from gtalab.core.bus.events import EvalEvent, RunFinishedEvent, StepEvent
from gtalab.core.constants import REPORT_SCHEMA, REPORT_SCHEMA_VERSION
from gtalab.core.errors import ContractError, NumericalError

REPORT_FILE = "report.jsonl"


class RunReport:
    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[dict[str, Any]] = []
        self._last_step = 0
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")
        self._append({"schema": REPORT_SCHEMA, "version": REPORT_SCHEMA_VERSION})

    def _append(self, record: dict[str, Any]) -> None:
        for key, value in record.items():
            if isinstance(value, float) and not math.isfinite(value):
                msg = f"RunReport value {key}={value} is not finite"
                raise NumericalError(msg)
        self.records.append(record)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(record, allow_nan=False) + "\n")

    def _check_step(self, step: int, *, strict: bool) -> None:
        if step < self._last_step or (strict and step == self._last_step):
            msg = f"RunReport steps must increase: got {step} after {self._last_step}"
            raise ContractError(msg)
        self._last_step = step

    def on_step(self, event: StepEvent) -> None:
        self._check_step(event.step, strict=True)
        self._append(
            {
                "kind": "step",
                "step": event.step,
                "lr": event.lr,
                "ce": event.ce,
                "reg": event.reg,
                "total": event.total,
            }
        )

    def on_eval(self, event: EvalEvent) -> None:
        self._check_step(event.step, strict=False)
        record = {"kind": "eval", "step": event.step, "train_acc": event.train_accuracy}
        test = event.record.to_dict()
        record["test_acc"] = test.pop("accuracy")
        record.update(test)
        self._append(record)

    def on_finished(self, event: RunFinishedEvent) -> None:
        self._append({"kind": "summary", "status": event.status.value, **event.summary})

    @property
    def step_records(self) -> list[dict[str, Any]]:
        return [r for r in self.records if r.get("kind") == "step"]

    @property
    def eval_records(self) -> list[dict[str, Any]]:
        return [r for r in self.records if r.get("kind") == "eval"]

    @property
    def summary(self) -> dict[str, Any] | None:
        summaries = [r for r in self.records if r.get("kind") == "summary"]
        return summaries[-1] if summaries else None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(record, allow_nan=False) + "\n" for record in self.records)

    def steps_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.step_records, columns=["step", "lr", "ce", "reg", "total"])

    @classmethod
    def read(cls, path: str | Path) -> list[dict[str, Any]]:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        records = [json.loads(line) for line in lines if line.strip()]
        if not records or records[0].get("schema") != REPORT_SCHEMA:
            msg = f"{path}: not a {REPORT_SCHEMA} file"
            raise ContractError(msg)
        return records
