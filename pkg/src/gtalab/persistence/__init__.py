from gtalab.persistence.models import EvalResult, ExperimentRun
from gtalab.persistence.storage import ExperimentStorage

__all__ = ["EvalResult", "ExperimentRun", "ExperimentStorage"]
