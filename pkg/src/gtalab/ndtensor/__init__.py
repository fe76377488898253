from gtalab.ndtensor.gradcheck import finite_diff_check, finite_diff_check_params
from gtalab.ndtensor.tensor import Tape, Tensor, check_numerics, current_tape, no_grad

__all__ = [
    "Tape",
    "Tensor",
    "check_numerics",
    "current_tape",
    "finite_diff_check",
    "finite_diff_check_params",
    "no_grad",
]
