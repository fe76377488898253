from collections.abc import Callable, Mapping

import numpy as np

from gtalab.core.errors import ContractError
from gtalab.ndtensor.tensor import Tape, Tensor, no_grad

MAX_FD_EPS = 1e-3


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max of |analytic - numeric| / max(1, |analytic|) over all entries."""
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom))


def _central_differences(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float) -> np.ndarray:
    numeric = np.empty(x.size)
    flat = x.reshape(-1)
    for i in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += eps
        minus[i] -= eps
        numeric[i] = (f(plus.reshape(x.shape)) - f(minus.reshape(x.shape))) / (2.0 * eps)
    return numeric.reshape(x.shape)


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-6) -> float:
    """
    Compare backward() against central differences of a scalar function.

    Returns the max relative error with a max(1, |analytic|) denominator.
    """
    if not 0.0 < eps <= MAX_FD_EPS:
        msg = f"finite_diff_check eps must lie in (0, {MAX_FD_EPS}], got {eps}"
        raise ContractError(msg)
    with Tape() as tape:
        leaf = tape.variable(x.data)
        analytic = tape.backward(f(leaf))[leaf.node_id].numpy()
    with no_grad():
        numeric = _central_differences(lambda arr: f(Tensor(arr)).item(), x.data, eps)
    return relative_error(analytic, numeric)


def finite_diff_check_params(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-6,
) -> dict[str, float]:
    """
    Per-parameter max relative error for a scalar function of a whole
    parameter map (every entry of every tensor is perturbed).
    """
    if not 0.0 < eps <= MAX_FD_EPS:
        msg = f"finite_diff_check eps must lie in (0, {MAX_FD_EPS}], got {eps}"
        raise ContractError(msg)
    with Tape() as tape:
        leaves = tape.bind(params)
        analytic = tape.gradients(f(leaves), leaves)
    errors = {}
    with no_grad():
        constants = {name: Tensor(value) for name, value in params.items()}
        for name, value in params.items():

            def evaluate(arr, name=name):
                return f({**constants, name: Tensor(arr)}).item()

            errors[name] = relative_error(analytic[name], _central_differences(evaluate, value, eps))
    return errors
