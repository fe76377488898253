import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from gtalab.core.errors import ContractError, DimensionError


def cosine_lr(step: int, total_steps: int, base_lr: float) -> float:
    """Cosine annealing from base_lr at step 0 to 0 at total_steps, no warmup."""
    if not 0 <= step <= total_steps:
        msg = f"step {step} outside [0, {total_steps}]"
        raise ContractError(msg)
    return max(0.0, base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps)))


@dataclass
class OptimizerState:
    """AdamW moments per parameter name plus the shared step counter."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, params: Mapping[str, np.ndarray]) -> "OptimizerState":
        return cls(
            step=0,
            m={name: np.zeros_like(value, dtype=np.float64) for name, value in params.items()},
            v={name: np.zeros_like(value, dtype=np.float64) for name, value in params.items()},
        )


def adamw_step(  # noqa: PLR0913
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
    mask: Mapping[str, bool] | None = None,
    decay_mask: Mapping[str, bool] | None = None,
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """
    One AdamW update with decoupled weight decay.

    Tensors with mask False are returned untouched and keep zero moments.
    Decay (param -= lr * wd * param, before the adaptive step) applies only
    where decay_mask is True; by default every trainable tensor decays.
    """
    beta1, beta2 = betas
    step = state.step + 1
    new_params: dict[str, np.ndarray] = {}
    new_m = dict(state.m)
    new_v = dict(state.v)
    for name, value in params.items():
        if mask is not None and not mask.get(name, False):
            new_params[name] = value
            continue
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != np.shape(value):
            msg = f"Gradient for {name} has shape {grad.shape}, parameter has {np.shape(value)}"
            raise DimensionError(msg)
        updated = np.array(value, dtype=np.float64, copy=True)
        if weight_decay and (decay_mask is None or decay_mask.get(name, False)):
            updated -= lr * weight_decay * updated
        m = beta1 * state.m.get(name, np.zeros_like(updated)) + (1.0 - beta1) * grad
        v = beta2 * state.v.get(name, np.zeros_like(updated)) + (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        updated -= lr * m_hat / (np.sqrt(v_hat) + eps)
        new_params[name] = updated
        new_m[name] = m
        new_v[name] = v
    return new_params, OptimizerState(step=step, m=new_m, v=new_v)
