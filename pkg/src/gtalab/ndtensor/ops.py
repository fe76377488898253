"""
Differentiable tensor operations.

Every op takes Tensors, computes the result with numpy and hands a
vector-Jacobian product to the active tape. Binary ops accept equal shapes,
a scalar operand, or an operand whose shape is a trailing suffix of the
other's (a parameter shared across a leading batch axis); gradients of the
smaller operand are summed over the broadcast axes.
"""

import math
from collections.abc import Sequence

import numpy as np
from scipy.special import erf

from gtalab.core.errors import ContractError, DimensionError
from gtalab.ndtensor.tensor import Tensor, as_tensor, emit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if len(shape) == 0:
        return np.asarray(grad.sum())
    lead = grad.ndim - len(shape)
    return grad.sum(axis=tuple(range(lead))) if lead > 0 else grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    small, large = (a.shape, b.shape) if a.ndim < b.ndim else (b.shape, a.shape)
    if len(small) < len(large) and large[len(large) - len(small) :] == small:
        return
    msg = f"{op}: cannot combine shapes {a.shape} and {b.shape}"
    raise DimensionError(msg)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return emit(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return emit(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return emit(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(a: Tensor, factor: float) -> Tensor:
    return emit("scale", a.data * factor, (a,), lambda g: (g * factor,))


def square(a: Tensor) -> Tensor:
    return emit("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return emit("sqrt", out, (a,), lambda g: (0.5 * g / out,))


def sum(a: Tensor) -> Tensor:  # noqa: A001
    """Sum of all elements, as a 0-d tensor."""
    return emit("sum", np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor) -> Tensor:
    n = a.size
    return emit(
        "mean",
        np.asarray(a.data.sum() / n),
        (a,),
        lambda g: (np.broadcast_to(g / n, a.shape).copy(),),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product over the last two axes; `b` may be a 2-D matrix shared
    across the leading batch axes of `a`.
    """
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:  # noqa: PLR2004
        msg = f"matmul: cannot multiply shapes {a.shape} and {b.shape}"
        raise DimensionError(msg)
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:  # noqa: PLR2004
        msg = f"matmul: batch axes of {a.shape} and {b.shape} differ"
        raise DimensionError(msg)

    def vjp(g):
        grad_a = g @ np.swapaxes(b.data, -1, -2)
        grad_b = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return emit("matmul", a.data @ b.data, (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    return emit("transpose", np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return emit("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def expand(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Repeat `a` over new leading axes so that it takes `shape`."""
    if tuple(shape[len(shape) - a.ndim :]) != a.shape:
        msg = f"expand: {a.shape} is not a trailing part of {shape}"
        raise DimensionError(msg)
    return emit(
        "expand",
        np.broadcast_to(a.data, shape).copy(),
        (a,),
        lambda g: (_unbroadcast(g, a.shape),),
    )


def getitem(a: Tensor, key) -> Tensor:
    """Basic (slice/int) indexing; the gradient is scattered back into place."""
    out = a.data[key]

    def vjp(g):
        grad = np.zeros(a.shape)
        grad[key] = g
        return (grad,)

    return emit("getitem", np.array(out), (a,), vjp)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    """Rows start..stop (half-open) along the second-to-last axis."""
    if a.ndim < 2 or not 0 <= start <= stop <= a.shape[-2]:  # noqa: PLR2004
        msg = f"slice_rows: rows {start}..{stop} out of range for shape {a.shape}"
        raise DimensionError(msg)
    return getitem(a, (..., slice(start, stop), slice(None)))


def _concat(op: str, tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        msg = f"{op}: nothing to concatenate"
        raise ContractError(msg)
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(
            t.shape[i] != ref[i] for i in range(len(ref)) if i != axis % len(ref)
        ):
            msg = f"{op}: cannot concatenate shapes {ref} and {t.shape}"
            raise DimensionError(msg)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return emit(op, np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), vjp)


def concat_last_dim(tensors: Sequence[Tensor]) -> Tensor:
    return _concat("concat_last_dim", tensors, axis=-1)


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    return _concat("concat_rows", tensors, axis=-2)


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, stabilized by the row max."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return emit("softmax_rows", out, (a,), vjp)


def log_softmax_rows(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)

    def vjp(g):
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return emit("log_softmax_rows", out, (a,), vjp)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float) -> Tensor:
    """Standardize each row over the last axis, then apply gamma/beta."""
    if eps <= 0:
        msg = f"layer_norm eps must be positive, got {eps}"
        raise ContractError(msg)
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        msg = f"layer_norm: affine shapes {gamma.shape}/{beta.shape} do not match rows of {x.shape}"
        raise DimensionError(msg)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    lead = tuple(range(x.ndim - 1))

    def vjp(g):
        dxhat = g * gamma.data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return emit("layer_norm", xhat * gamma.data + beta.data, (x, gamma, beta), vjp)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x), with Phi from the error function."""
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
    return emit("gelu", x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """
    Batch-mean cross-entropy against soft targets (rows of `targets` sum to 1).

    A one-hot row gives the usual CE; a TransMix row (1-c, c) gives
    (1-c)*CE(label_a) + c*CE(label_b).
    """
    if targets.shape != logits.shape:
        msg = f"cross_entropy: targets {targets.shape} do not match logits {logits.shape}"
        raise DimensionError(msg)
    batch = logits.shape[0] if logits.ndim > 1 else 1
    return scale(sum(mul(log_softmax_rows(logits), Tensor(targets))), -1.0 / batch)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out
