from collections.abc import Callable, Iterator, Mapping
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any

import numpy as np

from gtalab.core.errors import ContractError, NumericalError

VJP = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]

_ACTIVE_TAPE: ContextVar["Tape | None"] = ContextVar("gtalab_active_tape", default=None)
_CHECK_NUMERICS: ContextVar[bool] = ContextVar("gtalab_check_numerics", default=False)


class Tensor:
    """
    Immutable float64 array, optionally registered on a gradient tape.

    Constants have `node_id is None`. Tensors produced by an op whose inputs
    live on the active tape carry the id of the node that produced them.
    """

    __slots__ = ("_data", "_tape", "node_id")

    def __init__(self, data: Any, node_id: int | None = None, tape: "Tape | None" = None):
        array = np.array(data, dtype=np.float64)
        array.flags.writeable = False
        self._data = array
        self.node_id = node_id
        self._tape = tape

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def tape(self) -> "Tape | None":
        return self._tape

    @property
    def requires_grad(self) -> bool:
        return self.node_id is not None

    def item(self) -> float:
        if self._data.size != 1:
            msg = f"item() needs a single-element tensor, got shape {self.shape}"
            raise ContractError(msg)
        return float(self._data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self._data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self._data)

    def __repr__(self):
        tag = f", node_id={self.node_id}" if self.node_id is not None else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other: "Tensor") -> "Tensor":
        from gtalab.ndtensor import ops

        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from gtalab.ndtensor import ops

        return ops.sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from gtalab.ndtensor import ops

        return ops.mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from gtalab.ndtensor import ops

        return ops.matmul(self, other)

    def __getitem__(self, key) -> "Tensor":
        from gtalab.ndtensor import ops

        return ops.getitem(self, key)


@dataclass(frozen=True)
class TapeNode:
    node_id: int
    op: str
    parents: tuple[int | None, ...]
    vjp: VJP


class Tape:
    """
    Ordered record of executed operations for reverse-mode differentiation.

    Use as a context manager; while active, ops whose inputs are on this
    tape append a node. A tape has a single owner.
    """

    def __init__(self):
        self._nodes: list[TapeNode] = []
        self._leaf_shapes: dict[int, tuple[int, ...]] = {}
        self._next_id = 0
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *_):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def nodes(self) -> list[TapeNode]:
        return list(self._nodes)

    def _new_id(self) -> int:
        node_id = self._next_id
        self._next_id += 1
        return node_id

    def variable(self, data: Any) -> Tensor:
        """Register a leaf (a parameter or input we want gradients for)."""
        node_id = self._new_id()
        tensor = Tensor(data, node_id=node_id, tape=self)
        self._leaf_shapes[node_id] = tensor.shape
        return tensor

    def bind(self, params: Mapping[str, np.ndarray]) -> dict[str, Tensor]:
        """Register every array of a parameter map as a leaf, in key order."""
        return {name: self.variable(value) for name, value in params.items()}

    def record(self, op: str, data: np.ndarray, parents: tuple[Tensor, ...], vjp: VJP) -> Tensor:
        for parent in parents:
            if parent.node_id is not None and parent.tape is not self:
                msg = f"{op}: input {parent!r} belongs to a different tape"
                raise ContractError(msg)
        node_id = self._new_id()
        self._nodes.append(TapeNode(node_id, op, tuple(p.node_id for p in parents), vjp))
        return Tensor(data, node_id=node_id, tape=self)

    def backward(self, loss: Tensor) -> dict[int, Tensor]:
        """
        Gradients of a scalar loss for every leaf of this tape.

        Leaves the loss does not depend on receive zeros.
        """
        if loss.size != 1:
            msg = f"backward needs a scalar loss, got shape {loss.shape}"
            raise ContractError(msg)
        grads: dict[int, np.ndarray] = {}
        if loss.node_id is not None:
            if loss.tape is not self:
                msg = "loss was not recorded on this tape"
                raise ContractError(msg)
            grads[loss.node_id] = np.ones(loss.shape)
            for node in reversed(self._nodes):
                if node.node_id > loss.node_id:
                    continue
                upstream = grads.pop(node.node_id, None)
                if upstream is None:
                    continue
                for parent_id, grad in zip(node.parents, node.vjp(upstream), strict=True):
                    if parent_id is None or grad is None:
                        continue
                    grads[parent_id] = grads[parent_id] + grad if parent_id in grads else grad
        return {
            leaf: Tensor(grads.get(leaf, np.zeros(shape)).reshape(shape))
            for leaf, shape in self._leaf_shapes.items()
        }

    def gradients(self, loss: Tensor, wrt: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
        """Backward, then pick out the gradients of the named leaves."""
        grads = self.backward(loss)
        result = {}
        for name, tensor in wrt.items():
            if tensor.node_id is None or tensor.node_id not in grads:
                result[name] = np.zeros(tensor.shape)
            else:
                result[name] = grads[tensor.node_id].numpy()
        return result


def current_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording; ops inside produce constants."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)


@contextmanager
def check_numerics(enabled: bool = True) -> Iterator[None]:  # noqa: FBT001, FBT002
    """Raise NumericalError as soon as an op produces NaN or Inf."""
    token = _CHECK_NUMERICS.set(enabled)
    try:
        yield
    finally:
        _CHECK_NUMERICS.reset(token)


def emit(op: str, data: np.ndarray, parents: tuple[Tensor, ...], vjp: VJP) -> Tensor:
    """Wrap an op result, recording it when any input is on the active tape."""
    if _CHECK_NUMERICS.get() and not np.all(np.isfinite(data)):
        msg = f"{op} produced non-finite values"
        raise NumericalError(msg)
    tape = _ACTIVE_TAPE.get()
    if tape is None or all(p.node_id is None for p in parents):
        return Tensor(data)
    return tape.record(op, data, parents, vjp)


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)
