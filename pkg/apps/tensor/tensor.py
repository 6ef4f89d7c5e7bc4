"""
tensor.py

Dense tensor with define-by-run reverse-mode differentiation:
- Tensor: numpy-backed array with an optional gradient buffer
- Function: base class for differentiable operations (forward/backward pair)
- Tape: ordered record of the operations reachable from a root
- no_grad / use_dtype: recording and precision contexts
"""

from __future__ import annotations

import contextlib
import itertools
import logging
from typing import Any, Iterator, Optional, Sequence

import numpy as np

from apps.abstract.exceptions import NumericalError, ShapeError

logger = logging.getLogger(__name__)

_sequence = itertools.count()
_grad_enabled = True
_default_dtype: type = np.float32


def default_dtype() -> type:
    return _default_dtype


@contextlib.contextmanager
def use_dtype(dtype: type) -> Iterator[None]:
    """
    Temporarily switch the dtype new tensors are created with.

    Args:
        dtype: numpy float type, float32 for training or float64 for checks.
    """
    global _default_dtype
    previous = _default_dtype
    _default_dtype = dtype
    try:
        yield
    finally:
        _default_dtype = previous


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """
    Suppress recording of operations on the tape.
    """
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Context:
    """
    Scratch space an operation uses to hand forward values to its backward.
    """

    def __init__(self):
        self.saved: tuple = ()

    def save_for_backward(self, *values: Any) -> None:
        self.saved = values


class Node:
    """
    One executed operation on the tape.
    """

    __slots__ = ("function", "ctx", "inputs", "seq", "shape")

    def __init__(self, function: type, ctx: Context, inputs: tuple, shape: tuple):
        self.function = function
        self.ctx = ctx
        self.inputs = inputs
        self.shape = shape
        self.seq = next(_sequence)

    def __repr__(self):
        return f"Node({self.function.__name__}, seq={self.seq})"


class Tensor:
    """
    n-dimensional array that can participate in differentiation.
    """

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[type] = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype or _default_dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node: Optional[Node] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    @property
    def tape_id(self) -> Optional[int]:
        return self._node.seq if self._node is not None else None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    def __len__(self):
        return len(self.data)

    # arithmetic routes through apps.tensor.functional
    def __add__(self, other):
        from apps.tensor import functional as F

        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from apps.tensor import functional as F

        return F.sub(self, other)

    def __rsub__(self, other):
        from apps.tensor import functional as F

        return F.sub(other, self)

    def __mul__(self, other):
        from apps.tensor import functional as F

        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from apps.tensor import functional as F

        if isinstance(other, Tensor):
            raise TypeError("division is only supported by a scalar")
        return F.mul(self, 1.0 / float(other))

    def __neg__(self):
        from apps.tensor import functional as F

        return F.neg(self)

    def __pow__(self, exponent):
        from apps.tensor import functional as F

        return F.power(self, exponent)

    def sum(self) -> Tensor:
        from apps.tensor import functional as F

        return F.sum(self)

    def mean(self) -> Tensor:
        from apps.tensor import functional as F

        return F.mean(self)

    def abs(self) -> Tensor:
        from apps.tensor import functional as F

        return F.absolute(self)

    def exp(self) -> Tensor:
        from apps.tensor import functional as F

        return F.exp(self)

    def tanh(self) -> Tensor:
        from apps.tensor import functional as F

        return F.tanh(self)

    def reshape(self, *shape) -> Tensor:
        from apps.tensor import functional as F

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Function:
    """
    A differentiable operation.

    Subclasses implement ``forward(ctx, *args, **kwargs) -> np.ndarray`` over raw
    arrays and ``backward(ctx, grad) -> tuple`` returning one gradient (or None)
    per Tensor argument, in argument order.
    """

    @staticmethod
    def forward(ctx: Context, *args, **kwargs) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple:
        raise NotImplementedError

    @classmethod
    def apply(cls, *args, **kwargs) -> Tensor:
        tensors = tuple(a for a in args if isinstance(a, Tensor))
        raw = [a.data if isinstance(a, Tensor) else a for a in args]
        ctx = Context()
        out = cls.forward(ctx, *raw, **kwargs)

        if not np.all(np.isfinite(out)):
            if all(np.all(np.isfinite(t.data)) for t in tensors):
                logger.error(f"{cls.__name__} produced non-finite values")
                raise NumericalError(
                    f"{cls.__name__} produced non-finite output on finite inputs"
                )

        result = Tensor(out, dtype=out.dtype)
        if _grad_enabled and any(t.requires_grad for t in tensors):
            result.requires_grad = True
            result._node = Node(cls, ctx, tensors, out.shape)
        return result


class Tape:
    """
    Ordered record of the operations that produced a root tensor.

    The record is rebuilt from the root on every backward pass, so each forward
    pass gets its own tape.
    """

    def __init__(self, nodes: Sequence[Node]):
        self.nodes = sorted(nodes, key=lambda node: node.seq)

    @classmethod
    def from_root(cls, root: Tensor) -> Tape:
        seen: dict[int, Node] = {}
        stack = [root._node] if root._node is not None else []
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen[id(node)] = node
            for parent in node.inputs:
                if parent._node is not None and id(parent._node) not in seen:
                    stack.append(parent._node)
        return cls(list(seen.values()))

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def replay_backward(self, root: Tensor) -> int:
        """
        Propagate gradients from the root through the record in reverse order.

        Returns:
            Number of operations visited.
        """
        pending: dict[int, np.ndarray] = {
            id(root._node): np.ones_like(root.data)
        }
        visited = 0
        for node in reversed(self.nodes):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            visited += 1
            input_grads = node.function.backward(node.ctx, grad)
            if not isinstance(input_grads, tuple):
                input_grads = (input_grads,)
            for parent, parent_grad in zip(node.inputs, input_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent_grad.shape != parent.shape:
                    raise ShapeError(
                        f"{node.function.__name__} returned gradient of shape "
                        f"{parent_grad.shape} for input of shape {parent.shape}"
                    )
                if parent._node is not None:
                    key = id(parent._node)
                    if key in pending:
                        pending[key] = pending[key] + parent_grad
                    else:
                        pending[key] = parent_grad
                elif parent.grad is None:
                    parent.grad = np.array(parent_grad, dtype=parent.dtype)
                else:
                    parent.grad += parent_grad
        return visited


def backward(root: Tensor) -> Tape:
    """
    Populate ``grad`` on every gradient-requiring leaf reachable from a scalar root.

    Args:
        root: scalar tensor recorded on the tape.

    Returns:
        The tape that was replayed.
    """
    if root.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    if root._node is None:
        if root.requires_grad:
            root.grad = np.ones_like(root.data)
            return Tape([])
        raise ValueError("root does not require grad and has no recorded history")
    tape = Tape.from_root(root)
    tape.replay_backward(root)
    return tape
