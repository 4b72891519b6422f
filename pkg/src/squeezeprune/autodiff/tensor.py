"""Tensor container and the gradient tape that records executed ops."""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class NumericError(FloatingPointError):
    """Raised when a forward op produces NaN or Inf from finite inputs."""


class Tensor:
    """Dense n-d array plus an optional accumulated gradient.

    ``data`` is a contiguous numpy array (float32 for training, float64 for
    gradient checks).  Leaf tensors flagged ``requires_grad`` are parameters;
    their ``grad`` accumulates across ``Tape.backward`` calls until
    ``zero_grad`` is called.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "is_leaf")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float32)
        self.data = arr if arr.flags.c_contiguous else np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self.is_leaf = True

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class _Node:
    __slots__ = ("op", "output", "inputs", "backward")

    def __init__(self, op: str, output: Tensor, inputs: tuple[Tensor, ...], backward: BackwardFn):
        self.op = op
        self.output = output
        self.inputs = inputs
        self.backward = backward


_ACTIVE: list["Tape"] = []


def active_tape() -> "Tape | None":
    return _ACTIVE[-1] if _ACTIVE else None


class Tape:
    """Ordered record of ops executed while the tape is active.

    Use as a context manager::

        with Tape() as tape:
            loss = model_loss(...)
        grads = tape.backward(loss)

    Only ops with at least one input requiring grad are recorded.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, output: Tensor, inputs: Iterable[Tensor], backward: BackwardFn) -> None:
        output.is_leaf = False
        output.requires_grad = True
        self.nodes.append(_Node(op, output, tuple(inputs), backward))

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Back-propagate from a scalar ``loss``.

        Gradients are added into ``.grad`` of every reachable leaf that
        requires grad, and returned as ``{leaf: grad}`` for this call only.
        """
        if not self.nodes:
            raise RuntimeError("backward called on a tape with no recorded ops")
        if loss.data.size != 1:
            raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
        if loss.is_leaf:
            raise ValueError("loss was not produced under this tape")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for node in reversed(self.nodes):
            g_out = grads.pop(id(node.output), None)
            if g_out is None:
                continue
            in_grads = node.backward(g_out)
            for inp, g in zip(node.inputs, in_grads):
                if g is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
                if inp.is_leaf:
                    leaves[key] = inp

        result: dict[Tensor, np.ndarray] = {}
        for key, leaf in leaves.items():
            g = grads[key].astype(leaf.data.dtype, copy=False)
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.data)
            leaf.grad += g
            result[leaf] = g
        return result
