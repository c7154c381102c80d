"""Define-by-run reverse-mode tape over float64 numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""


class ContractError(ValueError):
    """Raised when an operation is called outside its contract."""


VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class _Node:
    op: str
    parents: tuple[int, ...]
    vjp: Optional[VJP]
    shape: tuple[int, ...]


class Tensor:
    """An n-dimensional float64 array, optionally recorded on a :class:`Tape`.

    Tensors without a tape are constants: they never receive gradients and
    can be shared freely.
    """

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape: Optional["Tape"] = None, node_id: Optional[int] = None):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        kind = "const" if self.tape is None else f"node={self.node_id}"
        return f"Tensor(shape={self.shape}, {kind})"


def const(data) -> Tensor:
    return Tensor(data)


class Tape:
    """Ordered record of operations; node ids are assigned in execution order,
    so parents always precede children."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._grads: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    def variable(self, value) -> Tensor:
        """Register a leaf (a parameter or an input we want gradients for)."""
        arr = np.array(value, dtype=np.float64)
        self._nodes.append(_Node("leaf", (), None, arr.shape))
        return Tensor(arr, self, len(self._nodes) - 1)

    def record(self, op: str, value: np.ndarray, parents: Sequence[Tensor], vjp: VJP) -> Tensor:
        ids = tuple(-1 if p.tape is None else p.node_id for p in parents)
        self._nodes.append(_Node(op, ids, vjp, value.shape))
        return Tensor(value, self, len(self._nodes) - 1)

    def ops(self) -> list[str]:
        return [n.op for n in self._nodes]

    def backward(self, root: Tensor) -> None:
        if root.tape is not self:
            raise ContractError("root is not recorded on this tape")
        if root.size != 1:
            raise ContractError(f"backward needs a scalar root, got shape {root.shape}")
        grads: dict[int, np.ndarray] = {root.node_id: np.ones(root.shape)}
        for nid in range(root.node_id, -1, -1):
            g = grads.get(nid)
            node = self._nodes[nid]
            if g is None or node.vjp is None:
                continue
            for pid, pg in zip(node.parents, node.vjp(g)):
                if pid < 0 or pg is None:
                    continue
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg
        self._grads = grads

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient of the last backward root w.r.t. ``t`` (zeros if unreachable)."""
        if t.tape is not self:
            raise ContractError("tensor is not recorded on this tape")
        g = self._grads.get(t.node_id)
        return np.zeros(t.shape) if g is None else g


def backward(root: Tensor) -> Tape:
    """Run the reverse sweep from a scalar root and return its tape."""
    if root.tape is None:
        raise ContractError("root is a constant; nothing to differentiate")
    root.tape.backward(root)
    return root.tape


def tape_of(*tensors: Tensor) -> Optional[Tape]:
    tape = None
    for t in tensors:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif t.tape is not tape:
            raise ContractError("operands are recorded on different tapes")
    return tape
