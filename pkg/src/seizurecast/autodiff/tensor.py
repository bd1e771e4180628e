"""
Tensor and gradient tape.

A Tensor wraps a float64 numpy array. Tensors produced by an op keep
references to their parents plus a local adjoint rule; ``backward()`` orders
that graph topologically (the Tape) and replays the rules in reverse.

Gradients land on leaf tensors with ``requires_grad=True`` and accumulate
additively across calls until ``zero_grad()``.

Recording can be switched off per thread with ``no_grad()``; Monte-Carlo
inference uses it so worker threads never build graphs.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from seizurecast.core.contracts import ContractError
from seizurecast.core.types import FloatArray

Adjoint = Callable[[FloatArray], Sequence[Optional[FloatArray]]]

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording in the current thread."""
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_adjoint", "op")

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        _parents: Tuple["Tensor", ...] = (),
        _adjoint: Optional[Adjoint] = None,
        op: str = "",
    ) -> None:
        self.data: FloatArray = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[FloatArray] = None
        self._parents = _parents
        self._adjoint = _adjoint
        self.op = op

    # ── Introspection ─────────────────────────────────────────────────────

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._adjoint is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> FloatArray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        kind = self.op or ("leaf" if self.is_leaf else "?")
        return f"Tensor(shape={self.shape}, op={kind}, requires_grad={self.requires_grad})"

    # ── Operators ─────────────────────────────────────────────────────────

    def __add__(self, other: Any) -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.add(self, other)

    def __sub__(self, other: Any) -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.add(ops.neg(self), other)

    def __mul__(self, other: Any) -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.mul(self, other)

    def __truediv__(self, other: Any) -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.div(self, other)

    def __neg__(self) -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from seizurecast.autodiff import ops
        return ops.matmul(self, other)

    # ── Autodiff ──────────────────────────────────────────────────────────

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every requires_grad leaf reachable from self."""
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
        tape = Tape.record(self)
        pending: Dict[int, FloatArray] = {id(self): np.ones_like(self.data)}
        for node in reversed(tape.nodes):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._adjoint is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._adjoint(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pending[key] + pg if key in pending else pg


@dataclass
class Tape:
    """Topological order of the graph below a root tensor.

    ``nodes`` lists every tensor that requires grad, parents before children;
    reverse replay therefore visits each node once, after all its consumers.
    """

    nodes: List[Tensor] = field(default_factory=list)

    @classmethod
    def record(cls, root: Tensor) -> "Tape":
        order: List[Tensor] = []
        visited: set[int] = set()
        # Iterative post-order DFS; deep conv graphs would overflow recursion.
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(nodes=order)

    def __len__(self) -> int:
        return len(self.nodes)


def make_result(
    data: FloatArray,
    parents: Tuple[Tensor, ...],
    adjoint: Adjoint,
    op: str,
) -> Tensor:
    """Build an op output, attaching it to the tape only when a parent needs grads."""
    track = grad_enabled() and any(p.requires_grad for p in parents)
    if not track:
        return Tensor(data, op=op)
    return Tensor(data, requires_grad=True, _parents=parents, _adjoint=adjoint, op=op)


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)
