"""
Reverse-Mode Autodiff

A tape of array-valued nodes, just enough for the two networks: elementwise
arithmetic with broadcasting, a few nonlinearities, reductions, reshape and
matrix products. Convolution and spike ops register themselves through
Tape.record from their own modules.

Nodes are appended in creation order, so walking the tape backwards is a
reverse topological order; backward visits each node once.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .errors import TapeError

GradFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
Operand = Union["Var", np.ndarray, float, int]


class Var:
    """A value on (or off) a tape"""

    __slots__ = ("value", "tape", "parents", "backward_fn", "requires_grad", "name", "index")

    # Make numpy defer to Var's reflected operators (ndarray * Var -> Var.__rmul__).
    __array_ufunc__ = None

    def __init__(
        self,
        value: np.ndarray,
        tape: Optional["Tape"] = None,
        parents: Tuple["Var", ...] = (),
        backward_fn: Optional[GradFn] = None,
        requires_grad: bool = False,
        name: Optional[str] = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name
        self.index: Optional[int] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Var{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: Operand) -> "Var":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Var":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Var":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Var":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Var":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Var":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Var":
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> "Var":
        return div(other, self)

    def __neg__(self) -> "Var":
        return neg(self)

    def __matmul__(self, other: Operand) -> "Var":
        return matmul(self, other)

    def sum(self) -> "Var":
        return sum_all(self)

    def mean(self) -> "Var":
        return mean_all(self)

    def reshape(self, *shape: int) -> "Var":
        return reshape(self, shape)


class Tape:
    """Records operations on trainable leaves for one forward pass"""

    def __init__(self) -> None:
        self._nodes: List[Var] = []
        self._leaves: Dict[str, Var] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    def _append(self, var: Var) -> Var:
        var.index = len(self._nodes)
        self._nodes.append(var)
        return var

    def leaf(self, value: Union[np.ndarray, float], name: str) -> Var:
        """A trainable leaf; its gradient is reported under `name`"""
        if name in self._leaves:
            raise TapeError(f"duplicate leaf name {name!r}")
        var = Var(np.array(value, dtype=np.float64), self, requires_grad=True, name=name)
        self._leaves[name] = var
        return self._append(var)

    def record(self, value: np.ndarray, parents: Tuple[Var, ...], backward_fn: GradFn) -> Var:
        """Record an op whose gradient with respect to each parent is backward_fn(g)"""
        if not any(p.requires_grad for p in parents):
            return Var(value, self)
        return self._append(Var(value, self, parents, backward_fn, requires_grad=True))

    def backward(self, loss: Var) -> Dict[str, np.ndarray]:
        """
        Gradients of a scalar loss for every leaf on this tape.

        Leaves the loss does not depend on get zero gradients.

        Raises:
            TapeError: the loss was not recorded on this tape (backward
                before forward) or is not a scalar
        """
        if loss.tape is not self or loss.index is None or not self._nodes:
            raise TapeError("backward called before forward: loss was not recorded on this tape")
        if loss.value.size != 1:
            raise TapeError(f"loss must be a scalar, got shape {loss.shape}")

        pending: Dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        leaf_grads: Dict[str, np.ndarray] = {}

        for node in reversed(self._nodes[: loss.index + 1]):
            g = pending.pop(node.index, None)  # type: ignore[arg-type]
            if g is None:
                continue
            if node.backward_fn is None:
                leaf_grads[node.name] = g  # type: ignore[index]
                continue
            for parent, parent_grad in zip(node.parents, node.backward_fn(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = unbroadcast(parent_grad, parent.shape)
                key = parent.index
                pending[key] = pending[key] + parent_grad if key in pending else parent_grad  # type: ignore[index]

        return {
            name: leaf_grads.get(name, np.zeros_like(leaf.value)).reshape(leaf.shape)
            for name, leaf in self._leaves.items()
        }


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape"""
    grad = np.asarray(grad, dtype=np.float64)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def lift(x: Operand) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))


def _tape_of(*operands: Var) -> Optional[Tape]:
    tapes = {id(v.tape): v.tape for v in operands if v.tape is not None}
    if len(tapes) > 1:
        raise TapeError("operands recorded on different tapes")
    return next(iter(tapes.values()), None)


def apply(value: np.ndarray, parents: Tuple[Var, ...], backward_fn: GradFn) -> Var:
    """Wrap an op result, recording it when any parent lives on a tape"""
    tape = _tape_of(*parents)
    if tape is None:
        return Var(value)
    return tape.record(value, parents, backward_fn)


def add(a: Operand, b: Operand) -> Var:
    a, b = lift(a), lift(b)
    return apply(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Operand, b: Operand) -> Var:
    a, b = lift(a), lift(b)
    return apply(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a: Operand, b: Operand) -> Var:
    a, b = lift(a), lift(b)
    return apply(a.value * b.value, (a, b), lambda g: (g * b.value, g * a.value))


def div(a: Operand, b: Operand) -> Var:
    a, b = lift(a), lift(b)
    return apply(
        a.value / b.value,
        (a, b),
        lambda g: (g / b.value, -g * a.value / (b.value * b.value)),
    )


def neg(a: Operand) -> Var:
    a = lift(a)
    return apply(-a.value, (a,), lambda g: (-g,))


def log(a: Operand) -> Var:
    a = lift(a)
    return apply(np.log(a.value), (a,), lambda g: (g / a.value,))


def sigmoid(a: Operand) -> Var:
    a = lift(a)
    out = expit(a.value)
    return apply(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: Operand) -> Var:
    a = lift(a)
    return apply(np.maximum(a.value, 0.0), (a,), lambda g: (g * (a.value > 0),))


def sum_all(a: Operand) -> Var:
    a = lift(a)
    return apply(np.sum(a.value), (a,), lambda g: (np.broadcast_to(g, a.shape),))


def mean_all(a: Operand) -> Var:
    a = lift(a)
    n = max(a.value.size, 1)
    return apply(np.mean(a.value) if a.value.size else np.float64(0.0), (a,), lambda g: (np.broadcast_to(g / n, a.shape),))


def reshape(a: Operand, shape: Tuple[int, ...]) -> Var:
    a = lift(a)
    return apply(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def matmul(a: Operand, b: Operand) -> Var:
    """(N, F) @ (F, M)"""
    a, b = lift(a), lift(b)
    return apply(a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))
