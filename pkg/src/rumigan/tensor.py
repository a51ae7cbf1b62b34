"""Dense float64 tensors with a reverse-mode differentiation tape.

A :class:`Tape` records every op whose inputs are tracked on it. Backward
passes are themselves written in terms of tensor ops, so running
``Tape.gradient(..., create_graph=True)`` appends the backward computation to
the same tape and it can be differentiated again (used by the gradient
penalty).

Example::

    tape = Tape()
    with tape:
        x = tape.watch(Tensor([1.0, 2.0, 3.0]))
        y = mean(square(x))
    (gx,) = tape.gradient(y, [x])
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor", "Tape", "TapeError", "as_tensor", "current_tape",
    "add", "sub", "mul", "div", "neg", "matmul", "transpose", "reshape",
    "relu", "tanh", "sigmoid", "softplus", "exp", "log", "square", "sqrt",
    "mean", "sum", "norm", "concatenate", "clip", "broadcast_to", "sum_to",
    "index",
]


class TapeError(RuntimeError):
    """Misuse of the differentiation tape (non-scalar root, untracked input...)."""


_TAPES: list["Tape"] = []


def current_tape() -> "Tape | None":
    if not _TAPES:
        return None
    tape = _TAPES[-1]
    return None if tape._paused else tape


@dataclass
class _Node:
    op: str
    inputs: tuple["Tensor", ...]
    output: "Tensor"
    vjp: Callable[["Tensor"], Sequence["Tensor | None"]]


class Tape:
    """Append-only record of ops; nodes are stored in execution order."""

    def __init__(self) -> None:
        self.nodes: list[_Node] = []
        self._paused = 0

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def watch(self, t: "Tensor") -> "Tensor":
        """Track a leaf tensor; returns it for chaining."""
        t._tape = self
        t._index = -1
        return t

    def tracks(self, t: "Tensor") -> bool:
        return t._tape is self

    def _record(self, op, inputs, out, vjp) -> None:
        out._tape = self
        out._index = len(self.nodes)
        self.nodes.append(_Node(op, inputs, out, vjp))

    def gradient(self, root: "Tensor", wrt: Iterable["Tensor"],
                 create_graph: bool = False) -> list["Tensor"]:
        """Gradients of scalar ``root`` with respect to each tensor in ``wrt``.

        Tensors in ``wrt`` that ``root`` does not depend on get zero gradients.
        With ``create_graph`` the backward ops are recorded on this tape.
        """
        wrt = list(wrt)
        if root.data.size != 1:
            raise TapeError(f"root must be scalar, got shape {root.shape}")
        if not self.tracks(root):
            raise TapeError("root was not computed on this tape")
        for t in wrt:
            if not self.tracks(t):
                raise TapeError("gradient requested for a tensor not on this tape")

        def key(t: Tensor):
            return ("n", t._index) if t._index >= 0 else ("l", id(t))

        grads: dict = {key(root): Tensor(np.ones_like(root.data))}
        if not create_graph:
            self._paused += 1
        try:
            for i in range(root._index, -1, -1):
                node = self.nodes[i]
                g = grads.pop(("n", i), None)
                if g is None:
                    continue
                for inp, gi in zip(node.inputs, node.vjp(g)):
                    if gi is None or not self.tracks(inp):
                        continue
                    k = key(inp)
                    grads[k] = gi if k not in grads else add(grads[k], gi)
        finally:
            if not create_graph:
                self._paused -= 1
        out = []
        for t in wrt:
            g = grads.get(key(t))
            out.append(g if g is not None else Tensor(np.zeros_like(t.data)))
        return out


class Tensor:
    """Immutable float64 array, optionally tracked on a tape."""

    __slots__ = ("data", "_tape", "_index")
    __array_priority__ = 100

    def __init__(self, data) -> None:
        self.data = np.array(data, dtype=np.float64)
        self._tape: Tape | None = None
        self._index = -1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def tape_id(self) -> int | None:
        return None if self._tape is None else self._index

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor({self.data!r})"

    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __rtruediv__(self, o): return div(o, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, o): return matmul(self, o)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(op: str, data: np.ndarray, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite value produced by {op}")
    out = Tensor(data)
    tape = current_tape()
    if tape is not None and any(tape.tracks(t) for t in inputs):
        tape._record(op, inputs, out, vjp)
    return out


# -- shape plumbing ---------------------------------------------------------

def sum_to(x, shape: tuple[int, ...]) -> Tensor:
    """Sum ``x`` down to ``shape`` (inverse of numpy broadcasting)."""
    x = as_tensor(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    data = x.data
    lead = data.ndim - len(shape)
    if lead > 0:
        data = data.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and data.shape[i] != 1)
    if axes:
        data = data.sum(axis=axes, keepdims=True)
    xs = x.shape
    return _make("sum_to", data.reshape(shape), (x,),
                 lambda g: (broadcast_to(g, xs),))


def broadcast_to(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    xs = x.shape
    return _make("broadcast_to", np.broadcast_to(x.data, shape).copy(), (x,),
                 lambda g: (sum_to(g, xs),))


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    xs = x.shape
    return _make("reshape", x.data.reshape(shape), (x,), lambda g: (reshape(g, xs),))


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError("transpose expects a 2-D tensor")
    return _make("transpose", x.data.T.copy(), (x,), lambda g: (transpose(g),))


def index(x, idx) -> Tensor:
    """Basic slicing ``x[idx]``."""
    x = as_tensor(x)
    xs = x.shape
    return _make("index", x.data[idx].copy(), (x,), lambda g: (_unindex(g, idx, xs),))


def _unindex(g, idx, shape) -> Tensor:
    g = as_tensor(g)
    data = np.zeros(shape)
    data[idx] = g.data
    return _make("unindex", data, (g,), lambda h: (index(h, idx),))


def concatenate(xs: Sequence, axis: int = 0) -> Tensor:
    xs = tuple(as_tensor(x) for x in xs)
    data = np.concatenate([x.data for x in xs], axis=axis)
    bounds = np.cumsum([0] + [x.shape[axis] for x in xs])
    nd = data.ndim
    ax = axis % nd

    def vjp(g):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sl = [slice(None)] * nd
            sl[ax] = slice(int(lo), int(hi))
            out.append(index(g, tuple(sl)))
        return out

    return _make("concatenate", data, xs, vjp)


# -- arithmetic -------------------------------------------------------------

def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make("add", a.data + b.data, (a, b),
                 lambda g: (sum_to(g, a.shape), sum_to(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make("sub", a.data - b.data, (a, b),
                 lambda g: (sum_to(g, a.shape), sum_to(neg(g), b.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make("neg", -a.data, (a,), lambda g: (neg(g),))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make("mul", a.data * b.data, (a, b),
                 lambda g: (sum_to(mul(g, b), a.shape), sum_to(mul(g, a), b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    if np.any(b.data == 0):
        raise ZeroDivisionError("div by zero")

    def vjp(g):
        ga = div(g, b)
        return sum_to(ga, a.shape), sum_to(neg(mul(ga, div(a, b))), b.shape)

    return _make("div", a.data / b.data, (a, b), vjp)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    return _make("matmul", a.data @ b.data, (a, b),
                 lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g)))


# -- elementwise ------------------------------------------------------------

def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = (x.data > 0).astype(np.float64)
    return _make("relu", x.data * mask, (x,), lambda g: (mul(g, Tensor(mask)),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out: list[Tensor] = []
    y = _make("tanh", np.tanh(x.data), (x,),
              lambda g: (mul(g, sub(1.0, square(out[0]))),))
    out.append(y)
    return y


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out: list[Tensor] = []
    with np.errstate(over="ignore"):
        data = np.where(x.data >= 0, 1.0 / (1.0 + np.exp(-x.data)),
                        np.exp(np.minimum(x.data, 0)) / (1.0 + np.exp(np.minimum(x.data, 0))))
    y = _make("sigmoid", data, (x,),
              lambda g: (mul(g, mul(out[0], sub(1.0, out[0]))),))
    out.append(y)
    return y


def softplus(x) -> Tensor:
    x = as_tensor(x)
    data = np.logaddexp(0.0, x.data)
    return _make("softplus", data, (x,), lambda g: (mul(g, sigmoid(x)),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    out: list[Tensor] = []
    with np.errstate(over="ignore"):
        data = np.exp(x.data)
    y = _make("exp", data, (x,), lambda g: (mul(g, out[0]),))
    out.append(y)
    return y


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        raise ValueError("log of non-positive input")
    return _make("log", np.log(x.data), (x,), lambda g: (div(g, x),))


def square(x) -> Tensor:
    x = as_tensor(x)
    return _make("square", x.data * x.data, (x,), lambda g: (mul(g, mul(2.0, x)),))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data < 0):
        raise ValueError("sqrt of negative input")
    out: list[Tensor] = []
    y = _make("sqrt", np.sqrt(x.data), (x,), lambda g: (div(mul(0.5, g), out[0]),))
    out.append(y)
    return y


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only where unclamped."""
    x = as_tensor(x)
    mask = ((x.data >= lo) & (x.data <= hi)).astype(np.float64)
    return _make("clip", np.clip(x.data, lo, hi), (x,), lambda g: (mul(g, Tensor(mask)),))


# -- reductions -------------------------------------------------------------

def _expand(g: Tensor, shape, axis, keepdims) -> Tensor:
    if axis is not None and not keepdims:
        g = reshape(g, np.expand_dims(g.data, axis).shape)
    elif axis is None:
        g = reshape(g, (1,) * len(shape))
    return broadcast_to(g, shape)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    xs = x.shape
    return _make("sum", np.sum(x.data, axis=axis, keepdims=keepdims), (x,),
                 lambda g: (_expand(g, xs, axis, keepdims),))


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if x.data.size == 0:
        raise ValueError("mean of empty tensor")
    xs = x.shape
    n = x.data.size if axis is None else np.prod([xs[a] for a in np.atleast_1d(axis)])
    return _make("mean", np.mean(x.data, axis=axis, keepdims=keepdims), (x,),
                 lambda g: (_expand(mul(g, 1.0 / n), xs, axis, keepdims),))


def norm(x, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Euclidean norm along ``axis``; the (sub)gradient at a zero vector is 0."""
    x = as_tensor(x)
    xs = x.shape
    out: list[Tensor] = []

    def vjp(g):
        n = out[0]
        safe = add(n, Tensor((n.data == 0).astype(np.float64)))
        return (mul(x, _expand(div(g, safe), xs, axis, keepdims)),)

    y = _make("norm", np.sqrt(np.sum(x.data * x.data, axis=axis, keepdims=keepdims)), (x,), vjp)
    out.append(y)
    return y
