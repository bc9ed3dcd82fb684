"""Reverse-mode autodiff over dense float64 arrays.

Deliberately small: tensors of rank <= 3, a closure per produced tensor,
and only the operations the encoders actually need. backward() replays
closures in reverse creation order, which is a valid topological order
because an op can only consume tensors that already exist.

Gradients accumulate with += into ``Tensor.grad`` and are zeroed
explicitly (normally by the optimizer step), so multi-target losses and
repeated backward calls compose.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "ConsistencyError",
    "no_grad",
    "is_grad_enabled",
    "constant",
    "matmul",
    "add",
    "sub",
    "elemwise_mul",
    "relu",
    "sigmoid",
    "softmax_rows",
    "scale",
    "mean_rows",
    "sum_all",
    "concat_cols",
    "concat_rows",
    "gather_rows",
    "dropout",
    "transpose_last2",
    "reshape",
    "slice_cols",
    "slice_rows",
    "expand_batch",
    "bce_with_logits",
    "l1_loss",
    "backward",
    "grad_check",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class ConsistencyError(RuntimeError):
    """A loss function handed to grad_check is not deterministic."""


_grad_enabled = True
_ids = itertools.count()


@contextmanager
def no_grad():
    """Disable tape recording inside the block (forward evaluation only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A dense float64 array plus its place in the computation graph.

    ``trainable`` marks leaves whose gradients persist across backward
    calls; everything else is an intermediate whose gradient buffer lives
    only for the duration of one backward pass.
    """

    __slots__ = ("data", "grad", "trainable", "name", "_id", "_parents", "_backward")

    def __init__(self, data, trainable: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 3:
            raise ShapeError(f"rank {arr.ndim} tensor not supported (max rank 3): shape {arr.shape}")
        self.data = arr
        self.trainable = trainable
        self.name = name
        self.grad: np.ndarray | None = np.zeros_like(arr) if trainable else None
        self._id = next(_ids)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def tracked(self) -> bool:
        """Whether gradients flow through or into this tensor."""
        return self.trainable or self._backward is not None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, trainable={self.trainable})"

    # Operator sugar; the module-level functions are the real API.
    def __matmul__(self, other):
        return matmul(self, _coerce(other))

    def __add__(self, other):
        return add(self, _coerce(other))

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return elemwise_mul(self, _coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def constant(data) -> Tensor:
    """Wrap raw data as a non-trainable graph leaf."""
    return Tensor(data)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.tracked() for p in parents):
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.tracked():
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# forward ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bw(g: np.ndarray) -> None:
        _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _result(out, (a, b), bw)


def _broadcast_shape(a: Tensor, b: Tensor, opname: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")

    def bw(g: np.ndarray) -> None:
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")

    def bw(g: np.ndarray) -> None:
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _result(a.data - b.data, (a, b), bw)


def elemwise_mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "elemwise_mul")

    def bw(g: np.ndarray) -> None:
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), bw)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bw(g: np.ndarray) -> None:
        _accum(a, g * mask)

    return _result(np.where(mask, a.data, 0.0), (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign so exp never overflows.
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bw(g: np.ndarray) -> None:
        _accum(a, g * y * (1.0 - y))

    return _result(y, (a,), bw)


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax along the last axis, max-stabilized so constant shifts cancel."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g: np.ndarray) -> None:
        _accum(a, (g - (g * y).sum(axis=-1, keepdims=True)) * y)

    return _result(y, (a,), bw)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def bw(g: np.ndarray) -> None:
        _accum(a, g * s)

    return _result(a.data * s, (a,), bw)


def mean_rows(a: Tensor) -> Tensor:
    """Mean over the row axis (axis -2): (..., R, C) -> (..., C)."""
    if a.ndim < 2:
        raise ShapeError(f"mean_rows needs rank >= 2, got shape {a.shape}")
    n_rows = a.shape[-2]

    def bw(g: np.ndarray) -> None:
        _accum(a, np.broadcast_to(np.expand_dims(g, -2) / n_rows, a.shape))

    return _result(a.data.mean(axis=-2), (a,), bw)


def sum_all(a: Tensor) -> Tensor:
    def bw(g: np.ndarray) -> None:
        _accum(a, np.broadcast_to(g, a.shape))

    return _result(np.asarray(a.data.sum()), (a,), bw)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    return _concat(parts, axis=-1)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    return _concat(parts, axis=-2)


def _concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[p.shape for p in parts]}") from None
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g: np.ndarray) -> None:
        moved = np.moveaxis(g, axis, 0)
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, np.moveaxis(moved[lo:hi], 0, axis))

    return _result(out, tuple(parts), bw)


def gather_rows(table: Tensor, indices) -> Tensor:
    """Select rows of a rank-2 table by integer index, with duplicates allowed."""
    if table.ndim != 2:
        raise ShapeError(f"gather_rows needs a rank-2 table, got shape {table.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError(f"gather_rows indices must be 1-D, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"gather_rows index out of range for table with {table.shape[0]} rows")

    def bw(g: np.ndarray) -> None:
        if table.tracked():
            buf = np.zeros_like(table.data)
            np.add.at(buf, idx, g)
            _accum(table, buf)

    return _result(table.data[idx], (table,), bw)


def dropout(a: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    if not (0.0 <= p < 1.0):
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    if rng is None:
        raise ValueError("dropout in training mode requires an explicit rng")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)

    def bw(g: np.ndarray) -> None:
        _accum(a, g * keep)

    return _result(a.data * keep, (a,), bw)


def transpose_last2(a: Tensor) -> Tensor:
    if a.ndim < 2:
        raise ShapeError(f"transpose_last2 needs rank >= 2, got shape {a.shape}")

    def bw(g: np.ndarray) -> None:
        _accum(a, np.swapaxes(g, -1, -2))

    return _result(np.swapaxes(a.data, -1, -2), (a,), bw)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"reshape {a.shape} -> {shape} changes element count")
    orig = a.shape

    def bw(g: np.ndarray) -> None:
        _accum(a, g.reshape(orig))

    return _result(a.data.reshape(shape), (a,), bw)


def slice_cols(a: Tensor, lo: int, hi: int) -> Tensor:
    return _slice(a, lo, hi, axis=-1)


def slice_rows(a: Tensor, lo: int, hi: int) -> Tensor:
    if a.ndim < 2:
        raise ShapeError(f"slice_rows needs rank >= 2, got shape {a.shape}")
    return _slice(a, lo, hi, axis=-2)


def _slice(a: Tensor, lo: int, hi: int, axis: int) -> Tensor:
    n = a.shape[axis]
    if not (0 <= lo < hi <= n):
        raise ShapeError(f"slice [{lo}:{hi}] out of range for axis of length {n}")
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(lo, hi)
    sl = tuple(sl)

    def bw(g: np.ndarray) -> None:
        buf = np.zeros_like(a.data)
        buf[sl] = g
        _accum(a, buf)

    return _result(a.data[sl], (a,), bw)


def expand_batch(a: Tensor, n: int) -> Tensor:
    """Tile a rank <= 2 tensor along a new leading batch axis."""
    if a.ndim > 2:
        raise ShapeError(f"expand_batch of rank-{a.ndim} tensor would exceed rank 3")
    if n < 1:
        raise ValueError(f"batch size must be >= 1, got {n}")

    def bw(g: np.ndarray) -> None:
        _accum(a, g.sum(axis=0))

    return _result(np.broadcast_to(a.data, (n,) + a.shape).copy(), (a,), bw)


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Mean binary cross-entropy on raw logits, stable for large |z|."""
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != logits.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.shape} vs targets {y.shape}")
    z = logits.data
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = max(z.size, 1)

    def bw(g: np.ndarray) -> None:
        s = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
        _accum(logits, g * (s - y) / n)

    return _result(np.asarray(loss.mean()), (logits,), bw)


def l1_loss(pred: Tensor, targets) -> Tensor:
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != pred.shape:
        raise ShapeError(f"l1_loss: predictions {pred.shape} vs targets {y.shape}")
    diff = pred.data - y
    n = max(diff.size, 1)

    def bw(g: np.ndarray) -> None:
        _accum(pred, g * np.sign(diff) / n)

    return _result(np.asarray(np.abs(diff).mean()), (pred,), bw)


# ---------------------------------------------------------------------------
# backward and gradient checking


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every tracked leaf reachable from loss.

    Walks the reachable subgraph in reverse creation order; creation order
    is topological, so every tensor's gradient is complete before its own
    closure runs.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    seen = {id(loss)}
    stack = [loss]
    nodes: list[Tensor] = []
    while stack:
        t = stack.pop()
        nodes.append(t)
        for p in t._parents:
            if id(p) not in seen and p.tracked():
                seen.add(id(p))
                stack.append(p)
    nodes.sort(key=lambda t: t._id, reverse=True)
    _accum(loss, np.ones_like(loss.data))
    for t in nodes:
        if t._backward is not None and t.grad is not None:
            t._backward(t.grad)


def grad_check(loss_fn: Callable[[], Tensor], store, epsilon: float = 1e-5, names=None) -> float:
    """Compare tape gradients against central finite differences.

    Returns the worst relative error max(|analytic - numeric|) /
    max(1, |analytic|, |numeric|) over every scalar of the selected
    trainable parameters. loss_fn must be deterministic (dropout off).
    """
    if not (0.0 < epsilon <= 1e-2):
        raise ValueError(f"epsilon must lie in (0, 1e-2], got {epsilon}")
    with no_grad():
        first = float(loss_fn().data.reshape(()))
        second = float(loss_fn().data.reshape(()))
    if first != second:
        raise ConsistencyError(f"loss_fn is not deterministic: {first!r} != {second!r}")

    store.zero_grads()
    loss = loss_fn()
    backward(loss)
    selected = list(names) if names is not None else [n for n, _ in store.trainable_items()]
    analytic = {n: store[n].grad.copy() for n in selected}
    store.zero_grads()

    worst = 0.0
    for name in selected:
        value = store[name].data
        a = analytic[name]
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + epsilon
            with no_grad():
                f_plus = float(loss_fn().data.reshape(()))
            value[idx] = orig - epsilon
            with no_grad():
                f_minus = float(loss_fn().data.reshape(()))
            value[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            rel = abs(a[idx] - numeric) / max(1.0, abs(a[idx]), abs(numeric))
            if rel > worst:
                worst = rel
    return worst
