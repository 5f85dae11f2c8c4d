"""Reverse-mode automatic differentiation on float64 numpy arrays.

A ``Tape`` records every primitive operation as it executes (define-by-run),
so the recording order is already a topological order of the graph.
``Tape.backward`` seeds the root gradient with 1 and replays the recorded
backward rules in exact reverse order, accumulating into ``Tensor.grad``.

Broadcasting in the binary elementwise primitives is deliberately restricted
to two cases so every backward rule stays auditable:

* scalar (0-d or python float) with any shape,
* row vector ``(k,)`` with the rows of a matrix ``(n, k)``.

Anything else raises ``ShapeError``. Per-row scaling by a length-n vector is
its own primitive (``scale_rows``) rather than a broadcast.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes outside an op's contract."""


class DomainError(ValueError):
    """Input outside an op's mathematical domain (e.g. log of x <= 0)."""


class NumericError(ArithmeticError):
    """NaN or Inf reached an op that requires finite input."""


class TapeError(RuntimeError):
    """Backward invoked in a state the tape cannot honor."""


_TAPE_STACK: list["Tape"] = []


class Tensor:
    """A float64 array with a gradient buffer of the same shape.

    ``grad`` is materialized lazily (all zeros on first access) so that
    tape-less evaluation passes do not pay for buffers they never touch.
    """

    __slots__ = ("data", "_grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self._grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.data.shape:
            raise ShapeError(
                f"grad shape {value.shape} != data shape {self.data.shape}"
            )
        self._grad = value

    def zero_grad(self) -> None:
        if self._grad is not None:
            self._grad.fill(0.0)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Arithmetic sugar; delegates to the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


class Tape:
    """Ordered record of primitive ops; context manager activates it."""

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes: list[Callable[[], None]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def backward(self, root: Tensor) -> None:
        """Seed d(root)/d(root) = 1 and replay recorded rules in reverse."""
        if not self.nodes:
            raise TapeError("backward on an empty tape (no forward recorded)")
        if root.data.ndim != 0:
            raise TapeError(f"backward root must be a scalar, got shape {root.shape}")
        root.grad[...] = 1.0
        for rule in reversed(self.nodes):
            rule()


def _active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _record(out: Tensor, inputs: Sequence[Tensor], rule: Callable[[], None]) -> None:
    tape = _active_tape()
    needs = any(t.requires_grad for t in inputs)
    out.requires_grad = needs
    if tape is not None and needs:
        tape.nodes.append(rule)


# --- binary elementwise with restricted broadcasting -------------------------

_SAME, _SCA, _SCB, _ROWA, _ROWB = range(5)


def _broadcast_mode(sa: tuple[int, ...], sb: tuple[int, ...]) -> int:
    if sa == sb:
        return _SAME
    if sa == ():
        return _SCA
    if sb == ():
        return _SCB
    if len(sa) == 1 and len(sb) == 2 and sa[0] == sb[1]:
        return _ROWA
    if len(sb) == 1 and len(sa) == 2 and sb[0] == sa[1]:
        return _ROWB
    raise ShapeError(f"unsupported broadcast between shapes {sa} and {sb}")


def _reduce_grad(g: np.ndarray, mode: int, side: str) -> np.ndarray:
    # Collapse an output-shaped gradient back onto a broadcast operand.
    if mode == _SAME:
        return g
    if (mode == _SCA and side == "a") or (mode == _SCB and side == "b"):
        return np.asarray(g.sum())
    if (mode == _ROWA and side == "a") or (mode == _ROWB and side == "b"):
        return g.sum(axis=0)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    mode = _broadcast_mode(a.shape, b.shape)
    out = Tensor(a.data + b.data)

    def rule():
        g = out.grad
        if a.requires_grad:
            a.grad += _reduce_grad(g, mode, "a")
        if b.requires_grad:
            b.grad += _reduce_grad(g, mode, "b")

    _record(out, (a, b), rule)
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    mode = _broadcast_mode(a.shape, b.shape)
    out = Tensor(a.data - b.data)

    def rule():
        g = out.grad
        if a.requires_grad:
            a.grad += _reduce_grad(g, mode, "a")
        if b.requires_grad:
            b.grad -= _reduce_grad(g, mode, "b")

    _record(out, (a, b), rule)
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    mode = _broadcast_mode(a.shape, b.shape)
    out = Tensor(a.data * b.data)

    def rule():
        g = out.grad
        if a.requires_grad:
            a.grad += _reduce_grad(g * b.data, mode, "a")
        if b.requires_grad:
            b.grad += _reduce_grad(g * a.data, mode, "b")

    _record(out, (a, b), rule)
    return out


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)

    def rule():
        g = out.grad
        if a.requires_grad:
            a.grad += g @ b.data.T
        if b.requires_grad:
            b.grad += a.data.T @ g

    _record(out, (a, b), rule)
    return out


# --- unary elementwise --------------------------------------------------------


def relu(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.maximum(x.data, 0.0))

    def rule():
        if x.requires_grad:
            # Subgradient at 0 fixed to 0.
            x.grad += out.grad * (x.data > 0.0)

    _record(out, (x,), rule)
    return out


def exp(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.exp(x.data))

    def rule():
        if x.requires_grad:
            x.grad += out.grad * out.data

    _record(out, (x,), rule)
    return out


def log(x) -> Tensor:
    x = _as_tensor(x)
    if not np.all(x.data > 0.0):
        raise DomainError("log requires strictly positive, finite input")
    out = Tensor(np.log(x.data))

    def rule():
        if x.requires_grad:
            x.grad += out.grad / x.data

    _record(out, (x,), rule)
    return out


def square(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(x.data * x.data)

    def rule():
        if x.requires_grad:
            x.grad += out.grad * (2.0 * x.data)

    _record(out, (x,), rule)
    return out


def reciprocal(x) -> Tensor:
    x = _as_tensor(x)
    if np.any(x.data == 0.0):
        raise DomainError("reciprocal of zero")
    out = Tensor(1.0 / x.data)

    def rule():
        if x.requires_grad:
            x.grad -= out.grad * out.data * out.data

    _record(out, (x,), rule)
    return out


# --- reductions ----------------------------------------------------------------


def _check_axis(x: Tensor, axis: int | None) -> None:
    if axis is not None and not (0 <= axis < x.data.ndim):
        raise ShapeError(f"axis {axis} out of range for shape {x.shape}")


def tsum(x, axis: int | None = None) -> Tensor:
    x = _as_tensor(x)
    _check_axis(x, axis)
    out = Tensor(x.data.sum(axis=axis))

    def rule():
        if x.requires_grad:
            g = out.grad
            if axis is None:
                x.grad += g
            else:
                x.grad += np.expand_dims(g, axis)

    _record(out, (x,), rule)
    return out


def tmean(x, axis: int | None = None) -> Tensor:
    x = _as_tensor(x)
    _check_axis(x, axis)
    count = x.data.size if axis is None else x.shape[axis]
    if count == 0:
        raise ShapeError("mean over zero elements")
    out = Tensor(x.data.mean(axis=axis))

    def rule():
        if x.requires_grad:
            g = out.grad
            if axis is None:
                x.grad += g / count
            else:
                x.grad += np.expand_dims(g, axis) / count

    _record(out, (x,), rule)
    return out


# --- softmax family -------------------------------------------------------------


def _check_finite(x: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{op} requires finite input")


def softmax(x) -> Tensor:
    """Row softmax (last axis) with max subtraction; exact Jacobian backward."""
    x = _as_tensor(x)
    if x.data.ndim not in (1, 2):
        raise ShapeError(f"softmax expects a vector or matrix, got {x.shape}")
    _check_finite(x.data, "softmax")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s)

    def rule():
        if x.requires_grad:
            g = out.grad
            x.grad += s * (g - (g * s).sum(axis=-1, keepdims=True))

    _record(out, (x,), rule)
    return out


def log_softmax(x) -> Tensor:
    x = _as_tensor(x)
    if x.data.ndim not in (1, 2):
        raise ShapeError(f"log_softmax expects a vector or matrix, got {x.shape}")
    _check_finite(x.data, "log_softmax")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    ls = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = Tensor(ls)

    def rule():
        if x.requires_grad:
            g = out.grad
            x.grad += g - np.exp(ls) * g.sum(axis=-1, keepdims=True)

    _record(out, (x,), rule)
    return out


# --- structural primitives -------------------------------------------------------


def scale_rows(m, v) -> Tensor:
    """Scale row i of matrix ``m`` by ``v[i]``."""
    m, v = _as_tensor(m), _as_tensor(v)
    if m.data.ndim != 2 or v.data.ndim != 1 or v.shape[0] != m.shape[0]:
        raise ShapeError(f"scale_rows expects (n,k) and (n,), got {m.shape}, {v.shape}")
    out = Tensor(m.data * v.data[:, None])

    def rule():
        g = out.grad
        if m.requires_grad:
            m.grad += g * v.data[:, None]
        if v.requires_grad:
            v.grad += (g * m.data).sum(axis=1)

    _record(out, (m, v), rule)
    return out


def take_column(m, j: int) -> Tensor:
    m = _as_tensor(m)
    if m.data.ndim != 2 or not (0 <= j < m.shape[1]):
        raise ShapeError(f"take_column({j}) invalid for shape {m.shape}")
    out = Tensor(m.data[:, j].copy())

    def rule():
        if m.requires_grad:
            m.grad[:, j] += out.grad

    _record(out, (m,), rule)
    return out


def gather_rows(x, idx) -> Tensor:
    """Select rows (leading axis) of ``x`` at integer positions ``idx``."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("gather_rows expects a 1-D index array")
    if x.data.ndim not in (1, 2):
        raise ShapeError(f"gather_rows expects a vector or matrix, got {x.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ShapeError("gather_rows index out of range")
    out = Tensor(x.data[idx])

    def rule():
        if x.requires_grad:
            np.add.at(x.grad, idx, out.grad)

    _record(out, (x,), rule)
    return out


def scatter_rows(x, idx, num_rows: int) -> Tensor:
    """Place rows of ``x`` at positions ``idx`` in a zero tensor of ``num_rows`` rows."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1 or idx.shape[0] != x.shape[0]:
        raise ShapeError("scatter_rows index must be 1-D, one entry per input row")
    if idx.size and (idx.min() < 0 or idx.max() >= num_rows):
        raise ShapeError("scatter_rows index out of range")
    if idx.size != np.unique(idx).size:
        raise ShapeError("scatter_rows indices must be unique")
    data = np.zeros((num_rows,) + x.shape[1:], dtype=np.float64)
    data[idx] = x.data
    out = Tensor(data)

    def rule():
        if x.requires_grad:
            x.grad += out.grad[idx]

    _record(out, (x,), rule)
    return out


def concat_cols(tensors: Sequence) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat_cols of nothing")
    if any(t.data.ndim != 2 for t in ts) or len({t.shape[0] for t in ts}) != 1:
        raise ShapeError("concat_cols expects matrices with equal row counts")
    out = Tensor(np.concatenate([t.data for t in ts], axis=1))
    offsets = np.cumsum([0] + [t.shape[1] for t in ts])

    def rule():
        g = out.grad
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                t.grad += g[:, lo:hi]

    _record(out, ts, rule)
    return out


def pick_per_row(m, idx) -> Tensor:
    """out[i] = m[i, idx[i]]; the per-row element gather used by losses."""
    m = _as_tensor(m)
    idx = np.asarray(idx, dtype=np.intp)
    if m.data.ndim != 2 or idx.shape != (m.shape[0],):
        raise ShapeError(f"pick_per_row expects (n,k) and (n,), got {m.shape}, {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= m.shape[1]):
        raise ShapeError("pick_per_row index out of range")
    rows = np.arange(m.shape[0])
    out = Tensor(m.data[rows, idx].copy())

    def rule():
        if m.requires_grad:
            np.add.at(m.grad, (rows, idx), out.grad)

    _record(out, (m,), rule)
    return out
