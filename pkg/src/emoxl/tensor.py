"""Dense tensors with reverse-mode automatic differentiation on a tape.

The op set is deliberately small: exactly what an LSTM classifier and a
Transformer-XL encoder-decoder need.  Ops execute eagerly on numpy arrays;
while a :class:`Tape` is active they also record a backward rule, and
:func:`backward` replays the tape once in reverse to accumulate gradients.

Floating-point width is a process-wide choice (:func:`set_default_dtype`):
float64 for numeric tests, float32 for the training/serving pipeline whose
checkpoints store raw 32-bit values.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .rng import Rng

_DEFAULT_DTYPE = np.float64
_CHECK_FINITE = False
_TAPES: list["Tape"] = []


class ShapeError(ValueError):
    """Raised when operand shapes cannot be combined."""


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be numpy float32 or float64")
    _DEFAULT_DTYPE = dtype


def default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def using_dtype(dtype):
    """Temporarily switch the process-wide element type."""
    prev = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


def set_debug_finite_checks(enabled: bool) -> None:
    """Assert every op output is finite (debug aid; off by default)."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)


class Tensor:
    """Contiguous row-major float array, optionally carrying a gradient."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.ascontiguousarray(data, dtype=dtype or _DEFAULT_DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Copy of the values with no gradient and no tape history."""
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class _TapeEntry:
    __slots__ = ("output", "inputs", "backward_fn", "name")

    def __init__(self, output, inputs, backward_fn, name):
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.name = name


class Tape:
    """Ordered record of ops; creation order is the topological order."""

    def __init__(self):
        self._entries: list[_TapeEntry] = []
        self._output_ids: set[int] = set()

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _TAPES.pop()
        assert popped is self, "tapes must unwind in LIFO order"

    def __len__(self) -> int:
        return len(self._entries)

    def _record(self, output: Tensor, inputs: tuple[Tensor, ...], backward_fn, name: str) -> None:
        self._entries.append(_TapeEntry(output, inputs, backward_fn, name))
        self._output_ids.add(id(output))


def _emit(out: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable, name: str) -> Tensor:
    if _CHECK_FINITE and not np.isfinite(out.data).all():
        raise FloatingPointError(f"non-finite values in output of {name}")
    if _TAPES:
        _TAPES[-1]._record(out, inputs, backward_fn, name)
    return out


def backward(loss: Tensor, tape: Tape) -> dict[Tensor, np.ndarray]:
    """Reverse pass over the tape, seeding dL/dloss = 1.

    Gradients accumulate additively, so a tensor feeding several consumers
    receives the sum of all path contributions.  Gradients of tensors with
    ``requires_grad`` are added into their ``.grad`` and returned.
    """
    if loss.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    if id(loss) not in tape._output_ids:
        raise ValueError("loss tensor was not produced on this tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    result: dict[Tensor, np.ndarray] = {}
    for entry in reversed(tape._entries):
        g_out = grads.get(id(entry.output))
        if g_out is None:
            continue
        for inp, g_in in zip(entry.inputs, entry.backward_fn(g_out)):
            if g_in is None:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + g_in
            else:
                grads[key] = g_in
            if inp.requires_grad:
                result[inp] = grads[key]
    for t, g in result.items():
        if t.grad is None:
            t.grad = g.copy()
        else:
            t.grad = t.grad + g
    return result


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so g collapses back to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data)

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return _emit(out, (a, b), bw, "matmul")


def _broadcast_op(a: Tensor, b: Tensor, fwd, bwd_a, bwd_b, name: str) -> Tensor:
    try:
        out = Tensor(fwd(a.data, b.data))
    except ValueError as e:
        raise ShapeError(f"{name}: cannot broadcast {a.shape} with {b.shape}") from e

    def bw(g):
        return _unbroadcast(bwd_a(g), a.shape), _unbroadcast(bwd_b(g), b.shape)

    return _emit(out, (a, b), bw, name)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _broadcast_op(a, b, np.add, lambda g: g, lambda g: g, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _broadcast_op(a, b, np.subtract, lambda g: g, lambda g: -g, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _broadcast_op(a, b, np.multiply,
                         lambda g: g * b.data, lambda g: g * a.data, "mul")


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = Tensor(a.data * s)
    return _emit(out, (a,), lambda g: (g * s,), "scale")


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(
            np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return _emit(out, tuple(parts), bw, "concat")


def slice_(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    if not (-a.ndim <= axis < a.ndim):
        raise ShapeError(f"slice axis {axis} invalid for shape {a.shape}")
    axis %= a.ndim
    n = a.shape[axis]
    if not (0 <= start <= stop <= n):
        raise ShapeError(f"slice [{start}:{stop}] out of range for dim {n}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = Tensor(a.data[index].copy())

    def bw(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _emit(out, (a,), bw, "slice")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose needs rank 2, got {a.shape}")
    out = Tensor(a.data.T.copy())
    return _emit(out, (a,), lambda g: (g.T,), "transpose")


def gather_rows(table: Tensor, ids) -> Tensor:
    """Embedding lookup: rows of `table` selected by integer `ids`.

    Backward scatter-adds, so repeated ids accumulate their gradients.
    """
    if table.ndim != 2:
        raise ShapeError(f"gather_rows table must be rank 2, got {table.shape}")
    idx = np.asarray(ids, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather_rows ids must be one-dimensional")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(f"gather_rows id out of range [0,{table.shape[0]})")
    out = Tensor(table.data[idx])

    def bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _emit(out, (table,), bw, "gather_rows")


def row_gather(x: Tensor, index) -> Tensor:
    """out[r, k] = x[r, index[r, k]] for a per-row integer index matrix."""
    if x.ndim != 2:
        raise ShapeError(f"row_gather input must be rank 2, got {x.shape}")
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 2 or idx.shape[0] != x.shape[0]:
        raise ShapeError(f"row_gather index shape {idx.shape} vs input {x.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[1]):
        raise IndexError(f"row_gather column index out of range [0,{x.shape[1]})")
    out = Tensor(np.take_along_axis(x.data, idx, axis=1))
    rows = np.arange(x.shape[0])[:, None]

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (rows, idx), g)
        return (gx,)

    return _emit(out, (x,), bw, "row_gather")


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign to avoid overflow in exp.
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(y)
    return _emit(out, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)
    return _emit(out, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0))
    return _emit(out, (a,), lambda g: (g * mask,), "relu")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along `axis` (max-subtraction)."""
    if not (-x.ndim <= axis < x.ndim):
        raise ShapeError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _emit(out, (x,), bw, "softmax")


def row_standardize(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row (last axis) mean-subtract and divide by population std + eps.

    A constant row has zero std and maps to exactly zero; the eps in the
    denominator (added to the std, not the variance) makes that case and
    its gradient well defined.
    """
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    sigma = np.sqrt((centered * centered).mean(axis=-1, keepdims=True))
    denom = sigma + eps
    y = centered / denom
    out = Tensor(y)

    def bw(g):
        g_mean = g.mean(axis=-1, keepdims=True)
        gy_mean = (g * y).mean(axis=-1, keepdims=True)
        sigma_safe = np.where(sigma > 0, sigma, 1.0)
        return ((g - g_mean) / denom - y * gy_mean / sigma_safe,)

    return _emit(out, (x,), bw, "row_standardize")


def dropout(x: Tensor, p: float, rng: Rng, training: bool) -> Tensor:
    """Inverted dropout: zero with probability p, survivors scaled by 1/(1-p).

    Identity (the same tensor object, bitwise) when not training or p == 0.
    The mask comes from the explicit seeded stream, so a fixed seed gives a
    fixed mask.
    """
    if not (0.0 <= p < 1.0):
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    u = rng.uniform(size=x.shape)
    keep = (u >= p).astype(x.data.dtype) / (1.0 - p)
    out = Tensor(x.data * keep)
    return _emit(out, (x,), lambda g: (g * keep,), "dropout")


def sum_(x: Tensor) -> Tensor:
    """Sum of all elements, as a shape-(1,) scalar."""
    out = Tensor(np.array([x.data.sum()]))
    return _emit(out, (x,), lambda g: (np.full_like(x.data, g.reshape(-1)[0]),), "sum")


def cross_entropy(logits: Tensor, targets, ignore_id: int | None = None) -> Tensor:
    """Mean of -log softmax(logits)[target] over non-ignored positions.

    Positions whose target equals `ignore_id` contribute nothing to the
    value or the gradient; if every position is ignored the loss is defined
    as 0 with zero gradient.
    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy logits must be [N, V], got {logits.shape}")
    t = np.asarray(targets, dtype=np.int64)
    if t.ndim != 1 or t.shape[0] != logits.shape[0]:
        raise ShapeError(f"targets shape {t.shape} vs logits {logits.shape}")
    v = logits.shape[1]
    valid = np.ones(t.shape[0], dtype=bool) if ignore_id is None else t != ignore_id
    bad = valid & ((t < 0) | (t >= v))
    if bad.any():
        raise IndexError(f"target {int(t[bad][0])} outside [0,{v})")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(e.sum(axis=1, keepdims=True))
    n_valid = int(valid.sum())
    if n_valid == 0:
        out = Tensor(np.zeros(1))
        return _emit(out, (logits,), lambda g: (np.zeros_like(logits.data),), "cross_entropy")

    rows = np.arange(t.shape[0])
    picked = np.where(valid, log_probs[rows, np.where(valid, t, 0)], 0.0)
    loss = -picked.sum() / n_valid
    out = Tensor(np.array([loss]))

    def bw(g):
        gl = probs.copy()
        gl[rows[valid], t[valid]] -= 1.0
        gl[~valid] = 0.0
        return (gl * (g.reshape(-1)[0] / n_valid),)

    return _emit(out, (logits,), bw, "cross_entropy")
