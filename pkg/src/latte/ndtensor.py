"""Minimal dense 2-D tensor with reverse-mode differentiation.

The op set is closed over exactly what the attention model needs: matmul,
transpose, add (with row-vector bias broadcast), elementwise maps, dropout,
row gather, column slice, reshape, segment softmax with a learnable
per-segment scale, segment weighted sum, and full reduction. Records land on
the active Tape in execution order, so walking the records backwards is a
valid reverse topological sweep.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericalError, ValidationError

_TAPES: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValidationError("tensors are 2-D")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValidationError("item() needs a 1x1 tensor")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of primitive applications for one backward sweep."""

    def __init__(self):
        self._records: list = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.pop()

    @staticmethod
    def active() -> "Tape | None":
        return _TAPES[-1] if _TAPES else None


def _make_output(value: np.ndarray, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    tape = Tape.active()
    out = Tensor(value, requires_grad=needs and tape is not None)
    if out.requires_grad:
        tape._records.append(backward_fn(out))
    return out


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate grads of every recorded tensor reachable from `loss`."""
    if loss.shape != (1, 1):
        raise ValidationError("loss must be a 1x1 tensor")
    if loss.grad is None:
        return
    loss.grad[:] = 1.0
    for fn in reversed(tape._records):
        fn()


def _grad(t: Tensor) -> np.ndarray | None:
    return t.grad if t.requires_grad else None


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValidationError(f"matmul shape mismatch {a.shape} x {b.shape}")
    value = a.data @ b.data

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad @ b.data.T
            if _grad(b) is not None:
                b.grad += a.data.T @ out.grad
        return fn

    return _make_output(value, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad.T
        return fn

    return _make_output(a.data.T, (a,), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; `b` may be a 1 x cols row vector (bias broadcast)."""
    if b.shape != a.shape and not (b.shape == (1, a.shape[1])):
        raise ValidationError(f"add shape mismatch {a.shape} + {b.shape}")
    value = a.data + b.data

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad
            if _grad(b) is not None:
                if b.shape == a.shape:
                    b.grad += out.grad
                else:
                    b.grad += out.grad.sum(axis=0, keepdims=True)
        return fn

    return _make_output(value, (a, b), bwd)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; `b` may be a Tensor or a constant array."""
    if not isinstance(b, Tensor):
        const = np.asarray(b, dtype=np.float64).reshape(a.shape)

        def bwd_c(out):
            def fn():
                if _grad(a) is not None:
                    a.grad += out.grad * const
            return fn

        return _make_output(a.data * const, (a,), bwd_c)
    if a.shape != b.shape:
        raise ValidationError(f"mul shape mismatch {a.shape} * {b.shape}")

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad * b.data
            if _grad(b) is not None:
                b.grad += out.grad * a.data
        return fn

    return _make_output(a.data * b.data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += c * out.grad
        return fn

    return _make_output(a.data * c, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    value = 1.0 / (1.0 + np.exp(-np.clip(a.data, -500, 500)))

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad * value * (1.0 - value)
        return fn

    return _make_output(value, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad * mask
        return fn

    return _make_output(a.data * mask, (a,), bwd)


def exp(a: Tensor) -> Tensor:
    value = np.exp(a.data)

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad * value
        return fn

    return _make_output(value, (a,), bwd)


def log(a: Tensor, floor: float = 1e-300) -> Tensor:
    clamped = np.maximum(a.data, floor)

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad / clamped
        return fn

    return _make_output(np.log(clamped), (a,), bwd)


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), evaluated stably."""
    value = np.logaddexp(0.0, a.data)

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad / (1.0 + np.exp(-a.data))
        return fn

    return _make_output(value, (a,), bwd)


def dropout(a: Tensor, p: float, seed: int) -> Tensor:
    """Inverted dropout: retained entries are scaled by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValidationError("dropout probability must be in [0, 1)")
    if p == 0.0:
        return scale(a, 1.0)
    rng = np.random.default_rng(seed)
    mask = (rng.random(a.shape) >= p) / (1.0 - p)

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad * mask
        return fn

    return _make_output(a.data * mask, (a,), bwd)


def gather_rows(a: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ValidationError("gather index out of range")

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                np.add.at(a.grad, idx, out.grad)
        return fn

    return _make_output(a.data[idx], (a,), bwd)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= a.shape[1]:
        raise ValidationError("column slice out of range")

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad[:, start:stop] += out.grad
        return fn

    return _make_output(a.data[:, start:stop].copy(), (a,), bwd)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise concatenation: each output row is [a_row || b_row]."""
    if a.shape[0] != b.shape[0]:
        raise ValidationError(f"concat row mismatch {a.shape} || {b.shape}")
    na = a.shape[1]

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad[:, :na]
            if _grad(b) is not None:
                b.grad += out.grad[:, na:]
        return fn

    return _make_output(np.hstack([a.data, b.data]), (a, b), bwd)


def reshape(a: Tensor, rows: int, cols: int) -> Tensor:
    if rows * cols != a.data.size:
        raise ValidationError("reshape size mismatch")

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad.reshape(a.shape)
        return fn

    return _make_output(a.data.reshape(rows, cols), (a,), bwd)


def _segment_bounds(seg: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.r_[1, np.diff(seg)])


def segment_softmax(values: Tensor, segment_ids, scl: Tensor | None = None) -> Tensor:
    """Softmax within each contiguous segment of a column vector.

    Scores are first multiplied by the scalar `scl` (the learnable
    sharpening factor), then max-shifted and normalized per segment.
    Gradients flow to both the values and the scale.
    """
    seg = np.asarray(segment_ids, dtype=np.int64)
    if values.shape[1] != 1 or seg.shape != (values.shape[0],):
        raise ValidationError("segment_softmax needs a column vector and matching ids")
    if seg.size == 0:
        raise ValidationError("empty segment")
    if np.any(np.diff(seg) < 0):
        raise ValidationError("segment ids must be sorted non-decreasing")
    if scl is not None and scl.shape != (1, 1):
        raise ValidationError("scale must be 1x1")

    tau = scl.data[0, 0] if scl is not None else 1.0
    v = values.data[:, 0]
    s = tau * v
    starts = _segment_bounds(seg)
    segmax = np.maximum.reduceat(s, starts)
    # map each element to its dense segment index
    dense = np.cumsum(np.r_[0, np.diff(seg) != 0])
    ex = np.exp(s - segmax[dense])
    denom = np.add.reduceat(ex, starts)
    alpha = ex / denom[dense]
    value = alpha[:, None]

    def bwd(out):
        def fn():
            g = out.grad[:, 0]
            dot = np.add.reduceat(alpha * g, starts)
            t = alpha * (g - dot[dense])
            if _grad(values) is not None:
                values.grad[:, 0] += tau * t
            if scl is not None and _grad(scl) is not None:
                scl.grad[0, 0] += float(np.dot(v, t))
        return fn

    inputs = (values,) if scl is None else (values, scl)
    return _make_output(value, inputs, bwd)


def segment_weighted_sum(
    weights: Tensor, values: Tensor, segment_ids, num_segments: int
) -> Tensor:
    """out[s] = sum over elements i with segment_ids[i] == s of w_i * v_i."""
    seg = np.asarray(segment_ids, dtype=np.int64)
    if weights.shape != (values.shape[0], 1) or seg.shape != (values.shape[0],):
        raise ValidationError("segment_weighted_sum shape mismatch")
    if seg.size and (seg.min() < 0 or seg.max() >= num_segments):
        raise ValidationError("segment id out of range")
    out_val = np.zeros((num_segments, values.shape[1]))
    np.add.at(out_val, seg, weights.data * values.data)

    def bwd(out):
        def fn():
            g = out.grad[seg]
            if _grad(weights) is not None:
                weights.grad[:, 0] += np.sum(g * values.data, axis=1)
            if _grad(values) is not None:
                values.grad += g * weights.data
        return fn

    return _make_output(out_val, (weights, values), bwd)


def scale_rows(a: Tensor, col: Tensor) -> Tensor:
    """Multiply row i of `a` by the scalar col[i, 0]."""
    if col.shape != (a.shape[0], 1):
        raise ValidationError(f"scale_rows needs a {a.shape[0]}x1 column")
    value = a.data * col.data

    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad * col.data
            if _grad(col) is not None:
                col.grad += np.sum(out.grad * a.data, axis=1, keepdims=True)
        return fn

    return _make_output(value, (a, col), bwd)


def reduce_sum(a: Tensor) -> Tensor:
    def bwd(out):
        def fn():
            if _grad(a) is not None:
                a.grad += out.grad[0, 0]
        return fn

    return _make_output(np.array([[a.data.sum()]]), (a,), bwd)


# ---------------------------------------------------------------------------
# verification


def grad_check(f, params: list[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    `f` must rebuild its forward pass on every call and return a 1x1 tensor.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = f()
    backward(tape, loss)
    analytic = [p.grad.copy() for p in params]

    max_rel = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.ravel()
        gflat = grad.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            f_plus = f().item()
            flat[k] = orig - eps
            f_minus = f().item()
            flat[k] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericalError("non-finite value during finite differencing")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(gflat[k] - numeric) / max(1e-12, abs(gflat[k]) + abs(numeric))
            max_rel = max(max_rel, rel)
    return max_rel
